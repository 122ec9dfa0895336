"""Training loop for the modulation predictor: Adam, schedule, checkpoints.

Each step samples one utterance, optionally mixes in noise, deletes the 2-8 Hz
modulations of one randomly chosen window, and takes an Adam step on the L1
loss between the network's prediction and the clean spectrogram over the
masked frames. Every random draw derives from the master seed and the step
index, so a run is exactly reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import dsp
from .augment import AugmentPolicy, maybe_augment
from .corpus import (CorpusManifest, read_checkpoint, read_wav, write_checkpoint)
from .dsp import AudioBuffer, FdlpSpectrogram, MaskSpec
from .errors import ConfigurationError, DivergenceError, FormatError, ShortUtteranceError
from .predictor import (PredictorConfig, PredictorParams, backward, init_params,
                        param_shapes, sinusoidal_positions)


@dataclass
class TrainHyper:
    steps: int = 2000
    learning_rate: float = 1e-4
    warmup_frac: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    checkpoint_interval: int = 500
    loss_scope: str = "masked"          # or "full" for the ablation variant
    target_source: str = "clean"        # or "augmented"
    mask_lo_hz: float = 2.0
    mask_hi_hz: float = 8.0
    lp_order: int = dsp.DEFAULT_LP_ORDER
    master_seed: int = 0

    def validate(self) -> None:
        if self.steps < 0:
            raise ConfigurationError("steps must be >= 0")
        if not 0.0 <= self.warmup_frac <= 1.0:
            raise ConfigurationError("warmup_frac must be in [0, 1]")
        if self.loss_scope not in ("masked", "full"):
            raise ConfigurationError(f"unknown loss_scope {self.loss_scope!r}")
        if self.target_source not in ("clean", "augmented"):
            raise ConfigurationError(f"unknown target_source {self.target_source!r}")


@dataclass
class TrainState:
    params: PredictorParams
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    step: int = 0
    master_seed: int = 0


@dataclass
class StepMetrics:
    step: int
    loss: float
    lr: float


def init_train_state(config: PredictorConfig, master_seed: int = 0,
                     dtype=np.float32) -> TrainState:
    params = init_params(config, dtype=dtype)
    zeros = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    return TrainState(params=params,
                      adam_m=zeros,
                      adam_v={k: v.copy() for k, v in zeros.items()},
                      master_seed=master_seed)


def learning_rate_at(step: int, hyper: TrainHyper) -> float:
    """Linear warmup over the first warmup_frac of steps, then constant."""
    warmup = max(1, int(round(hyper.warmup_frac * hyper.steps)))
    if step < warmup:
        return hyper.learning_rate * (step + 1) / warmup
    return hyper.learning_rate


def adam_step(state: TrainState, grads: dict[str, np.ndarray], lr: float,
              hyper: TrainHyper) -> None:
    state.step += 1
    t = state.step
    b1, b2 = hyper.beta1, hyper.beta2
    for name, g in grads.items():
        m = state.adam_m[name]
        v = state.adam_v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        mhat = m / (1.0 - b1 ** t)
        vhat = v / (1.0 - b2 ** t)
        state.params.tensors[name] -= (lr * mhat / (np.sqrt(vhat) + hyper.adam_eps)
                                       ).astype(state.params.dtype, copy=False)


def _step_seed(master_seed: int, step: int, stream: int) -> int:
    """Stable per-step, per-purpose seed derived from the master seed."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(step, stream))
    return int(ss.generate_state(1)[0])


def step_features(audio: AudioBuffer, clean_audio: AudioBuffer | None,
                  hyper: TrainHyper, seed: int,
                  clean_cache: dict | None = None, cache_key: str | None = None,
                  ) -> tuple[FdlpSpectrogram, FdlpSpectrogram]:
    """Masked network input and loss target for one training step.

    ``audio`` is the (possibly augmented) input signal; ``clean_audio``, when
    given, supplies the target spectrogram (denoising-style training). The
    masked window index is drawn once and shared by both sides. Per-utterance
    clean analyses can be memoized in ``clean_cache`` keyed by ``cache_key``.
    """
    n_frames = dsp.utterance_frame_count(audio.samples.size)
    n_windows = dsp.window_count(audio.samples.size)
    if audio.samples.size < dsp.WINDOW_SAMPLES:
        raise ShortUtteranceError("utterance shorter than one analysis window")
    mask = dsp.resolve_mask_window(
        MaskSpec.from_hz(hyper.mask_lo_hz, hyper.mask_hi_hz), n_windows, seed)

    def clean_spectra(buf: AudioBuffer, key: str | None):
        if clean_cache is not None and key is not None and key in clean_cache:
            return clean_cache[key]
        spectra = dsp.compute_modulation_spectra(buf, order=hyper.lp_order)
        if clean_cache is not None and key is not None:
            clean_cache[key] = spectra
        return spectra

    if clean_audio is None or clean_audio is audio:
        spectra = clean_spectra(audio, cache_key)
        target = dsp.spectrogram_from_spectra(spectra, n_frames, mask=None,
                                              lp_order=hyper.lp_order)
        masked = dsp.spectrogram_from_spectra(spectra, n_frames, mask=mask,
                                              lp_order=hyper.lp_order)
    else:
        input_spectra = dsp.compute_modulation_spectra(audio, order=hyper.lp_order)
        masked = dsp.spectrogram_from_spectra(input_spectra, n_frames, mask=mask,
                                              lp_order=hyper.lp_order)
        target_spectra = clean_spectra(clean_audio, cache_key)
        target = dsp.spectrogram_from_spectra(target_spectra, n_frames, mask=None,
                                              lp_order=hyper.lp_order)
    target.masked_frame_range = masked.masked_frame_range
    return dsp.subtract_band_means(masked, target)


def train(manifest: CorpusManifest, config: PredictorConfig,
          policy: AugmentPolicy | None, hyper: TrainHyper,
          checkpoint_path: str | Path | None = None,
          metrics_path: str | Path | None = None,
          log: Callable[[str], None] | None = None,
          feature_cache: dict | None = None,
          ) -> tuple[TrainState, list[StepMetrics]]:
    """Run the self-supervised training loop; returns the state and step log."""
    hyper.validate()
    usable = [e for e in manifest.entries if e.duration_s * dsp.SAMPLE_RATE_HZ
              >= dsp.WINDOW_SAMPLES]
    if not usable:
        raise ConfigurationError("corpus has no utterances of at least 1.5 s")
    if policy is not None:
        policy.validate()

    state = init_train_state(config, master_seed=hyper.master_seed)
    metrics: list[StepMetrics] = []
    audio_cache: dict[str, AudioBuffer] = {}
    noise_cache: dict[str, AudioBuffer] = {}
    if feature_cache is None:
        feature_cache = {}

    writer = None
    metrics_file = None
    if metrics_path is not None:
        metrics_file = open(metrics_path, "w", newline="", encoding="utf-8")
        writer = csv.writer(metrics_file)
        writer.writerow(["step", "loss", "lr"])

    def checkpoint(path):
        if path is not None:
            save_checkpoint(state.params, path)

    try:
        picker = np.random.default_rng(
            np.random.SeedSequence(entropy=hyper.master_seed, spawn_key=(0xC0FFEE,)))
        for step in range(hyper.steps):
            entry = usable[int(picker.integers(0, len(usable)))]
            if entry.utterance_id not in audio_cache:
                audio_cache[entry.utterance_id] = read_wav(manifest.resolve(entry))
            clean = audio_cache[entry.utterance_id]

            if policy is not None and policy.apply_probability > 0.0:
                audio, applied, _snr = maybe_augment(
                    clean, policy, _step_seed(hyper.master_seed, step, 1),
                    noise_cache=noise_cache)
            else:
                audio, applied = clean, False

            target_audio = clean if hyper.target_source == "clean" else None
            # the memoized analysis must only ever hold the clean signal
            cache_key = entry.utterance_id \
                if (not applied or hyper.target_source == "clean") else None
            try:
                net_in, target = step_features(
                    audio, target_audio if applied else None, hyper,
                    _step_seed(hyper.master_seed, step, 2),
                    clean_cache=feature_cache, cache_key=cache_key)
            except ShortUtteranceError:
                continue

            loss, grads = backward(state.params, net_in, target,
                                   loss_scope=hyper.loss_scope)
            if not math.isfinite(loss):
                checkpoint(checkpoint_path)
                raise DivergenceError(f"loss became {loss} at step {step}")
            lr = learning_rate_at(step, hyper)
            adam_step(state, grads, lr, hyper)

            metrics.append(StepMetrics(step=step, loss=loss, lr=lr))
            if writer is not None:
                writer.writerow([step, repr(loss), repr(lr)])
            if log is not None and (step % 100 == 0 or step == hyper.steps - 1):
                log(f"step {step}: loss {loss:.5f} lr {lr:.2e}")
            if (checkpoint_path is not None and hyper.checkpoint_interval > 0
                    and (step + 1) % hyper.checkpoint_interval == 0):
                checkpoint(checkpoint_path)
        checkpoint(checkpoint_path)
    finally:
        if metrics_file is not None:
            metrics_file.close()
    return state, metrics


# --------------------------------------------------------------------------- persistence

def save_checkpoint(params: PredictorParams, path: str | Path) -> None:
    cfg = params.config
    config_fields = {"input_dim": cfg.input_dim, "model_dim": cfg.model_dim,
                     "layer_count": cfg.layer_count, "head_count": cfg.head_count,
                     "ffn_dim": cfg.ffn_dim, "max_frames": cfg.max_frames,
                     "seed": cfg.seed}
    write_checkpoint(path, config_fields, params.tensors)


def export_encoder(state: TrainState, path: str | Path) -> None:
    """Write the trained encoder weights in the documented checkpoint format."""
    save_checkpoint(state.params, path)


def load_checkpoint(path: str | Path, dtype=np.float32) -> PredictorParams:
    """Read a checkpoint, validating every tensor shape against its config."""
    config_fields, tensors = read_checkpoint(path)
    config = PredictorConfig(**config_fields)
    config.validate()
    expected = param_shapes(config)
    missing = sorted(set(expected) - set(tensors))
    if missing:
        raise FormatError(f"{path}: checkpoint is missing tensors {missing[:4]}")
    extra = sorted(set(tensors) - set(expected))
    if extra:
        raise FormatError(f"{path}: checkpoint has unexpected tensors {extra[:4]}")
    for name, shape in expected.items():
        if tensors[name].shape != shape:
            raise FormatError(
                f"{path}: tensor '{name}' has shape {tensors[name].shape}, "
                f"config implies {shape}"
            )
    cast = {k: v.astype(dtype) for k, v in tensors.items()}
    positions = sinusoidal_positions(config.max_frames, config.model_dim, dtype)
    return PredictorParams(config=config, tensors=cast, positions=positions)
