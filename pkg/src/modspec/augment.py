"""Additive-noise augmentation at controlled SNR for self-supervised training."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .corpus import read_wav
from .dsp import AudioBuffer
from .errors import ConfigurationError


@dataclass
class AugmentPolicy:
    """When and how hard to add noise: probability plus a uniform SNR range."""

    apply_probability: float = 0.8
    snr_lo_db: float = 12.0
    snr_hi_db: float = 18.0
    noise_manifest: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if not 0.0 <= self.apply_probability <= 1.0:
            raise ConfigurationError(
                f"apply_probability {self.apply_probability} outside [0, 1]"
            )
        if self.snr_lo_db > self.snr_hi_db:
            raise ConfigurationError(
                f"snr_lo_db {self.snr_lo_db} > snr_hi_db {self.snr_hi_db}"
            )
        if self.apply_probability > 0.0 and not self.noise_manifest:
            raise ConfigurationError("augmentation enabled but noise manifest is empty")


def load_noise_manifest(path: str | Path) -> list[str]:
    """Newline-delimited noise file paths; blank lines ignored."""
    base = Path(path).parent
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            p = Path(line)
            out.append(str(p if p.is_absolute() else base / p))
    return out


def fit_noise_to_length(noise: np.ndarray, length: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Tile the noise with a random circular offset, then crop to ``length``."""
    offset = int(rng.integers(0, noise.size))
    rolled = np.roll(noise, -offset)
    if rolled.size >= length:
        return rolled[:length]
    reps = -(-length // rolled.size)
    return np.tile(rolled, reps)[:length]


def mix_at_snr(speech: AudioBuffer, noise: AudioBuffer,
               snr_db: float) -> tuple[AudioBuffer, bool]:
    """Add gain-scaled noise so speech-to-noise power hits ``snr_db``.

    Powers are measured over the full utterance. Returns (mixed, applied);
    zero-power noise (or speech) skips the mix with a warning. Output is not
    renormalized, so samples may leave [-1, 1].
    """
    if speech.sample_rate_hz != noise.sample_rate_hz:
        raise ConfigurationError(
            f"sample rate mismatch: speech {speech.sample_rate_hz} Hz, "
            f"noise {noise.sample_rate_hz} Hz"
        )
    if noise.samples.size != speech.samples.size:
        raise ConfigurationError("noise must be tiled or cropped to the speech length")
    p_speech = float(np.mean(speech.samples ** 2))
    p_noise = float(np.mean(noise.samples ** 2))
    if p_noise <= 0.0:
        warnings.warn("zero-power noise buffer, augmentation skipped")
        return speech, False
    if p_speech <= 0.0:
        warnings.warn("zero-power speech buffer, augmentation skipped")
        return speech, False
    gain = np.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))
    mixed = speech.samples + gain * noise.samples
    return AudioBuffer(samples=mixed, sample_rate_hz=speech.sample_rate_hz), True


def maybe_augment(speech: AudioBuffer, policy: AugmentPolicy, rng_seed: int,
                  noise_loader: Callable[[str], AudioBuffer] = read_wav,
                  noise_cache: dict[str, AudioBuffer] | None = None,
                  ) -> tuple[AudioBuffer, bool, float | None]:
    """Seed-driven augmentation decision: (audio, applied, snr_db or None).

    With probability ``apply_probability`` picks a noise file uniformly from
    the manifest and an SNR uniformly from [snr_lo_db, snr_hi_db]; all draws
    come from a generator seeded with ``rng_seed``, so results are
    reproducible. When not applied the input buffer is returned untouched.
    """
    policy.validate()
    rng = np.random.default_rng(rng_seed)
    if rng.uniform() >= policy.apply_probability:
        return speech, False, None
    pick = int(rng.integers(0, len(policy.noise_manifest)))
    snr_db = float(rng.uniform(policy.snr_lo_db, policy.snr_hi_db))
    noise_path = policy.noise_manifest[pick]
    if noise_cache is not None and noise_path in noise_cache:
        noise = noise_cache[noise_path]
    else:
        noise = noise_loader(noise_path)
        if noise_cache is not None:
            noise_cache[noise_path] = noise
    fitted = fit_noise_to_length(np.asarray(noise.samples, dtype=np.float64),
                                 speech.samples.size, rng)
    mixed, applied = mix_at_snr(
        speech, AudioBuffer(samples=fitted, sample_rate_hz=noise.sample_rate_hz), snr_db
    )
    if not applied:
        return speech, False, None
    return mixed, True, snr_db
