"""Command-line interface: extract features, train, probe layers, export weights.

Configuration precedence for ``train`` is defaults < --config file < --set
key=value overrides. Every subcommand is deterministic given its --seed.
``MODSPEC_THREADS`` caps the worker count used for batch feature extraction.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dsp
from .augment import AugmentPolicy, load_noise_manifest
from .corpus import (CorpusManifest, ManifestEntry, load_manifest, read_wav,
                     write_features)
from .errors import (ConfigurationError, DivergenceError, FormatError,
                     ModspecError)
from .predictor import PredictorConfig, forward
from .probe import emit_report, layer_modulation_spectra
from .training import TrainHyper, export_encoder, load_checkpoint, train

CONFIG_DEFAULTS = {
    "model.model_dim": 256,
    "model.layer_count": 12,
    "model.head_count": 8,
    "model.ffn_dim": 2048,
    "model.max_frames": 3000,
    "train.steps": 2000,
    "train.learning_rate": 1e-4,
    "train.warmup_frac": 0.1,
    "train.checkpoint_interval": 500,
    "train.loss_scope": "masked",
    "train.target_source": "clean",
    "train.mask_lo_hz": 2.0,
    "train.mask_hi_hz": 8.0,
    "train.lp_order": dsp.DEFAULT_LP_ORDER,
    "augment.probability": 0.8,
    "augment.snr_lo_db": 12.0,
    "augment.snr_hi_db": 18.0,
}


def _flatten(obj, prefix=""):
    out = {}
    for key, value in obj.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, f"{name}."))
        else:
            out[name] = value
    return out


def build_run_config(config_path: str | None, overrides: list[str]) -> dict:
    """Merge defaults, an optional JSON config file, and key=value overrides."""
    merged = dict(CONFIG_DEFAULTS)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                merged.update(_flatten(json.load(fh)))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {config_path}: {exc}") from exc
    for item in overrides or []:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in CONFIG_DEFAULTS:
            raise ConfigurationError(f"unknown config key {key!r}")
        try:
            merged[key] = json.loads(raw)
        except json.JSONDecodeError:
            merged[key] = raw
    unknown = set(merged) - set(CONFIG_DEFAULTS)
    if unknown:
        raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
    return merged


def _parse_mask(text: str | None) -> dsp.MaskSpec | None:
    if text is None:
        return None
    try:
        lo, hi = text.split(":")
        return dsp.MaskSpec.from_hz(float(lo), float(hi))
    except ValueError as exc:
        raise ConfigurationError(f"--mask expects LO:HI in Hz, got {text!r}") from exc


def _extract_one(task) -> tuple[str, str | None, str | None]:
    """Worker for batch extraction; returns (id, summary, error)."""
    utt_id, path, mask_lo_hi, seed, out_dir = task
    try:
        audio = read_wav(path)
        mask = dsp.MaskSpec.from_hz(*mask_lo_hi) if mask_lo_hi else None
        masked, clean = dsp.extract_features(audio, mask=mask, rng_seed=seed)
        out_dir = Path(out_dir)
        safe = utt_id.replace("/", "_")
        write_features(out_dir / f"{safe}.masked.fdlp", masked)
        write_features(out_dir / f"{safe}.clean.fdlp", clean)
        windows = dsp.window_count(audio.samples.size)
        masked_win = (masked.masked_frame_range[0] // dsp.FRAME_HOP
                      if masked.masked_frame_range else None)
        return utt_id, (f"{utt_id}: windows={windows} "
                        f"masked_window={masked_win} frames={clean.frame_count}"), None
    except Exception as exc:  # report per-utterance failures, keep the batch going
        return utt_id, None, f"{utt_id}: {exc}"


def _worker_count(n_tasks: int) -> int:
    env = os.environ.get("MODSPEC_THREADS")
    if env is None:
        return 1
    try:
        limit = int(env)
    except ValueError as exc:
        raise ConfigurationError(f"MODSPEC_THREADS={env!r} is not an integer") from exc
    return max(1, min(limit, n_tasks))


def cmd_extract(args) -> int:
    if bool(args.audio) == bool(args.manifest):
        raise ConfigurationError("give audio paths or --manifest, not both or neither")
    if args.manifest:
        manifest = load_manifest(args.manifest)
        items = [(e.utterance_id, str(manifest.resolve(e))) for e in manifest.entries]
    else:
        items = [(Path(p).stem, p) for p in args.audio]
    mask = _parse_mask(args.mask)
    mask_lo_hi = (mask.lo_hz, mask.hi_hz) if mask else None
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for index, (utt_id, path) in enumerate(items):
        seed = int(np.random.SeedSequence(entropy=args.seed,
                                          spawn_key=(index,)).generate_state(1)[0])
        tasks.append((utt_id, path, mask_lo_hi, seed, str(out_dir)))

    workers = _worker_count(len(tasks))
    if workers > 1:
        import multiprocessing

        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_extract_one, tasks)
    else:
        results = [_extract_one(t) for t in tasks]

    failures = 0
    for _utt_id, summary, error in results:
        if error is not None:
            failures += 1
            print(error, file=sys.stderr)
        else:
            print(summary)
    return 1 if failures else 0


def cmd_train(args) -> int:
    run = build_run_config(args.config, args.set)
    if args.steps is not None:
        run["train.steps"] = args.steps
    config = PredictorConfig(model_dim=int(run["model.model_dim"]),
                             layer_count=int(run["model.layer_count"]),
                             head_count=int(run["model.head_count"]),
                             ffn_dim=int(run["model.ffn_dim"]),
                             max_frames=int(run["model.max_frames"]),
                             seed=args.seed)
    config.validate()
    hyper = TrainHyper(steps=int(run["train.steps"]),
                       learning_rate=float(run["train.learning_rate"]),
                       warmup_frac=float(run["train.warmup_frac"]),
                       checkpoint_interval=int(run["train.checkpoint_interval"]),
                       loss_scope=str(run["train.loss_scope"]),
                       target_source=str(run["train.target_source"]),
                       mask_lo_hz=float(run["train.mask_lo_hz"]),
                       mask_hi_hz=float(run["train.mask_hi_hz"]),
                       lp_order=int(run["train.lp_order"]),
                       master_seed=args.seed)
    probability = float(run["augment.probability"])
    policy = None
    if probability > 0.0:
        if not args.noise_manifest:
            raise ConfigurationError(
                "augment.probability > 0 requires --noise-manifest "
                "(or set augment.probability=0)"
            )
        policy = AugmentPolicy(apply_probability=probability,
                               snr_lo_db=float(run["augment.snr_lo_db"]),
                               snr_hi_db=float(run["augment.snr_hi_db"]),
                               noise_manifest=load_noise_manifest(args.noise_manifest))
        policy.validate()
    manifest = load_manifest(args.manifest)
    if not manifest.entries:
        raise ConfigurationError(f"manifest {args.manifest} is empty")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    metrics_path = Path(args.metrics) if args.metrics else out.with_suffix(".metrics.csv")
    state, metrics = train(manifest, config, policy, hyper,
                           checkpoint_path=out, metrics_path=metrics_path,
                           log=lambda msg: print(msg, flush=True))
    if metrics:
        from .plots import save_loss_curve
        save_loss_curve([m.step for m in metrics], [m.loss for m in metrics],
                        metrics_path.with_suffix(".png"))
    print(f"wrote checkpoint {out} and metrics {metrics_path} "
          f"({state.step} steps)")
    return 0


def cmd_probe(args) -> int:
    params = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.manifest)
    usable = [e for e in manifest.entries
              if e.duration_s * dsp.SAMPLE_RATE_HZ >= dsp.WINDOW_SAMPLES]
    if not usable:
        raise ConfigurationError("manifest has no utterances of at least 1.5 s")
    rng = np.random.default_rng(args.seed)
    count = min(args.utterances, len(usable))
    picks = rng.choice(len(usable), size=count, replace=False)
    traces = []
    for i in sorted(int(p) for p in picks):
        entry = usable[i]
        audio = read_wav(manifest.resolve(entry))
        _, clean = dsp.extract_features(audio)
        net_in, _ = dsp.subtract_band_means(clean, clean)
        _, trace = forward(params, net_in, capture=True)
        traces.append(trace)
    report = layer_modulation_spectra(traces)
    written = emit_report(report, args.out)
    for kind, path in written.items():
        print(f"{kind}: {path}")
    return 0


def cmd_export(args) -> int:
    params = load_checkpoint(args.checkpoint)
    from .training import TrainState

    state = TrainState(params=params, adam_m={}, adam_v={}, step=0)
    export_encoder(state, args.out)
    print(f"exported encoder weights to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modspec",
        description="Self-supervised speech modulation learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="compute FDLP feature files from WAVs")
    p.add_argument("audio", nargs="*", help="WAV files (or use --manifest)")
    p.add_argument("--manifest", help="JSON-lines corpus manifest")
    p.add_argument("--mask", help="modulation band to delete, e.g. 2:8 (Hz)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory for .fdlp files")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train the modulation predictor")
    p.add_argument("manifest", help="JSON-lines corpus manifest")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--noise-manifest", help="newline-delimited noise WAV list")
    p.add_argument("--steps", type=int, help="override train.steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. model.model_dim=64")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--metrics", help="metrics CSV path (default: <out>.metrics.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("probe", help="layer-wise temporal modulation report")
    p.add_argument("checkpoint")
    p.add_argument("manifest")
    p.add_argument("--utterances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("export", help="re-export encoder weights from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 2
    except ModspecError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
