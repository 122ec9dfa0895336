"""Synthetic speech-like test corpora.

Generates utterances with the gross acoustic structure the pipeline cares
about: syllable-rate (2-8 Hz, centered near 4 Hz) amplitude modulation of
harmonic "voiced" segments shaped by randomized formant resonances, plus
occasional fricative-like noise bursts and short word pauses. Good enough to
exercise feature extraction, training, and the layer probes at desk scale;
not intended to sound like speech.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import CorpusManifest, save_manifest, scan_corpus, write_wav
from .dsp import SAMPLE_RATE_HZ, AudioBuffer


def _formant_gains(freqs_hz: np.ndarray, formants: np.ndarray,
                   bandwidths: np.ndarray) -> np.ndarray:
    """Sum of Gaussian resonance bumps evaluated at the given frequencies."""
    gains = np.zeros_like(freqs_hz)
    for fc, bw in zip(formants, bandwidths):
        gains += np.exp(-0.5 * ((freqs_hz - fc) / bw) ** 2)
    return gains + 1e-3


def _voiced_syllable(rng: np.random.Generator, n: int, f0: float,
                     formants: np.ndarray) -> np.ndarray:
    """Harmonic complex through formant resonances."""
    bandwidths = np.array([80.0, 120.0, 180.0]) * rng.uniform(0.9, 1.2)
    harmonics = np.arange(1, int(7500.0 / f0) + 1)
    gains = _formant_gains(harmonics * f0, formants, bandwidths)
    phases = rng.uniform(0.0, 2.0 * np.pi, harmonics.size)
    t = np.arange(n) / SAMPLE_RATE_HZ
    drift = 1.0 + rng.uniform(-0.03, 0.03) * t / max(t[-1], 1e-9)
    angles = 2.0 * np.pi * f0 * np.outer(t * drift, harmonics) + phases
    wave = np.cos(angles) @ gains
    return wave / (np.max(np.abs(wave)) + 1e-12)


def _fricative_syllable(rng: np.random.Generator, n: int) -> np.ndarray:
    """High-band filtered noise burst."""
    noise = rng.standard_normal(n)
    spectrum = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE_HZ)
    lo, hi = rng.uniform(1800.0, 3000.0), rng.uniform(4500.0, 7000.0)
    band = np.exp(-0.5 * ((freqs - (lo + hi) / 2) / ((hi - lo) / 2)) ** 2)
    shaped = np.fft.irfft(spectrum * band, n=n)
    return shaped / (np.max(np.abs(shaped)) + 1e-12)


def synth_utterance(rng: np.random.Generator, duration_s: float) -> AudioBuffer:
    """One utterance of syllable-modulated pseudo-speech at 16 kHz.

    Design constraints that keep the modulation energy at the syllabic rate
    rather than in slower structure: syllable onsets sit on a per-utterance
    grid (no cumulative timing drift), the voice (pitch, formants, rate) only
    jitters mildly within an utterance, every syllable carries broadband
    aspiration so all 20 bands swing together, and a continuous quiet breath
    bed keeps gaps and pauses off the log-domain silence floor.
    """
    n_total = int(round(duration_s * SAMPLE_RATE_HZ))
    out = np.zeros(n_total)
    rate_hz = rng.uniform(3.0, 5.0)          # syllabic rate, inside 2-8 Hz
    period = int(SAMPLE_RATE_HZ / rate_hz)
    f0_base = rng.uniform(95.0, 230.0)
    formant_base = np.array([rng.uniform(320.0, 800.0),
                             rng.uniform(950.0, 2100.0),
                             rng.uniform(2300.0, 3200.0)])
    for k in range(n_total // period):
        pos = k * period
        n_syl = min(int(period * rng.uniform(0.97, 1.03)), n_total - pos)
        if n_syl < 400:
            continue
        if rng.uniform() < 0.10:             # occasional word pause
            continue
        f0 = f0_base * rng.uniform(0.97, 1.03)
        formants = formant_base * rng.uniform(0.95, 1.05, 3)
        voiced = _voiced_syllable(rng, n_syl, f0, formants)
        aspiration = rng.standard_normal(n_syl)
        aspiration *= 0.12 / (np.sqrt(np.mean(aspiration ** 2)) + 1e-12)
        if rng.uniform() < 0.10:             # fricative-like syllable
            syl = 0.25 * voiced + _fricative_syllable(rng, n_syl) + aspiration
        else:
            syl = voiced + aspiration
        envelope = 0.02 + 0.98 * np.sin(np.pi * np.arange(n_syl) / n_syl) ** 2
        out[pos:pos + n_syl] += rng.uniform(0.85, 1.0) * envelope * syl
    bed = rng.standard_normal(n_total)
    out += 0.03 * bed / (np.sqrt(np.mean(bed ** 2)) + 1e-12)
    rms = np.sqrt(np.mean(out ** 2)) + 1e-12
    out *= 0.08 / rms
    np.clip(out, -0.97, 0.97, out=out)
    return AudioBuffer(samples=out, sample_rate_hz=SAMPLE_RATE_HZ)


def synth_noise(rng: np.random.Generator, duration_s: float) -> AudioBuffer:
    """Pink-ish noise with slow random amplitude modulation."""
    n = int(round(duration_s * SAMPLE_RATE_HZ))
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE_HZ)
    shaping = 1.0 / np.sqrt(np.maximum(freqs, 20.0))
    pink = np.fft.irfft(spectrum * shaping, n=n)
    # slow AM between 0.3 and 1.5 Hz
    t = np.arange(n) / SAMPLE_RATE_HZ
    am = 1.0 + 0.4 * np.sin(2.0 * np.pi * rng.uniform(0.3, 1.5) * t + rng.uniform(0, 6.28))
    out = pink * am
    rms = np.sqrt(np.mean(out ** 2)) + 1e-12
    out *= 0.05 / rms
    return AudioBuffer(samples=out, sample_rate_hz=SAMPLE_RATE_HZ)


def build_demo_corpus(root: str | Path, utterance_count: int = 20,
                      duration_range_s: tuple[float, float] = (4.0, 8.0),
                      noise_count: int = 4, seed: int = 0,
                      ) -> tuple[CorpusManifest, Path, Path]:
    """Write a WAV corpus plus noise files; returns (manifest, manifest path, noise manifest path)."""
    root = Path(root)
    speech_dir = root / "speech"
    noise_dir = root / "noise"
    speech_dir.mkdir(parents=True, exist_ok=True)
    noise_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    width = max(3, len(str(utterance_count)))
    for i in range(utterance_count):
        duration = rng.uniform(*duration_range_s)
        write_wav(speech_dir / f"utt{i:0{width}d}.wav", synth_utterance(rng, duration))
    noise_paths = []
    for i in range(noise_count):
        path = noise_dir / f"noise{i:03d}.wav"
        write_wav(path, synth_noise(rng, rng.uniform(3.0, 6.0)))
        noise_paths.append(path)
    manifest = scan_corpus(speech_dir)
    manifest_path = root / "manifest.jsonl"
    save_manifest(manifest, manifest_path)
    noise_manifest_path = root / "noise_manifest.txt"
    with open(noise_manifest_path, "w", encoding="utf-8") as fh:
        for p in noise_paths:
            fh.write(str(p.resolve()) + "\n")
    return manifest, manifest_path, noise_manifest_path
