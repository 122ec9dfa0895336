import numpy as np
import pytest

from modspec.dsp import SAMPLE_RATE_HZ, AudioBuffer
from modspec.synth import build_demo_corpus


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Ten short synthetic utterances plus noise, with manifests on disk."""
    root = tmp_path_factory.mktemp("small_corpus")
    manifest, manifest_path, noise_manifest_path = build_demo_corpus(
        root, utterance_count=10, duration_range_s=(2.0, 3.5),
        noise_count=3, seed=11)
    return {"root": root, "manifest": manifest, "manifest_path": manifest_path,
            "noise_manifest_path": noise_manifest_path}


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def make_audio(samples, rate=SAMPLE_RATE_HZ):
    return AudioBuffer(samples=np.asarray(samples, dtype=np.float64),
                       sample_rate_hz=rate)


@pytest.fixture()
def tone_utterance():
    """2.4 s utterance: 1 kHz tone with a 4 Hz amplitude wobble."""
    t = np.arange(int(2.4 * SAMPLE_RATE_HZ)) / SAMPLE_RATE_HZ
    wave = 0.3 * (1.0 + 0.5 * np.cos(2 * np.pi * 4.0 * t)) * np.sin(2 * np.pi * 1000.0 * t)
    return make_audio(wave)


def band_signal_with_envelope(coeff_pairs, carrier_hz=1000.0, margin_bins=40):
    """Spectral-domain band sequence whose power envelope is known exactly.

    ``coeff_pairs`` is a list of (harmonic index m, complex amplitude) for the
    analytic modulator u(t) = sum gamma_m exp(j 2 pi m t / 1.5); the returned
    cropped spectrum belongs to s(t) = u(t) exp(j 2 pi carrier t), whose power
    envelope is |u(t)|^2. Returns (band_sequence, envelope_at_150_frames).
    """
    n = 24000
    t = np.arange(n) / SAMPLE_RATE_HZ
    u = np.zeros(n, dtype=complex)
    for m, gamma in coeff_pairs:
        u += gamma * np.exp(2j * np.pi * m * t / 1.5)
    s = u * np.exp(2j * np.pi * carrier_hz * t)
    spectrum = np.fft.fft(s)
    center = int(round(carrier_hz * 1.5))
    max_m = max(m for m, _ in coeff_pairs)
    lo, hi = center - margin_bins, center + max_m + margin_bins
    envelope = np.abs(u[:: n // 150][:150]) ** 2
    return spectrum[lo:hi], envelope
