"""Mel filterbank partition properties and band decomposition."""
import numpy as np
import pytest

from modspec import dsp
from modspec.errors import ConfigurationError

from conftest import make_audio


def test_squared_windows_sum_to_one_everywhere():
    bank = dsp.default_filterbank()
    total = bank.squared_sum()
    assert total.shape == (12001,)
    assert np.max(np.abs(total - 1.0)) < 1e-10


def test_band_sequences_long_enough_for_default_order():
    bank = dsp.default_filterbank()
    lengths = [sl.stop - sl.start for sl in bank.band_slices]
    assert min(lengths) > dsp.DEFAULT_LP_ORDER


def test_tone_concentrates_in_adjacent_bands():
    t = np.arange(24000) / 16000.0
    seg = dsp.segment_utterance(make_audio(0.5 * np.sin(2 * np.pi * 1000.0 * t)))[0]
    bands = dsp.subband_decompose(seg)
    energies = np.array([np.sum(np.abs(b) ** 2) for b in bands])
    order = np.argsort(energies)[::-1]
    # the two hottest bands are neighbors and everything else is < 1% of peak
    assert abs(int(order[0]) - int(order[1])) == 1
    assert np.all(energies[order[2:]] < 0.01 * energies[order[0]])


def test_band_energy_sum_matches_spectrum_energy():
    rng = np.random.default_rng(0)
    seg = dsp.segment_utterance(make_audio(rng.normal(0, 0.1, 24000)))[0]
    spectrum = np.fft.rfft(seg.samples)
    bands = dsp.subband_decompose(seg)
    total = sum(np.sum(np.abs(b) ** 2) for b in bands)
    # perfect power partition: band energies add up to the spectrum energy
    assert total == pytest.approx(np.sum(np.abs(spectrum) ** 2), rel=1e-12)


def test_zero_segment_gives_zero_bands():
    seg = dsp.segment_utterance(make_audio(np.zeros(24000)))[0]
    for band in dsp.subband_decompose(seg):
        assert np.all(band == 0.0)


def test_wrong_segment_length_rejected():
    seg = dsp.WindowedSegment(samples=np.zeros(1000), start_sample=0, window_index=0)
    with pytest.raises(ConfigurationError):
        dsp.subband_decompose(seg)
