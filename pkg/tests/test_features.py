"""End-to-end feature extraction: determinism, mask locality, normalization."""
import numpy as np
import pytest

from modspec import dsp
from modspec.dsp import MaskSpec
from modspec.errors import ShortUtteranceError

from conftest import make_audio


@pytest.fixture(scope="module")
def utterance():
    rng = np.random.default_rng(99)
    t = np.arange(40000) / 16000.0
    wave = (0.2 * (1.0 + 0.6 * np.cos(2 * np.pi * 3.5 * t)) * np.sin(2 * np.pi * 700 * t)
            + 0.02 * rng.normal(size=t.size))
    return make_audio(wave)


def test_deterministic_given_seed(utterance):
    a1 = dsp.extract_features(utterance, MaskSpec.from_hz(2, 8), rng_seed=5)
    a2 = dsp.extract_features(utterance, MaskSpec.from_hz(2, 8), rng_seed=5)
    assert np.array_equal(a1[0].frames, a2[0].frames)
    assert np.array_equal(a1[1].frames, a2[1].frames)
    assert a1[0].masked_frame_range == a2[0].masked_frame_range


def test_masked_and_clean_differ_only_inside_range(utterance):
    masked, clean = dsp.extract_features(utterance, MaskSpec.from_hz(2, 8), rng_seed=3)
    lo, hi = masked.masked_frame_range
    diff = np.abs(masked.frames - clean.frames).max(axis=1)
    outside = np.ones(clean.frame_count, dtype=bool)
    outside[lo:hi] = False
    assert np.all(diff[outside] == 0.0)
    assert diff[lo:hi].max() > 0.01


def test_no_mask_outputs_identical(utterance):
    masked, clean = dsp.extract_features(utterance, mask=None)
    assert np.array_equal(masked.frames, clean.frames)
    assert masked.masked_frame_range is None


def test_explicit_window_index_respected(utterance):
    mask = MaskSpec.from_hz(2, 8, window_index=1)
    masked, _ = dsp.extract_features(utterance, mask)
    assert masked.masked_frame_range == (75, 225)


def test_mask_window_uniform_over_windows(utterance):
    n_windows = dsp.window_count(utterance.samples.size)
    seen = {dsp.extract_features(utterance, MaskSpec.from_hz(2, 8), rng_seed=s)[0]
            .masked_frame_range[0] // dsp.FRAME_HOP
            for s in range(40)}
    assert seen == set(range(n_windows))


def test_short_utterance_rejected_for_training():
    with pytest.raises(ShortUtteranceError):
        dsp.extract_features(make_audio(np.ones(20000) * 0.1),
                             MaskSpec.from_hz(2, 8), training=True)


def test_short_utterance_padded_for_analysis():
    masked, clean = dsp.extract_features(make_audio(np.ones(20000) * 0.1))
    assert clean.frame_count == dsp.utterance_frame_count(20000)


def test_frame_count_matches_duration(utterance):
    _, clean = dsp.extract_features(utterance)
    assert clean.frame_count == dsp.utterance_frame_count(utterance.samples.size)


def test_subtract_band_means_uses_target_means(utterance):
    masked, clean = dsp.extract_features(utterance, MaskSpec.from_hz(2, 8), rng_seed=0)
    net_in, target = dsp.subtract_band_means(masked, clean)
    assert np.allclose(target.frames.mean(axis=0), 0.0, atol=1e-9)
    # identical outside the mask before implies identical outside after
    lo, hi = target.masked_frame_range
    outside = np.ones(target.frame_count, dtype=bool)
    outside[lo:hi] = False
    assert np.array_equal(net_in.frames[outside], target.frames[outside])


def test_values_finite_even_for_tonal_input(tone_utterance):
    masked, clean = dsp.extract_features(tone_utterance, MaskSpec.from_hz(2, 8))
    assert np.all(np.isfinite(masked.frames))
    assert np.all(np.isfinite(clean.frames))
