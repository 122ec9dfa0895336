"""Noise mixing accuracy and seed-driven augmentation policy."""
import numpy as np
import pytest

from modspec.augment import (AugmentPolicy, fit_noise_to_length,
                             load_noise_manifest, maybe_augment, mix_at_snr)
from modspec.dsp import AudioBuffer
from modspec.errors import ConfigurationError

from conftest import make_audio


def measured_snr_db(mixed, speech):
    noise = mixed.samples - speech.samples
    return 10.0 * np.log10(np.mean(speech.samples ** 2) / np.mean(noise ** 2))


class TestMixAtSnr:
    def test_equal_power_at_zero_snr_gives_unit_gain(self, rng):
        speech = make_audio(rng.normal(0, 0.1, 8000))
        noise_raw = rng.normal(0, 1.0, 8000)
        noise_raw *= np.sqrt(np.mean(speech.samples ** 2) / np.mean(noise_raw ** 2))
        noise = make_audio(noise_raw)
        mixed, applied = mix_at_snr(speech, noise, snr_db=0.0)
        assert applied
        assert np.allclose(mixed.samples, speech.samples + noise.samples, atol=1e-12)

    @pytest.mark.parametrize("snr", [0.0, 12.0, 18.0, -6.0])
    def test_achieved_snr_within_tenth_db(self, rng, snr):
        speech = make_audio(rng.normal(0, 0.08, 16000))
        noise = make_audio(rng.normal(0, 0.3, 16000))
        mixed, applied = mix_at_snr(speech, noise, snr_db=snr)
        assert applied
        assert measured_snr_db(mixed, speech) == pytest.approx(snr, abs=0.1)

    def test_zero_noise_skips_with_flag(self, rng):
        speech = make_audio(rng.normal(0, 0.1, 4000))
        with pytest.warns(UserWarning, match="zero-power noise"):
            mixed, applied = mix_at_snr(speech, make_audio(np.zeros(4000)), 12.0)
        assert not applied
        assert mixed is speech

    def test_rate_mismatch_rejected(self, rng):
        speech = make_audio(rng.normal(0, 0.1, 4000))
        noise = make_audio(rng.normal(0, 0.1, 4000), rate=8000)
        with pytest.raises(ConfigurationError):
            mix_at_snr(speech, noise, 12.0)

    def test_length_mismatch_rejected(self, rng):
        with pytest.raises(ConfigurationError):
            mix_at_snr(make_audio(rng.normal(0, 0.1, 4000)),
                       make_audio(rng.normal(0, 0.1, 4001)), 12.0)


class TestNoiseFitting:
    def test_short_noise_tiled_to_length(self, rng):
        noise = rng.normal(size=1000)
        out = fit_noise_to_length(noise, 3500, np.random.default_rng(0))
        assert out.shape == (3500,)
        # tiled copies: the first 1000 samples repeat (circularly shifted source)
        assert np.array_equal(out[:1000], out[1000:2000])

    def test_long_noise_cropped(self, rng):
        noise = rng.normal(size=5000)
        out = fit_noise_to_length(noise, 1200, np.random.default_rng(0))
        assert out.shape == (1200,)


class TestMaybeAugment:
    def policy(self, noise_files, probability=0.8):
        return AugmentPolicy(apply_probability=probability,
                             noise_manifest=[str(p) for p in noise_files])

    @pytest.fixture()
    def noise_files(self, tmp_path, rng):
        from modspec.corpus import write_wav
        paths = []
        for i in range(3):
            p = tmp_path / f"n{i}.wav"
            write_wav(p, make_audio(rng.normal(0, 0.2, 24000)))
            paths.append(p)
        return paths

    def test_probability_zero_returns_input_unchanged(self, rng, noise_files):
        speech = make_audio(rng.normal(0, 0.1, 16000))
        policy = AugmentPolicy(apply_probability=0.0, noise_manifest=[])
        out, applied, snr = maybe_augment(speech, policy, rng_seed=0)
        assert out is speech and not applied and snr is None

    def test_deterministic_given_seed(self, rng, noise_files):
        speech = make_audio(rng.normal(0, 0.1, 16000))
        policy = self.policy(noise_files, probability=1.0)
        cache = {}
        a = maybe_augment(speech, policy, rng_seed=42, noise_cache=cache)
        b = maybe_augment(speech, policy, rng_seed=42, noise_cache=cache)
        assert np.array_equal(a[0].samples, b[0].samples)
        assert a[2] == b[2]

    def test_snr_draws_uniform_on_12_18(self, rng, noise_files):
        speech = make_audio(rng.normal(0, 0.1, 4000))
        policy = self.policy(noise_files, probability=1.0)
        cache = {}
        snrs = np.array([maybe_augment(speech, policy, rng_seed=s,
                                       noise_cache=cache)[2]
                         for s in range(4000)])
        assert snrs.min() >= 12.0 and snrs.max() <= 18.0
        assert snrs.mean() == pytest.approx(15.0, abs=0.1)

    def test_apply_rate_matches_probability(self, rng, noise_files):
        speech = make_audio(rng.normal(0, 0.1, 2000))
        policy = self.policy(noise_files, probability=0.8)
        cache = {}
        applied = [maybe_augment(speech, policy, rng_seed=s, noise_cache=cache)[1]
                   for s in range(4000)]
        assert np.mean(applied) == pytest.approx(0.8, abs=0.02)

    def test_empty_manifest_with_probability_rejected(self, rng):
        speech = make_audio(rng.normal(0, 0.1, 2000))
        with pytest.raises(ConfigurationError):
            maybe_augment(speech, AugmentPolicy(apply_probability=0.5,
                                                noise_manifest=[]), rng_seed=0)

    def test_invalid_snr_range_rejected(self):
        with pytest.raises(ConfigurationError):
            AugmentPolicy(snr_lo_db=18.0, snr_hi_db=12.0,
                          noise_manifest=["x"]).validate()


def test_load_noise_manifest_resolves_relative(tmp_path):
    (tmp_path / "noises").mkdir()
    target = tmp_path / "noises" / "a.wav"
    target.write_bytes(b"")
    manifest = tmp_path / "list.txt"
    manifest.write_text("noises/a.wav\n\n")
    paths = load_noise_manifest(manifest)
    assert paths == [str(target)]
