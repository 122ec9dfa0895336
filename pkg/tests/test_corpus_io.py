"""WAV decoding, manifests, and binary round trips."""
import struct
import wave

import numpy as np
import pytest

from modspec import corpus
from modspec.dsp import AudioBuffer, FdlpSpectrogram
from modspec.errors import ConfigurationError, FormatError


def write_pcm16(path, samples_int16, rate=16000, channels=1):
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(channels)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(np.asarray(samples_int16, dtype="<i2").tobytes())


class TestReadWav:
    def test_full_scale_scaling(self, tmp_path):
        path = tmp_path / "a.wav"
        write_pcm16(path, [32767, -32768, 0])
        audio = corpus.read_wav(path)
        assert audio.samples[0] == pytest.approx(32767 / 32768)
        assert audio.samples[1] == pytest.approx(-1.0)
        assert audio.samples[2] == 0.0

    def test_one_second_has_16000_samples(self, tmp_path):
        path = tmp_path / "b.wav"
        write_pcm16(path, np.zeros(16000, dtype=np.int16))
        assert corpus.read_wav(path).samples.size == 16000

    def test_stereo_rejected_naming_channels(self, tmp_path):
        path = tmp_path / "c.wav"
        write_pcm16(path, np.zeros(200, dtype=np.int16), channels=2)
        with pytest.raises(FormatError, match="2 channels"):
            corpus.read_wav(path)

    def test_wrong_rate_rejected(self, tmp_path):
        path = tmp_path / "d.wav"
        write_pcm16(path, np.zeros(100, dtype=np.int16), rate=8000)
        with pytest.raises(ConfigurationError, match="8000"):
            corpus.read_wav(path)

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "e.wav"
        path.write_bytes(b"not a wav file at all")
        with pytest.raises(FormatError):
            corpus.read_wav(path)

    def test_wav_roundtrip(self, tmp_path):
        path = tmp_path / "f.wav"
        samples = np.linspace(-0.5, 0.5, 777)
        corpus.write_wav(path, AudioBuffer(samples=samples, sample_rate_hz=16000))
        back = corpus.read_wav(path)
        assert np.max(np.abs(back.samples - samples)) < 1.0 / 32768


class TestScanCorpus:
    def test_empty_directory(self, tmp_path):
        manifest = corpus.scan_corpus(tmp_path)
        assert len(manifest) == 0

    def test_nested_discovery_sorted(self, tmp_path):
        for rel in ["b/two.wav", "a/one.wav", "three.wav"]:
            path = tmp_path / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            write_pcm16(path, np.zeros(1600, dtype=np.int16))
        manifest = corpus.scan_corpus(tmp_path)
        ids = [e.utterance_id for e in manifest.entries]
        assert ids == sorted(ids)
        assert len(ids) == 3
        assert all(e.duration_s == pytest.approx(0.1) for e in manifest.entries)

    def test_duplicate_basenames_get_distinct_ids(self, tmp_path):
        for rel in ["x/same.wav", "y/same.wav"]:
            path = tmp_path / rel
            path.parent.mkdir(parents=True)
            write_pcm16(path, np.zeros(160, dtype=np.int16))
        manifest = corpus.scan_corpus(tmp_path)
        ids = {e.utterance_id for e in manifest.entries}
        assert ids == {"x/same", "y/same"}

    def test_missing_directory_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError):
            corpus.scan_corpus(tmp_path / "nope")

    def test_manifest_save_load_roundtrip(self, tmp_path):
        write_pcm16(tmp_path / "u.wav", np.zeros(32000, dtype=np.int16))
        manifest = corpus.scan_corpus(tmp_path)
        mpath = tmp_path / "manifest.jsonl"
        corpus.save_manifest(manifest, mpath)
        loaded = corpus.load_manifest(mpath)
        assert loaded.entries == manifest.entries
        assert loaded.resolve(loaded.entries[0]).exists()


class TestFeatureFiles:
    def make_spec(self, masked=(75, 225)):
        rng = np.random.default_rng(0)
        frames = rng.normal(size=(300, 20)).astype(np.float32).astype(np.float64)
        return FdlpSpectrogram(frames=frames, masked_frame_range=masked)

    def test_write_read_write_byte_identical(self, tmp_path):
        spec = self.make_spec()
        p1, p2 = tmp_path / "x.fdlp", tmp_path / "y.fdlp"
        corpus.write_features(p1, spec)
        back = corpus.read_features(p1)
        corpus.write_features(p2, back)
        assert p1.read_bytes() == p2.read_bytes()

    def test_values_and_metadata_roundtrip(self, tmp_path):
        spec = self.make_spec()
        path = tmp_path / "x.fdlp"
        corpus.write_features(path, spec)
        back = corpus.read_features(path)
        assert np.array_equal(back.frames, spec.frames)
        assert back.masked_frame_range == (75, 225)
        assert back.frame_rate_hz == 100.0

    def test_no_mask_sentinel_roundtrip(self, tmp_path):
        spec = self.make_spec(masked=None)
        path = tmp_path / "x.fdlp"
        corpus.write_features(path, spec)
        assert corpus.read_features(path).masked_frame_range is None

    def test_truncated_rejected(self, tmp_path):
        spec = self.make_spec()
        path = tmp_path / "x.fdlp"
        corpus.write_features(path, spec)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) // 2])
        with pytest.raises(FormatError, match="expected"):
            corpus.read_features(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "x.fdlp"
        corpus.write_features(path, self.make_spec())
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="magic"):
            corpus.read_features(path)


class TestCheckpointWire:
    def fields(self):
        return {"input_dim": 20, "model_dim": 8, "layer_count": 1,
                "head_count": 2, "ffn_dim": 16, "max_frames": 64, "seed": 7}

    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        tensors = {"a.w": rng.normal(size=(3, 4)).astype(np.float32),
                   "b.v": rng.normal(size=(5,)).astype(np.float32)}
        path = tmp_path / "c.modp"
        corpus.write_checkpoint(path, self.fields(), tensors)
        fields, back = corpus.read_checkpoint(path)
        assert fields == self.fields()
        for k in tensors:
            assert np.array_equal(back[k], tensors[k])

    def test_truncation_detected(self, tmp_path):
        path = tmp_path / "c.modp"
        corpus.write_checkpoint(path, self.fields(),
                                {"t": np.ones((4, 4), dtype=np.float32)})
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(FormatError, match="truncated"):
            corpus.read_checkpoint(path)

    def test_bad_magic_detected(self, tmp_path):
        path = tmp_path / "c.modp"
        path.write_bytes(b"JUNK" + b"\x00" * 64)
        with pytest.raises(FormatError, match="magic"):
            corpus.read_checkpoint(path)

    def test_header_layout_is_little_endian(self, tmp_path):
        path = tmp_path / "c.modp"
        corpus.write_checkpoint(path, self.fields(), {})
        blob = path.read_bytes()
        assert blob[:4] == b"MODP"
        version, field_count = struct.unpack_from("<HI", blob, 4)
        assert (version, field_count) == (1, 7)
