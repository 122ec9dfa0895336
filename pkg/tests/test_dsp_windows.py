"""Windowing, COLA, and overlap-add behavior."""
import numpy as np
import pytest

from modspec import dsp
from modspec.errors import ConfigurationError, EmptyInputError, SequenceError

from conftest import make_audio


class TestSegmentation:
    def test_single_window_exact_length(self):
        segs = dsp.segment_utterance(make_audio(np.ones(24000) * 0.1))
        assert len(segs) == 1
        assert segs[0].start_sample == 0

    def test_count_formula_and_offsets(self):
        # count = max(1, ceil((len - 24000)/12000) + 1), offsets at multiples of 12000
        for n, expected in [(24000, 1), (24001, 2), (36000, 2), (36001, 3),
                            (48000, 3), (60001, 5), (12000, 1), (5, 1)]:
            segs = dsp.segment_utterance(make_audio(np.full(n, 0.1)))
            assert len(segs) == expected, f"n={n}"
            assert [s.start_sample for s in segs] == [12000 * i for i in range(expected)]
            assert all(s.samples.size == 24000 for s in segs)

    def test_final_window_zero_padded(self):
        x = np.full(30000, 0.5)
        segs = dsp.segment_utterance(make_audio(x))
        # second window covers samples 12000..30000 then zeros
        tail = segs[1].samples[18000:]
        assert np.all(tail == 0.0)

    def test_hanning_weighting_applied(self):
        x = np.ones(24000)
        segs = dsp.segment_utterance(make_audio(x))
        expected = dsp.hann_periodic(24000)
        assert np.allclose(segs[0].samples, expected)

    def test_zero_input_gives_zero_segment(self):
        segs = dsp.segment_utterance(make_audio(np.zeros(24000)))
        assert np.all(segs[0].samples == 0.0)

    def test_wrong_rate_rejected(self):
        with pytest.raises(ConfigurationError):
            dsp.segment_utterance(make_audio(np.ones(24000), rate=8000))

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            dsp.segment_utterance(make_audio(np.array([])))


class TestCola:
    def test_hann_overlap_sum_constant_150(self):
        w = dsp.hann_periodic(150)
        total = np.zeros(600)
        for k in range(0, 600 - 150 + 1, 75):
            total[k:k + 150] += w
        interior = total[150:450]
        assert np.max(np.abs(interior - 1.0)) < 1e-10

    def test_hann_overlap_sum_constant_24000(self):
        w = dsp.hann_periodic(24000)
        total = np.zeros(96000)
        for k in range(0, 96000 - 24000 + 1, 12000):
            total[k:k + 24000] += w
        interior = total[24000:72000]
        assert np.max(np.abs(interior - 1.0)) < 1e-10


class TestOverlapAdd:
    def test_single_block_identity(self):
        block = np.arange(20 * 150, dtype=float).reshape(20, 150)
        out = dsp.overlap_add_spectrogram([(0, block)], 150)
        assert np.allclose(out.frames, block.T)

    def test_two_constant_blocks_interior_constant(self):
        v = 3.25
        blocks = [(0, np.full((20, 150), v)), (1, np.full((20, 150), v))]
        out = dsp.overlap_add_spectrogram(blocks, 225)
        assert np.max(np.abs(out.frames - v)) < 1e-10

    def test_missing_window_index_rejected(self):
        blocks = [(0, np.zeros((20, 150))), (2, np.zeros((20, 150)))]
        with pytest.raises(SequenceError):
            dsp.overlap_add_spectrogram(blocks, 300)

    def test_masked_window_range_recorded_and_clipped(self):
        blocks = [(i, np.zeros((20, 150))) for i in range(3)]
        out = dsp.overlap_add_spectrogram(blocks, 250, masked_window_index=2)
        assert out.masked_frame_range == (150, 250)
        out = dsp.overlap_add_spectrogram(blocks, 300, masked_window_index=1)
        assert out.masked_frame_range == (75, 225)

    def test_frame_count_formula(self):
        assert dsp.utterance_frame_count(24000) == 150
        assert dsp.utterance_frame_count(36000) == 225
        assert dsp.utterance_frame_count(24001) == 151
