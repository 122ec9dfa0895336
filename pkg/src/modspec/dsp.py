"""Sub-band temporal-envelope analysis via linear prediction on spectral samples.

The pipeline: slice an utterance into 1.5 s Hanning windows at 50% overlap,
split each window's spectrum into 20 mel-spaced bands, fit an all-pole model
to each band's complex spectral samples (the model's response approximates the
band's power envelope over the window, by time-frequency duality), read off
the envelope's Fourier-series coefficients through the model cepstrum, and
overlap-add per-band log envelopes into a 100 frames/s spectrogram.

Coefficient index m of a window's modulation spectrum corresponds to the
modulation frequency m / 1.5 Hz; zeroing a coefficient range deletes those
temporal modulations from the synthesized envelope exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    EmptyInputError,
    NumericalError,
    SequenceError,
    ShortUtteranceError,
)

SAMPLE_RATE_HZ = 16000
WINDOW_SECONDS = 1.5
WINDOW_SAMPLES = 24000          # 1.5 s at 16 kHz
HOP_SAMPLES = 12000             # 50% overlap
BAND_COUNT = 20
MOD_COEFF_COUNT = 80            # captures modulations up to 79/1.5 ~ 52.67 Hz
FRAME_RATE_HZ = 100
FRAMES_PER_WINDOW = 150
FRAME_HOP = 75
DEFAULT_LP_ORDER = 60           # 40 poles per second of window
GAIN_FLOOR = 1e-10              # silent-band gain, keeps log envelopes finite


# --------------------------------------------------------------------------- types

@dataclass
class AudioBuffer:
    """Mono waveform with its sample rate; amplitudes nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    def validate(self, require_rate: int | None = SAMPLE_RATE_HZ) -> None:
        if require_rate is not None and self.sample_rate_hz != require_rate:
            raise ConfigurationError(
                f"expected sample rate {require_rate} Hz, got {self.sample_rate_hz} Hz"
            )
        if self.samples.size == 0:
            raise EmptyInputError("audio buffer is empty")
        if not np.all(np.isfinite(self.samples)):
            raise NumericalError("audio contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class WindowedSegment:
    """One Hanning-weighted 1.5 s slice of an utterance."""

    samples: np.ndarray          # exactly WINDOW_SAMPLES, already weighted
    start_sample: int
    window_index: int


@dataclass
class ModulationSpectrum:
    """Per-band envelope Fourier coefficients for one window: (20, 80) complex."""

    coeffs: np.ndarray
    window_index: int
    segment_duration_s: float = WINDOW_SECONDS


@dataclass(frozen=True)
class MaskSpec:
    """A modulation-frequency band to delete, plus which window it applies to.

    ``window_index`` of None means "choose the window at random" downstream.
    ``bin_lo``/``bin_hi`` are the inclusive coefficient indices covering
    [lo_hz, hi_hz]; an empty range is represented by bin_lo > bin_hi.
    """

    lo_hz: float
    hi_hz: float
    window_index: int | None
    bin_lo: int
    bin_hi: int

    @classmethod
    def from_hz(cls, lo_hz: float, hi_hz: float, window_index: int | None = None) -> "MaskSpec":
        if not (0.0 <= lo_hz <= hi_hz):
            raise ConfigurationError(f"invalid mask range {lo_hz}..{hi_hz} Hz")
        bin_lo, bin_hi = modulation_bin_range(lo_hz, hi_hz)
        return cls(lo_hz=lo_hz, hi_hz=hi_hz, window_index=window_index,
                   bin_lo=bin_lo, bin_hi=bin_hi)

    @property
    def is_empty(self) -> bool:
        return self.bin_lo > self.bin_hi


@dataclass
class FdlpSpectrogram:
    """Log power-envelope matrix (frames x 20) at 100 frames/s.

    ``masked_frame_range`` is the half-open [start, end) frame interval that a
    masked window maps onto, when one was masked.
    """

    frames: np.ndarray
    frame_rate_hz: float = float(FRAME_RATE_HZ)
    masked_frame_range: tuple[int, int] | None = None

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def band_count(self) -> int:
        return self.frames.shape[1]


@dataclass
class LpModel:
    """All-pole fit of one band's power envelope: envelope(t) = gain^2 / |A|^2."""

    order: int
    lp_coeffs: np.ndarray        # a[1..p], complex
    gain: float
    reflections: np.ndarray | None = None
    degenerate: bool = False     # zero-energy band, flat floor envelope


# --------------------------------------------------------------------------- windows

def hann_periodic(n: int) -> np.ndarray:
    """Periodic Hann window; shifted copies at hop n/2 sum to exactly 1."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def window_count(n_samples: int) -> int:
    """Number of 1.5 s windows covering an utterance at 50% overlap."""
    if n_samples <= 0:
        raise EmptyInputError("empty utterance")
    return max(1, math.ceil((n_samples - WINDOW_SAMPLES) / HOP_SAMPLES) + 1)


def utterance_frame_count(n_samples: int) -> int:
    """Spectrogram length in frames: ceil(duration * frame rate)."""
    return math.ceil(n_samples * FRAME_RATE_HZ / SAMPLE_RATE_HZ)


def segment_utterance(audio: AudioBuffer) -> list[WindowedSegment]:
    """Slice into Hanning-weighted windows at offsets 0, 12000, 24000, ...

    The final window is zero-padded to the full 24000 samples before
    weighting when the utterance ends inside it.
    """
    audio.validate()
    x = np.asarray(audio.samples, dtype=np.float64)
    count = window_count(x.size)
    window = hann_periodic(WINDOW_SAMPLES)
    segments = []
    for w in range(count):
        start = w * HOP_SAMPLES
        chunk = x[start:start + WINDOW_SAMPLES]
        if chunk.size < WINDOW_SAMPLES:
            chunk = np.pad(chunk, (0, WINDOW_SAMPLES - chunk.size))
        segments.append(WindowedSegment(samples=chunk * window,
                                        start_sample=start, window_index=w))
    return segments


# --------------------------------------------------------------------------- filterbank

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


class SubbandFilterbank:
    """Mel-spaced cosine-tapered partition of the one-sided spectrum.

    Adjacent bands cross-fade as sin/cos quarter-waves over each boundary's
    transition region, so the squared band windows sum to exactly 1 at every
    bin (perfect power partition).
    """

    def __init__(self, n_bins: int, band_count: int = BAND_COUNT,
                 sample_rate_hz: int = SAMPLE_RATE_HZ, taper_frac: float = 0.25):
        nyquist = sample_rate_hz / 2.0
        edges = hz_to_mel(nyquist) * np.arange(band_count + 1) / band_count
        edges = mel_to_hz(edges) * (n_bins - 1) / nyquist   # edge positions in bins
        widths = np.diff(edges)
        half = np.zeros(band_count + 1)
        for i in range(1, band_count):
            half[i] = max(1.0, taper_frac * min(widths[i - 1], widths[i]))

        self.n_bins = n_bins
        self.band_count = band_count
        self.band_slices: list[slice] = []
        self.band_windows: list[np.ndarray] = []
        for b in range(band_count):
            lo = edges[b] - half[b]
            hi = edges[b + 1] + half[b + 1]
            i0 = max(0, int(np.ceil(lo)))
            i1 = min(n_bins - 1, int(np.floor(hi)))
            k = np.arange(i0, i1 + 1, dtype=np.float64)
            w = np.ones_like(k)
            if half[b] > 0:
                rise = np.clip((k - (edges[b] - half[b])) / (2.0 * half[b]), 0.0, 1.0)
                w = np.minimum(w, np.sin(0.5 * np.pi * rise))
            if half[b + 1] > 0:
                fall = np.clip((k - (edges[b + 1] - half[b + 1])) / (2.0 * half[b + 1]), 0.0, 1.0)
                w = np.minimum(w, np.cos(0.5 * np.pi * fall))
            self.band_slices.append(slice(i0, i1 + 1))
            self.band_windows.append(w)

    def apply(self, spectrum: np.ndarray) -> list[np.ndarray]:
        """Weight the one-sided spectrum into per-band coefficient sequences."""
        if spectrum.shape[0] != self.n_bins:
            raise ConfigurationError(
                f"spectrum has {spectrum.shape[0]} bins, filterbank expects {self.n_bins}"
            )
        return [spectrum[sl] * w for sl, w in zip(self.band_slices, self.band_windows)]

    def squared_sum(self) -> np.ndarray:
        """Sum over bands of the squared band windows; should be all ones."""
        total = np.zeros(self.n_bins)
        for sl, w in zip(self.band_slices, self.band_windows):
            total[sl] += w ** 2
        return total


@lru_cache(maxsize=4)
def default_filterbank(n_bins: int = WINDOW_SAMPLES // 2 + 1,
                       band_count: int = BAND_COUNT) -> SubbandFilterbank:
    return SubbandFilterbank(n_bins=n_bins, band_count=band_count)


def subband_decompose(segment: WindowedSegment,
                      band_count: int = BAND_COUNT) -> list[np.ndarray]:
    """One-sided spectrum of the segment, partitioned into weighted band sequences."""
    if segment.samples.size != WINDOW_SAMPLES:
        raise ConfigurationError(
            f"segment has {segment.samples.size} samples, expected {WINDOW_SAMPLES}"
        )
    spectrum = np.fft.rfft(segment.samples)
    bank = default_filterbank(spectrum.shape[0], band_count)
    return bank.apply(spectrum)


# --------------------------------------------------------------------------- LP fit

def autocorrelation(y: np.ndarray, order: int) -> np.ndarray:
    """Deterministic autocorrelation r[0..order] of a complex sequence."""
    n = y.shape[0]
    if order >= n:
        raise ConfigurationError(f"order {order} must be < sequence length {n}")
    return np.array([np.dot(y[tau:], np.conj(y[:n - tau])) for tau in range(order + 1)])


def levinson(autocorr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Levinson-Durbin on a Hermitian autocorrelation, batched over leading axes.

    ``autocorr`` has shape (..., order+1) with a real, positive lag 0.
    Returns (coeffs a[1..p] shape (..., p), per-order prediction errors
    shape (..., p+1), reflection coefficients shape (..., p)).
    """
    r = np.asarray(autocorr)
    squeeze = r.ndim == 1
    if squeeze:
        r = r[None, :]
    batch, order = r.shape[0], r.shape[1] - 1
    a = np.zeros((batch, order + 1), dtype=np.complex128)
    a[:, 0] = 1.0
    err = np.zeros((batch, order + 1))
    err[:, 0] = r[:, 0].real
    refl = np.zeros((batch, order), dtype=np.complex128)
    for i in range(1, order + 1):
        acc = r[:, i] + np.einsum("bj,bj->b", a[:, 1:i], r[:, i - 1:0:-1])
        k = -acc / err[:, i - 1]
        refl[:, i - 1] = k
        prev = a[:, 1:i].copy()
        a[:, i] = k
        if i > 1:
            a[:, 1:i] = prev + k[:, None] * np.conj(prev[:, ::-1])
        err[:, i] = err[:, i - 1] * (1.0 - np.abs(k) ** 2)
    if not np.all(np.isfinite(a)):
        raise NumericalError("Levinson-Durbin recursion produced non-finite coefficients")
    if squeeze:
        return a[0, 1:], err[0], refl[0]
    return a[:, 1:], err, refl


def fit_complex_fdlp(band_spectrum: np.ndarray, order: int = DEFAULT_LP_ORDER,
                     window_samples: int = WINDOW_SAMPLES) -> LpModel:
    """All-pole model of a band's power envelope from its spectral samples.

    Solves Levinson-Durbin on the autocorrelation of the weighted spectral
    sequence; the resulting model, evaluated over the window, approximates
    the band's squared Hilbert envelope. ``window_samples`` sets the gain
    normalization so the envelope is on the scale of the squared signal.
    """
    if order < 1:
        raise ConfigurationError(f"LP order must be >= 1, got {order}")
    y = np.asarray(band_spectrum, dtype=np.complex128)
    r = autocorrelation(y, order)
    if not np.all(np.isfinite(r)):
        raise NumericalError("non-finite autocorrelation")
    if r[0].real <= 0.0:
        return LpModel(order=order, lp_coeffs=np.zeros(order, dtype=np.complex128),
                       gain=GAIN_FLOOR, reflections=np.zeros(order, dtype=np.complex128),
                       degenerate=True)
    a, err, refl = levinson(r)
    gain = math.sqrt(max(err[-1], 0.0)) / window_samples
    if gain <= 0.0:
        gain = GAIN_FLOOR
    return LpModel(order=order, lp_coeffs=a, gain=gain, reflections=refl)


def evaluate_envelope(model: LpModel, frame_count: int = FRAMES_PER_WINDOW) -> np.ndarray:
    """Power envelope gain^2 / |A|^2 at uniform instants over the window."""
    t = np.arange(frame_count) / frame_count
    m = np.arange(1, model.lp_coeffs.shape[0] + 1)
    denom = 1.0 + np.exp(2j * np.pi * np.outer(t, m)) @ model.lp_coeffs
    return model.gain ** 2 / np.abs(denom) ** 2


# --------------------------------------------------------------------------- cepstrum

def _lp_cepstrum_batch(coeffs: np.ndarray, log_gain_sq: np.ndarray,
                       count: int) -> np.ndarray:
    """Modulation coefficients for a batch of LP models; shape (batch, count).

    c[0] = log gain^2; for m >= 1, c[m] = 2 d[m] where d follows the standard
    recursion d[m] = -a[m] - sum_{k<m} (k/m) d[k] a[m-k] for the minimum-phase
    log spectrum of 1/A.
    """
    batch, p = coeffs.shape
    a_ext = np.zeros((batch, count), dtype=np.complex128)
    a_ext[:, 1:min(p, count - 1) + 1] = coeffs[:, :count - 1]
    d = np.zeros((batch, count), dtype=np.complex128)
    for m in range(1, count):
        k = np.arange(max(1, m - p), m)
        acc = -a_ext[:, m]
        if k.size:
            acc = acc - np.einsum("bk,bk->b", d[:, k] * (k / m), a_ext[:, m - k])
        d[:, m] = acc
    c = 2.0 * d
    c[:, 0] = log_gain_sq
    return c


def lp_to_modulation_cepstrum(model: LpModel,
                              coeff_count: int = MOD_COEFF_COUNT) -> np.ndarray:
    """First ``coeff_count`` Fourier-series coefficients of the model's log envelope.

    The log power envelope over the window equals
    Re( sum_m c[m] exp(j 2 pi m t / 1.5) ); coefficient m lives at m/1.5 Hz.
    """
    log_gain_sq = np.array([2.0 * math.log(model.gain)])
    return _lp_cepstrum_batch(model.lp_coeffs[None, :], log_gain_sq, coeff_count)[0]


def modulation_bin_range(lo_hz: float, hi_hz: float,
                         duration_s: float = WINDOW_SECONDS) -> tuple[int, int]:
    """Inclusive coefficient index range whose frequencies m/duration lie in [lo, hi]."""
    bin_lo = max(0, math.ceil(lo_hz * duration_s - 1e-9))
    bin_hi = min(MOD_COEFF_COUNT - 1, math.floor(hi_hz * duration_s + 1e-9))
    return bin_lo, bin_hi


def apply_modulation_dropout(spec: ModulationSpectrum, mask: MaskSpec) -> ModulationSpectrum:
    """Copy of the spectrum with coefficients bin_lo..bin_hi zeroed in every band."""
    if mask.bin_hi > MOD_COEFF_COUNT - 1 or mask.bin_lo < 0:
        raise ConfigurationError(
            f"mask bins [{mask.bin_lo}, {mask.bin_hi}] outside [0, {MOD_COEFF_COUNT - 1}]"
        )
    coeffs = spec.coeffs.copy()
    if not mask.is_empty:
        coeffs[:, mask.bin_lo:mask.bin_hi + 1] = 0.0
    return replace(spec, coeffs=coeffs)


@lru_cache(maxsize=4)
def _synthesis_matrix(frame_count: int, coeff_count: int) -> np.ndarray:
    t = np.arange(frame_count) / frame_count
    return np.exp(2j * np.pi * np.outer(t, np.arange(coeff_count)))


def synthesize_log_envelope(coeffs: np.ndarray,
                            frame_count: int = FRAMES_PER_WINDOW) -> np.ndarray:
    """Log power envelope from modulation coefficients, sampled at 100 frames/s.

    Evaluates Re( sum_m c[m] exp(j 2 pi m t / T) ) at ``frame_count`` uniform
    instants in [0, T). Accepts a single coefficient vector or a (bands, m)
    matrix; returns matching (frame_count,) or (bands, frame_count).
    """
    if frame_count < 1:
        raise ConfigurationError("frame_count must be >= 1")
    c = np.asarray(coeffs, dtype=np.complex128)
    basis = _synthesis_matrix(frame_count, c.shape[-1])
    return np.real(c @ basis.T)


# --------------------------------------------------------------------------- spectrogram

def overlap_add_spectrogram(envelopes: Sequence[tuple[int, np.ndarray]],
                            utterance_frames: int,
                            masked_window_index: int | None = None) -> FdlpSpectrogram:
    """Merge per-window (bands x 150) log-envelope blocks into one spectrogram.

    Blocks are weighted by a 150-point Hann window at hop 75 and the result is
    divided by the accumulated window weight, which is constant in the
    interior (50%-overlap constant-sum property) and tapers at the edges.
    """
    if not envelopes:
        raise EmptyInputError("no envelope blocks")
    indices = [idx for idx, _ in envelopes]
    if indices != list(range(len(envelopes))):
        raise SequenceError(f"window indices {indices} are not consecutive from 0")
    bands = envelopes[0][1].shape[0]
    weight = hann_periodic(FRAMES_PER_WINDOW)
    acc = np.zeros((utterance_frames, bands))
    wsum = np.zeros(utterance_frames)
    plain = np.zeros((utterance_frames, bands))
    cover = np.zeros(utterance_frames)
    for idx, block in envelopes:
        if block.shape != (bands, FRAMES_PER_WINDOW):
            raise SequenceError(
                f"block {idx} has shape {block.shape}, expected ({bands}, {FRAMES_PER_WINDOW})"
            )
        start = idx * FRAME_HOP
        stop = min(start + FRAMES_PER_WINDOW, utterance_frames)
        n = stop - start
        if n <= 0:
            continue
        acc[start:stop] += weight[:n, None] * block[:, :n].T
        wsum[start:stop] += weight[:n]
        plain[start:stop] += block[:, :n].T
        cover[start:stop] += 1.0
    # The periodic Hann is zero at its first point, so the utterance's first
    # frame has zero total weight; fall back to the unweighted block mean there.
    degenerate = wsum < 1e-12
    wsum_safe = np.where(degenerate, 1.0, wsum)
    frames = acc / wsum_safe[:, None]
    if np.any(degenerate):
        fallback = plain / np.maximum(cover, 1.0)[:, None]
        frames[degenerate] = fallback[degenerate]

    masked_range = None
    if masked_window_index is not None:
        lo = masked_window_index * FRAME_HOP
        hi = min(lo + FRAMES_PER_WINDOW, utterance_frames)
        masked_range = (lo, hi)
    return FdlpSpectrogram(frames=frames, masked_frame_range=masked_range)


# --------------------------------------------------------------------------- pipeline

@lru_cache(maxsize=4)
def analysis_taper_log_pattern(order: int = DEFAULT_LP_ORDER,
                               frame_count: int = FRAMES_PER_WINDOW) -> np.ndarray:
    """Mean log-envelope shape the Hanning analysis window imprints on a block.

    Every window's fitted envelope carries the same dome from the time-domain
    analysis taper; left in place it overlap-adds into a spurious periodic
    component at the window rate (1.33 Hz) plus deep utterance-edge dips.
    Calibrated once on stationary white noise (seeded, so deterministic) and
    subtracted, mean-free, from each synthesized block before overlap-add.
    """
    rng = np.random.default_rng(0x7A9E12)
    window = hann_periodic(WINDOW_SAMPLES)
    acc = np.zeros(frame_count)
    draws = 24
    for _ in range(draws):
        seg = WindowedSegment(samples=rng.standard_normal(WINDOW_SAMPLES) * window,
                              start_sample=0, window_index=0)
        bands = subband_decompose(seg)
        autocorrs = np.stack([autocorrelation(y, order) for y in bands])
        a, err, _ = levinson(autocorrs)
        gains = np.maximum(np.sqrt(np.maximum(err[:, -1], 0.0)) / WINDOW_SAMPLES,
                           GAIN_FLOOR)
        coeffs = _lp_cepstrum_batch(a, 2.0 * np.log(gains), MOD_COEFF_COUNT)
        acc += synthesize_log_envelope(coeffs, frame_count).mean(axis=0)
    pattern = acc / draws
    pattern -= pattern.mean()
    pattern.flags.writeable = False
    return pattern


def compute_modulation_spectra(audio: AudioBuffer,
                               order: int = DEFAULT_LP_ORDER) -> list[ModulationSpectrum]:
    """Windowed sub-band FDLP analysis: one (20, 80) coefficient block per window."""
    spectra = []
    for segment in segment_utterance(audio):
        bands = subband_decompose(segment)
        autocorrs = np.stack([autocorrelation(y, order) for y in bands])
        energies = autocorrs[:, 0].real
        live = energies > 0.0
        coeffs = np.zeros((len(bands), order), dtype=np.complex128)
        log_gain_sq = np.full(len(bands), 2.0 * math.log(GAIN_FLOOR))
        if np.any(live):
            a, err, _ = levinson(autocorrs[live])
            coeffs[live] = a
            gains = np.sqrt(np.maximum(err[:, -1], 0.0)) / WINDOW_SAMPLES
            gains = np.maximum(gains, GAIN_FLOOR)
            log_gain_sq[live] = 2.0 * np.log(gains)
        mod = _lp_cepstrum_batch(coeffs, log_gain_sq, MOD_COEFF_COUNT)
        spectra.append(ModulationSpectrum(coeffs=mod, window_index=segment.window_index))
    return spectra


def spectrogram_from_spectra(spectra: Sequence[ModulationSpectrum],
                             utterance_frames: int,
                             mask: MaskSpec | None = None,
                             lp_order: int = DEFAULT_LP_ORDER) -> FdlpSpectrogram:
    """Synthesize log envelopes (applying dropout to the masked window),
    equalize the analysis-taper dome out of each block, and overlap-add."""
    taper = analysis_taper_log_pattern(lp_order, FRAMES_PER_WINDOW)
    masked_index = None
    blocks = []
    for spec in spectra:
        if mask is not None and spec.window_index == mask.window_index:
            spec = apply_modulation_dropout(spec, mask)
            masked_index = spec.window_index
        blocks.append((spec.window_index,
                       synthesize_log_envelope(spec.coeffs) - taper))
    return overlap_add_spectrogram(blocks, utterance_frames, masked_index)


def resolve_mask_window(mask: MaskSpec | None, n_windows: int,
                        rng_seed: int) -> MaskSpec | None:
    """Fill in a random window index when the mask leaves it unspecified."""
    if mask is None:
        return None
    if mask.window_index is not None:
        if not 0 <= mask.window_index < n_windows:
            raise ConfigurationError(
                f"mask window {mask.window_index} out of range (utterance has {n_windows})"
            )
        return mask
    rng = np.random.default_rng(rng_seed)
    return replace(mask, window_index=int(rng.integers(0, n_windows)))


def extract_features(audio: AudioBuffer, mask: MaskSpec | None = None,
                     rng_seed: int = 0, order: int = DEFAULT_LP_ORDER,
                     training: bool = False) -> tuple[FdlpSpectrogram, FdlpSpectrogram]:
    """Full pipeline: (masked spectrogram, clean spectrogram) for one utterance.

    With a mask whose window_index is None, the masked window is drawn
    uniformly from the utterance's windows using ``rng_seed`` (deterministic).
    Training mode rejects utterances shorter than one window; analysis mode
    zero-pads them.
    """
    audio.validate()
    n_frames = utterance_frame_count(audio.samples.size)
    if audio.samples.size < WINDOW_SAMPLES:
        if training:
            raise ShortUtteranceError(
                f"utterance of {audio.samples.size} samples cannot host a full "
                f"{WINDOW_SAMPLES}-sample window"
            )
        padded = np.pad(np.asarray(audio.samples, dtype=np.float64),
                        (0, WINDOW_SAMPLES - audio.samples.size))
        audio = AudioBuffer(samples=padded, sample_rate_hz=audio.sample_rate_hz)
    spectra = compute_modulation_spectra(audio, order=order)
    mask = resolve_mask_window(mask, len(spectra), rng_seed)
    clean = spectrogram_from_spectra(spectra, n_frames, mask=None, lp_order=order)
    if mask is None or mask.is_empty:
        masked = FdlpSpectrogram(frames=clean.frames.copy(),
                                 masked_frame_range=None if mask is None
                                 else _mask_range(mask.window_index, n_frames))
        clean.masked_frame_range = masked.masked_frame_range
        return masked, clean
    masked = spectrogram_from_spectra(spectra, n_frames, mask=mask, lp_order=order)
    clean.masked_frame_range = masked.masked_frame_range
    return masked, clean


def _mask_range(window_index: int, utterance_frames: int) -> tuple[int, int]:
    lo = window_index * FRAME_HOP
    return lo, min(lo + FRAMES_PER_WINDOW, utterance_frames)


def subtract_band_means(network_input: FdlpSpectrogram,
                        target: FdlpSpectrogram) -> tuple[FdlpSpectrogram, FdlpSpectrogram]:
    """Per-utterance per-band mean removal applied to input and target alike.

    Both sides are shifted by the target's band means so they stay identical
    outside the masked range.
    """
    means = target.frames.mean(axis=0, keepdims=True)
    return (
        FdlpSpectrogram(frames=network_input.frames - means,
                        frame_rate_hz=network_input.frame_rate_hz,
                        masked_frame_range=network_input.masked_frame_range),
        FdlpSpectrogram(frames=target.frames - means,
                        frame_rate_hz=target.frame_rate_hz,
                        masked_frame_range=target.masked_frame_range),
    )
