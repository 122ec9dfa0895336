"""Layer-wise temporal modulation analysis of predictor activations.

For each self-attention layer, take the network's per-layer output sequences
over a set of utterances, remove each dimension's mean along time, Fourier
transform along time on a shared 512-point grid, and average the magnitudes
over dimensions and utterances. The resulting per-layer spectra show which
temporal rates each layer's output carries.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, EmptyInputError
from .predictor import ActivationTrace

PROBE_FFT_LENGTH = 512
REPORT_MAX_HZ = 20.0


@dataclass
class LayerProbeReport:
    """Average temporal magnitude spectra per layer, on a common frequency axis."""

    freq_axis_hz: np.ndarray            # reporting axis, 0 .. REPORT_MAX_HZ
    per_layer_spectra: np.ndarray       # (layer_count, len(freq_axis_hz))
    utterance_count: int
    band_ratio_2_8: np.ndarray          # (layer_count,), energy fraction in 2-8 Hz

    @property
    def layer_count(self) -> int:
        return self.per_layer_spectra.shape[0]

    def peak_frequencies_hz(self) -> np.ndarray:
        """Per-layer spectral peak with the DC bin excluded."""
        peaks = np.argmax(self.per_layer_spectra[:, 1:], axis=1) + 1
        return self.freq_axis_hz[peaks]


def _chunk_indices(frame_count: int, fft_length: int) -> list[tuple[int, int]]:
    """Non-overlapping fft_length chunks covering all frames (last one partial)."""
    if frame_count <= fft_length:
        return [(0, frame_count)]
    bounds = list(range(0, frame_count, fft_length))
    return [(b, min(b + fft_length, frame_count)) for b in bounds]


def layer_modulation_spectra(traces: Sequence[ActivationTrace],
                             frame_rate_hz: float = 100.0,
                             fft_length: int = PROBE_FFT_LENGTH,
                             report_max_hz: float = REPORT_MAX_HZ) -> LayerProbeReport:
    """Average per-layer magnitude spectra along time, over dims and utterances.

    Traces longer than ``fft_length`` frames are split into consecutive
    chunks so every frame contributes to the shared frequency grid; each
    chunk is mean-subtracted per dimension before the transform.
    """
    if not traces:
        raise EmptyInputError("no activation traces to analyze")
    layer_count = len(traces[0].layers)
    for t in traces:
        if len(t.layers) != layer_count:
            raise ConfigurationError("traces disagree on layer count")

    n_bins = fft_length // 2 + 1
    accum = np.zeros((layer_count, n_bins))
    weight = 0.0
    for trace in traces:
        frame_count = trace.layers[0].shape[0]
        for layer_idx, activations in enumerate(trace.layers):
            if activations.shape[0] != frame_count:
                raise ConfigurationError("layers within a trace disagree on frame count")
            for lo, hi in _chunk_indices(frame_count, fft_length):
                chunk = np.asarray(activations[lo:hi], dtype=np.float64)
                chunk = chunk - chunk.mean(axis=0, keepdims=True)
                mags = np.abs(np.fft.rfft(chunk, n=fft_length, axis=0))
                accum[layer_idx] += mags.mean(axis=1)
        weight += len(_chunk_indices(frame_count, fft_length))
    full_spectra = accum / weight
    full_axis = np.fft.rfftfreq(fft_length, d=1.0 / frame_rate_hz)

    ratios = np.array([band_energy_ratio(s, full_axis) for s in full_spectra])
    keep = full_axis <= report_max_hz + 1e-9
    return LayerProbeReport(freq_axis_hz=full_axis[keep],
                            per_layer_spectra=full_spectra[:, keep],
                            utterance_count=len(traces),
                            band_ratio_2_8=ratios)


def band_energy_ratio(spectrum: np.ndarray, freq_axis_hz: np.ndarray,
                      lo_hz: float = 2.0, hi_hz: float = 8.0) -> float:
    """Fraction of squared magnitude in [lo, hi] Hz relative to (0, Nyquist]."""
    if freq_axis_hz[-1] < hi_hz:
        raise ConfigurationError(
            f"frequency axis tops out at {freq_axis_hz[-1]:.2f} Hz, below {hi_hz} Hz"
        )
    power = np.asarray(spectrum, dtype=np.float64) ** 2
    nonzero = freq_axis_hz > 0.0
    total = float(power[nonzero].sum())
    if total <= 0.0:
        warnings.warn("all-zero spectrum in band_energy_ratio")
        return 0.0
    in_band = nonzero & (freq_axis_hz >= lo_hz) & (freq_axis_hz <= hi_hz)
    return float(power[in_band].sum() / total)


def emit_report(report: LayerProbeReport, out_dir: str | Path,
                render_figure: bool = True) -> dict[str, Path]:
    """Write the spectra and summary CSVs (and a figure) under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spectra_path = out_dir / "layer_spectra.csv"
    summary_path = out_dir / "layer_summary.csv"

    layer_names = [f"layer_{i + 1}" for i in range(report.layer_count)]
    with open(spectra_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz"] + layer_names)
        for j, f in enumerate(report.freq_axis_hz):
            writer.writerow([f"{f:.9g}"] +
                            [f"{report.per_layer_spectra[i, j]:.9g}"
                             for i in range(report.layer_count)])

    peaks = report.peak_frequencies_hz()
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "band_ratio_2_8", "peak_hz"])
        for i in range(report.layer_count):
            writer.writerow([i + 1, f"{report.band_ratio_2_8[i]:.9g}",
                             f"{peaks[i]:.9g}"])

    written = {"spectra": spectra_path, "summary": summary_path}
    if render_figure:
        from .plots import save_layer_spectra_figure
        written["figure"] = save_layer_spectra_figure(
            report, out_dir / "layer_spectra.png")
    return written
