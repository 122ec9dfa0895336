"""Matplotlib rendering of probe reports and training curves to image files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .probe import LayerProbeReport  # noqa: E402


def save_layer_spectra_figure(report: LayerProbeReport,
                              path: str | Path, dpi: int = 150) -> Path:
    """Small-multiples grid of per-layer temporal magnitude spectra."""
    path = Path(path)
    n = report.layer_count
    cols = min(4, n)
    rows = -(-n // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.4 * rows),
                             sharex=True, squeeze=False)
    peaks = report.peak_frequencies_hz()
    for i in range(rows * cols):
        ax = axes[i // cols][i % cols]
        if i >= n:
            ax.axis("off")
            continue
        ax.plot(report.freq_axis_hz, report.per_layer_spectra[i], lw=1.2)
        ax.axvspan(2.0, 8.0, color="tab:orange", alpha=0.15)
        ax.set_title(f"layer {i + 1}  (peak {peaks[i]:.1f} Hz, "
                     f"2-8 Hz ratio {report.band_ratio_2_8[i]:.2f})", fontsize=8)
        ax.tick_params(labelsize=7)
        if i // cols == rows - 1:
            ax.set_xlabel("modulation frequency (Hz)", fontsize=8)
    fig.suptitle(f"Temporal modulations per self-attention layer "
                 f"({report.utterance_count} utterances)", fontsize=10)
    fig.tight_layout(rect=(0, 0, 1, 0.96))
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def save_loss_curve(steps: Sequence[int], losses: Sequence[float],
                    path: str | Path, dpi: int = 150) -> Path:
    """Training loss against step index."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    ax.plot(steps, losses, lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("masked L1 loss")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
