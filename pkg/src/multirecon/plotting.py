"""Static SVG charts for sweep results (rendered off-screen with matplotlib)."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from multirecon.eval import RdCurve, ReportRow  # noqa: E402
from multirecon.pgm import atomic_write  # noqa: E402

# deterministic output: no timestamps or random ids in the SVG
plt.rcParams["svg.hashsalt"] = "multirecon"
_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path: str | Path) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata=_SVG_META, bbox_inches="tight")
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def plot_rd_curves(path: str | Path, curves: Iterable[RdCurve], title: str = "") -> None:
    """Expected PSNR against bits per pixel, one line per method."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for curve in curves:
        if curve.points:
            ax.plot(curve.rates, curve.psnrs, marker="o", markersize=3, label=curve.label)
    ax.set_xlabel("bits per pixel")
    ax.set_ylabel("expected PSNR (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_gains(path: str | Path, rows: Sequence[ReportRow]) -> None:
    """Grouped bars of BD-PSNR gain per image; missing cells are drawn as gaps."""
    columns = [("gain_vs_regular", "vs regular"), ("gain_vs_predeconv", "vs pre-deconvolution"),
               ("gain_vs_single", "vs single display")]
    width = 0.8 / len(columns)
    fig, ax = plt.subplots(figsize=(max(5.5, 0.6 * len(rows) + 2), 4))
    for i, (attr, label) in enumerate(columns):
        xs = [j + (i - 1) * width for j, row in enumerate(rows) if getattr(row, attr) is not None]
        ys = [getattr(row, attr) for row in rows if getattr(row, attr) is not None]
        ax.bar(xs, ys, width, label=label)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([row.image for row in rows], rotation=45, ha="right")
    ax.set_ylabel("BD-PSNR gain (dB)")
    ax.legend()
    _save(fig, path)
