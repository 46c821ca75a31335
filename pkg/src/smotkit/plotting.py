"""Figure rendering for report outputs. Headless; writes image files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_HEADLINES = ("so_hota", "hota", "mota", "idf1")
_LABELS = {
    "so_hota": "SO-HOTA", "so_deta": "SO-DetA", "so_assa": "SO-AssA",
    "so_detre": "SO-DetRe", "so_detpr": "SO-DetPr",
    "hota": "HOTA", "deta": "DetA", "assa": "AssA",
    "mota": "MOTA", "idf1": "IDF1",
}


def render_displacement_figure(rows: Sequence, path: str | Path) -> Path:
    """Two panels: similarity kernels and pipeline scores against shift."""
    path = Path(path)
    xs = [r.x for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    ax1.plot(xs, [r.iou for r in rows], label="IoU", color="tab:blue")
    ax1.plot(xs, [r.dotd for r in rows], label="DotD", color="tab:red")
    ax1.set_xlabel("displacement [px]")
    ax1.set_ylabel("similarity")
    ax1.set_title("pairwise similarity")
    ax2.plot(xs, [r.hota for r in rows], label="HOTA", color="tab:blue")
    ax2.plot(xs, [r.so_hota for r in rows], label="SO-HOTA", color="tab:red")
    ax2.set_xlabel("displacement [px]")
    ax2.set_ylabel("score")
    ax2.set_title("tracking score")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
        ax.legend()
        ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report_figure(report, path: str | Path) -> Path:
    """Pooled threshold curves plus per-sequence headline bars."""
    path = Path(path)
    curves = report.pooled_alpha
    headline = next((k for k in _HEADLINES if k in report.pooled), None)
    n_panels = (1 if curves else 0) + (1 if headline else 0)
    if n_panels == 0:
        n_panels = 1
    fig, axes = plt.subplots(1, n_panels, figsize=(6 * n_panels, 4), squeeze=False)
    axes = axes[0]
    i = 0
    if curves:
        ax = axes[i]
        alphas = report.config["thresholds"]
        for key in ("so_hota", "so_deta", "so_assa", "hota", "deta", "assa"):
            if key in curves:
                ax.plot(alphas, curves[key], marker=".", label=_LABELS[key])
        ax.set_xlabel("threshold")
        ax.set_ylabel("score")
        ax.set_title("score by matching threshold")
        ax.set_ylim(-0.02, 1.02)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=8)
        i += 1
    if headline:
        ax = axes[i]
        names = sorted(report.per_sequence)
        values = [report.per_sequence[n].get(headline) for n in names]
        values = [v if isinstance(v, (int, float)) else 0.0 for v in values]
        ax.bar(range(len(names)), values, color="tab:blue")
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
        ax.set_ylabel(_LABELS[headline])
        ax.set_title(f"per-sequence {_LABELS[headline]}")
        ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
