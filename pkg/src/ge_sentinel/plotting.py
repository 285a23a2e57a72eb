"""Static figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ge_sentinel.earlystop import AreaOfHit, MonitorReport  # noqa: E402
from ge_sentinel.engine import BenchReport, GECurve  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_bench(report: BenchReport, path: str | Path) -> Path:
    """Seconds vs trace count per implementation, log scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for impl in dict.fromkeys(i for i, _, _ in report.rows):
        pts = sorted(report.seconds(impl).items())
        ax.plot([n for n, _ in pts], [s for _, s in pts], marker="o", ms=3, label=impl)
    ax.set_yscale("log")
    ax.axhline(1.0, color="grey", ls=":", lw=1)
    ax.set_xlabel("number of traces")
    ax.set_ylabel("seconds")
    ax.legend()
    return _save(fig, Path(path))


def plot_ge_curves(curves: Sequence[GECurve], path: str | Path,
                   area: AreaOfHit | None = None, labels: Sequence[str] | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, c in enumerate(curves):
        ax.plot(c.checkpoints, c.values, lw=1, label=labels[i] if labels else None)
    if area is not None:
        x0 = area.v if area.v is not None else 0
        ax.fill_between([x0, area.n_a], 0, max(area.w, 0.5), color="tab:green", alpha=0.2)
    ax.set_xlabel("number of traces")
    ax.set_ylabel("guessing entropy")
    if labels:
        ax.legend(fontsize=7)
    return _save(fig, Path(path))


def plot_monitor(report: MonitorReport, path: str | Path) -> Path:
    """GE over (epoch, traces) as a heat map, hits marked, stop epoch lined."""
    grid = np.vstack([c.values for c in report.curves])
    cps = report.curves[0].checkpoints
    epochs = [r.epoch for r in report.epochs]
    fig, ax = plt.subplots(figsize=(7, 4))
    im = ax.imshow(grid.T, aspect="auto", origin="lower", cmap="viridis",
                   extent=(epochs[0] - 0.5, epochs[-1] + 0.5, cps[0], cps[-1]))
    fig.colorbar(im, ax=ax, label="guessing entropy")
    hits = [r.epoch for r in report.epochs if r.hit]
    ax.scatter(hits, [cps[-1]] * len(hits), marker="v", color="red", s=12, label="hit")
    if report.stopped_at is not None:
        ax.axvline(report.stopped_at, color="white", ls="--", lw=1, label="stop")
    ax.set_xlabel("epoch")
    ax.set_ylabel("number of traces")
    ax.legend(loc="upper right", fontsize=7)
    return _save(fig, Path(path))
