"""Matplotlib figures written next to the CSV/JSON outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import TrajectoryRecord  # noqa: E402
from .linear_analysis import RootLocusSample  # noqa: E402

RC = {
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "lines.linewidth": 1.4,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_trajectory(tr: TrajectoryRecord, path, band: float | None = None, reference: float = 0.0,
                    title: str | None = None) -> Path:
    with plt.rc_context(RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
        ax1.plot(tr.t, tr.theta, color="C0")
        if band is not None:
            for b in (reference - band, reference + band):
                ax1.axhline(b, color="0.5", ls="--", lw=0.8)
        ax1.set_ylabel(r"$\theta$ [rad]")
        ax2.plot(tr.t, tr.column("u"), color="C3", label="u")
        d = tr.column("d")
        if np.any(d):
            ax2.plot(tr.t, d, color="C2", label="disturbance")
            ax2.legend(loc="upper right", frameon=False)
        ax2.set_ylabel("force [N]")
        ax2.set_xlabel("t [s]")
        if title:
            ax1.set_title(title)
        return _save(fig, path)


def plot_locus(samples: Sequence[RootLocusSample], open_poles, zeros, path, title: str | None = None) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6, 5))
        if samples:
            branches = np.array([s.closed_loop_poles for s in samples])
            for j in range(branches.shape[1]):
                ax.plot(branches[:, j].real, branches[:, j].imag, lw=1.2)
        ax.plot([p.real for p in open_poles], [p.imag for p in open_poles], "kx", ms=8, label="open-loop poles")
        if len(zeros):
            ax.plot([z.real for z in zeros], [z.imag for z in zeros], "ko", mfc="none", ms=7, label="zeros")
        ax.axvline(0.0, color="0.3", lw=0.8)
        ax.set_xlabel("Re")
        ax.set_ylabel("Im")
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_surface(header: Sequence[str], rows: Sequence[Sequence[float]], n_inputs: int, path,
                 title: str | None = None) -> Path:
    """Heat map for two-input systems, line plot for one-input systems."""
    data = np.asarray(rows, dtype=float)
    with plt.rc_context(RC):
        if n_inputs == 2:
            xs = np.unique(data[:, 0])
            ys = np.unique(data[:, 1])
            z = data[:, 2].reshape(len(xs), len(ys)).T
            fig, ax = plt.subplots(figsize=(6, 5))
            mesh = ax.pcolormesh(xs, ys, z, shading="auto", cmap="RdBu_r")
            ax.contour(xs, ys, z, levels=9, colors="k", linewidths=0.5)
            fig.colorbar(mesh, ax=ax, label=header[2])
            ax.set_xlabel(header[0])
            ax.set_ylabel(header[1])
        else:
            fig, ax = plt.subplots(figsize=(6, 4))
            for k in range(1, data.shape[1]):
                ax.plot(data[:, 0], data[:, k], label=header[k])
            ax.set_xlabel(header[0])
            ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)
