"""PNG figures for CLI runs (matplotlib, non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import Grid2D  # noqa: E402


def _extent(grid: Grid2D):
    return (0.0, (grid.nx - 1) * grid.dx, (grid.nz - 1) * grid.dz, 0.0)


def field_panels(path, grid: Grid2D, panels, cmap="gray", suptitle=None) -> None:
    """Side-by-side images of ``panels = [(title, array), ...]`` on a shared colour scale."""
    arrays = [np.asarray(a) for _, a in panels]
    vmin = min(float(a.min()) for a in arrays)
    vmax = max(float(a.max()) for a in arrays)
    fig, axes = plt.subplots(1, len(panels), figsize=(3.8 * len(panels) + 1.0, 3.4), squeeze=False,
                             layout="constrained")
    for ax, (title, a) in zip(axes[0], panels):
        im = ax.imshow(a, cmap=cmap, vmin=vmin, vmax=vmax, extent=_extent(grid), aspect="auto")
        ax.set_title(title)
        ax.set_xlabel("x")
    axes[0][0].set_ylabel("z")
    fig.colorbar(im, ax=axes[0].tolist(), shrink=0.9)
    if suptitle:
        fig.suptitle(suptitle)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def tilt_weight(path, grid: Grid2D, theta, sigma) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for ax, a, title, cmap, lim in (
        (axes[0], np.degrees(theta), "tilt (deg)", "twilight", (-90, 90)),
        (axes[1], sigma, "weight", "viridis", (0, 1)),
    ):
        im = ax.imshow(a, cmap=cmap, vmin=lim[0], vmax=lim[1], extent=_extent(grid), aspect="auto")
        ax.set_title(title)
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def history_curves(path, rows) -> None:
    """Relative error, data residual and wave-equation residual against iteration."""
    it = np.array([r["iteration"] for r in rows])
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.4))
    for ax, key, log in (
        (axes[0], "relative_error", False),
        (axes[1], "data_residual", True),
        (axes[2], "waveeq_residual", True),
    ):
        y = np.array([r[key] for r in rows], dtype=float)
        ax.plot(it, y, lw=1.2)
        if log and np.all(y[np.isfinite(y)] > 0):
            ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_title(key)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def data_amplitude(path, data, freqs) -> None:
    """|d| per frequency, sources down and receivers across."""
    data = np.asarray(data)
    fig, axes = plt.subplots(1, len(freqs), figsize=(2.6 * len(freqs), 3), squeeze=False)
    for ax, d, f in zip(axes[0], data, freqs):
        ax.imshow(np.abs(d), aspect="auto", cmap="magma")
        ax.set_title(f"{f:g} Hz")
        ax.set_xlabel("receiver")
    axes[0][0].set_ylabel("source")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
