"""SVG figures: heatmaps (d = 2) and polylines (d = 1) of fields and potentials,
plus optimizer traces."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import GeneralizedPotential, ScalarField  # noqa: E402

# fixed hash salt and no date stamp keep the SVG bytes reproducible
matplotlib.rcParams["svg.hashsalt"] = "spectropt"
_META = {"Date": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata=_META, bbox_inches="tight")
    plt.close(fig)
    return path


def _extent(grid):
    return (-grid.L, grid.L, -grid.L, grid.L)


def plot_field(f: ScalarField, path, title: str = "", mask=None) -> Path:
    grid = f.grid
    fig, ax = plt.subplots(figsize=(5, 4))
    if grid.d == 1:
        ax.plot(grid.axis, f.values, color="C0", lw=1.2)
        if mask is not None:
            m = np.asarray(mask, dtype=bool)
            ax.fill_between(grid.axis, 0, 1, where=m, transform=ax.get_xaxis_transform(),
                            color="0.85", step="mid", label="masked")
            ax.legend(frameon=False)
        ax.set_xlabel("x")
        ax.set_xlim(-grid.L, grid.L)
    else:
        im = ax.imshow(f.values.T, origin="lower", extent=_extent(grid), cmap="viridis")
        fig.colorbar(im, ax=ax, shrink=0.85)
        if mask is not None:
            layer = np.ma.masked_where(~np.asarray(mask, dtype=bool).T, np.ones(grid.shape))
            ax.imshow(layer, origin="lower", extent=_extent(grid), cmap="Greys", vmin=0, vmax=2, alpha=0.6)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal")
    ax.set_title(title)
    return _save(fig, path)


def plot_potential(pot: GeneralizedPotential, path, title: str = "vfin (grey: masked)") -> Path:
    """Finite part on a log scale with the mask drawn as its own layer."""
    v = np.log10(np.maximum(pot.vfin, 1e-12 / pot.grid.L**2))
    v = np.where(pot.inf_mask, np.nan, v)
    f = ScalarField(pot.grid, np.nan_to_num(v, nan=float(np.nanmin(v)) if np.any(~pot.inf_mask) else 0.0))
    return plot_field(f, path, title=title, mask=pot.inf_mask)


def plot_trace(values, path, ylabel: str = "objective", title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(np.arange(len(values)), values, color="C1", lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return _save(fig, path)


def plot_spectrum(eigenvalues, path, title: str = "eigenvalues") -> Path:
    fig, ax = plt.subplots(figsize=(4, 3))
    j = np.arange(1, len(eigenvalues) + 1)
    ax.plot(j, eigenvalues, "o", color="C2")
    ax.set_xlabel("j")
    ax.set_ylabel("lambda_j")
    ax.set_xticks(j)
    ax.set_title(title)
    return _save(fig, path)
