"""Report figures (Agg backend, PNG without timestamps)."""

from __future__ import annotations

from pathlib import Path

import matplotlib
import matplotlib.ticker

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .planar_sets import RasterSet  # noqa: E402

PNG_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=PNG_META)
    plt.close(fig)
    return path


def _extent(grid):
    R = grid.window_radius
    return (-R, R, -R, R)


def plot_exhaustion(path, E: RasterSet, exhaustion) -> Path:
    g = E.grid
    fig, ax = plt.subplots(figsize=(5, 5))
    img = np.where(E.mask, 2.0, np.nan)
    for k, ex in enumerate(reversed(exhaustion)):
        img = np.where(ex.holes.mask & ~E.mask, 1.0, img)
    ax.imshow(img, origin="lower", extent=_extent(g), cmap="Greys", vmin=0, vmax=2.5,
              interpolation="nearest")
    t = np.linspace(0, 2 * np.pi, 361)
    for i, ex in enumerate(exhaustion, start=1):
        c, r = ex.disc.center, ex.disc.radius
        ax.plot(c.real + r * np.cos(t), c.imag + r * np.sin(t), lw=1, label=f"$\\Delta_{i}$ r={r:.2f}")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("set E, exhaustion discs and filled holes")
    ax.legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_error_map(path, err: np.ndarray, E: RasterSet, title: str = "chordal error") -> Path:
    g = E.grid
    fig, ax = plt.subplots(figsize=(5.5, 5))
    with np.errstate(divide="ignore"):
        L = np.log10(np.maximum(err, 1e-17))
    im = ax.imshow(L, origin="lower", extent=_extent(g), cmap="viridis", interpolation="nearest")
    ax.contour(g.axis, g.axis, E.mask.astype(float), levels=[0.5], colors="w", linewidths=0.8)
    fig.colorbar(im, ax=ax, label="log10 distance")
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_picard(path, records) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    shown = False
    for r in records:
        h = np.asarray(r.defect_history, dtype=float)
        if h.size:
            ax.semilogy(np.arange(h.size), np.maximum(h, 1e-17), "o-", label=f"step {r.step}")
            shown = True
    ax.xaxis.set_major_locator(matplotlib.ticker.MaxNLocator(integer=True))
    ax.set_xlabel("iteration")
    ax.set_ylabel("defect")
    ax.set_title("splitting iteration")
    if shown:
        ax.legend()
    else:
        ax.text(0.5, 0.5, "no splitting steps", ha="center", va="center", transform=ax.transAxes)
    fig.tight_layout()
    return _save(fig, path)


def plot_budget(path, records, epsilon: float) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    steps = np.array([r.step for r in records])
    dev = np.array([r.deviation for r in records])
    bud = np.array([r.budget for r in records])
    ax.semilogy(steps, bud, "s--", label="budget $2^{-i}\\varepsilon$")
    ax.semilogy(steps, np.maximum(dev, 1e-17), "o-", label="deviation on $E_{i-1}$")
    ax.semilogy(steps, np.maximum(np.cumsum(dev), 1e-17), "^:", label="cumulative")
    ax.axhline(epsilon, color="k", lw=0.8)
    ax.set_xticks(steps)
    ax.set_xlabel("step")
    ax.legend(fontsize=8)
    ax.set_title("error budget")
    fig.tight_layout()
    return _save(fig, path)
