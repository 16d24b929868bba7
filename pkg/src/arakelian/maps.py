"""Continuous maps into CP1: rational, sampled, and callable forms.

Every map exposes ``hom(z)`` returning normalized homogeneous values of shape
``z.shape + (2,)`` and ``on(S)`` for the values on the cells of a raster set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.ndimage import map_coordinates

from .planar_sets import GridSpec, RasterSet
from .target_cp1 import dist_cp1, from_sphere, normalize, to_chart, to_sphere


class CP1Map:
    def hom(self, z) -> np.ndarray:
        raise NotImplementedError

    def on(self, S: RasterSet) -> np.ndarray:
        return self.hom(S.points)

    def on_grid(self, grid: GridSpec) -> np.ndarray:
        return self.hom(grid.points)

    def chart(self, z) -> np.ndarray:
        return to_chart(self.hom(z))


def _horner(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=complex) + c[-1]
    for a in c[-2::-1]:
        out = out * x + a
    return out


def _trim(c: np.ndarray, tol: float = 0.0) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    k = len(c)
    while k > 1 and abs(c[k - 1]) <= tol:
        k -= 1
    return c[:k]


@dataclass(frozen=True, eq=False)
class RationalMap(CP1Map):
    """``z -> [N(z/scale) : D(z/scale)]`` with ascending coefficient arrays."""

    num: np.ndarray
    den: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        num = _trim(self.num)
        den = _trim(self.den)
        if not np.any(num) and not np.any(den):
            raise ValueError("numerator and denominator both vanish")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @property
    def degree(self) -> int:
        n = len(_trim(self.num, 1e-14 * np.abs(self.num).max())) - 1 if np.any(self.num) else 0
        d = len(_trim(self.den, 1e-14 * np.abs(self.den).max())) - 1 if np.any(self.den) else 0
        return max(n, d)

    def hom(self, z) -> np.ndarray:
        x = np.asarray(z, dtype=complex) / self.scale
        N = _horner(self.num, x)
        D = _horner(self.den, x)
        # both vanish only at a common root; nudge to the limit value
        bad = (N == 0) & (D == 0)
        if np.any(bad):
            xb = x[bad] * (1 + 1e-9) + 1e-12
            N[bad], D[bad] = _horner(self.num, xb), _horner(self.den, xb)
        return normalize(np.stack([N, D], axis=-1))

    def compose_mobius(self, A) -> "RationalMap":
        """Post-composition ``[a N + b D : c N + d D]``."""
        A = np.asarray(A, dtype=complex)
        m = max(len(self.num), len(self.den))
        N = np.pad(self.num, (0, m - len(self.num)))
        D = np.pad(self.den, (0, m - len(self.den)))
        return RationalMap(A[0, 0] * N + A[0, 1] * D, A[1, 0] * N + A[1, 1] * D, self.scale)

    def z_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.arange(max(len(self.num), len(self.den)))
        s = float(self.scale) ** -k.astype(float)
        return self.num * s[:len(self.num)], self.den * s[:len(self.den)]

    def poles(self) -> np.ndarray:
        """Roots of the denominator in ``z``."""
        d = _trim(self.den, 1e-14 * np.abs(self.den).max())
        if len(d) < 2:
            return np.zeros(0, complex)
        return np.roots(d[::-1]) * self.scale

    def preimages(self, y) -> np.ndarray:
        """All finite ``z`` with ``F(z) = y``."""
        y = normalize(y)
        m = max(len(self.num), len(self.den))
        P = y[1] * np.pad(self.num, (0, m - len(self.num))) - y[0] * np.pad(self.den, (0, m - len(self.den)))
        P = _trim(P, 1e-13 * np.abs(P).max())
        if len(P) < 2:
            return np.zeros(0, complex)
        return np.roots(P[::-1]) * self.scale

    def common_root_gap(self) -> float:
        """Smallest relative ``|N(r)|`` over denominator roots ``r`` (0 means a common root)."""
        r = self.poles() / self.scale
        if r.size == 0:
            return np.inf
        N = np.abs(_horner(self.num, r))
        ref = np.abs(self.num).sum() * np.maximum(1, np.abs(r)) ** (len(self.num) - 1)
        return float((N / ref).min())

    def cancel_common_roots(self, tol: float = 1e-8) -> "RationalMap":
        num, den = self.num.copy(), self.den.copy()
        for _ in range(len(den)):
            d = _trim(den, 1e-14 * np.abs(den).max())
            if len(d) < 2 or len(_trim(num, 1e-14 * np.abs(num).max())) < 2:
                break
            roots = np.roots(d[::-1])
            Nr = np.abs(_horner(num, roots))
            ref = np.abs(num).sum() * np.maximum(1, np.abs(roots)) ** (len(num) - 1)
            k = int(np.argmin(Nr / ref))
            if Nr[k] / ref[k] > tol:
                break
            r = roots[k]
            num = np.polydiv(_trim(num)[::-1], np.array([1, -r]))[0][::-1]
            den = np.polydiv(d[::-1], np.array([1, -r]))[0][::-1]
        return RationalMap(num, den, self.scale)

    def zeros(self) -> np.ndarray:
        n = _trim(self.num, 1e-14 * np.abs(self.num).max())
        if len(n) < 2:
            return np.zeros(0, complex)
        return np.roots(n[::-1]) * self.scale

    def without_doublets(self, min_gap: float) -> tuple["RationalMap", int]:
        """Cancel pole-zero pairs closer than ``min_gap`` (in ``z``); returns (map, pairs removed)."""
        num, den = _trim(self.num), _trim(self.den)
        removed = 0
        while len(num) > 1 and len(den) > 1:
            zs = np.roots(num[::-1])
            ps = np.roots(den[::-1])
            d = np.abs(zs[:, None] - ps[None, :])
            k, j = np.unravel_index(int(np.argmin(d)), d.shape)
            if d[k, j] * self.scale >= min_gap:
                break
            num = np.polydiv(num[::-1], np.array([1, -zs[k]]))[0][::-1]
            den = np.polydiv(den[::-1], np.array([1, -ps[j]]))[0][::-1]
            removed += 1
        return RationalMap(num, den, self.scale), removed

    # text format: "num: re,im re,im ..." / "den: ..." in z-monomials
    def to_text(self) -> str:
        n, d = self.z_coefficients()

        def fmt(c):
            return " ".join(f"{v.real:.17g},{v.imag:.17g}" for v in c)

        return f"num: {fmt(n)}\nden: {fmt(d)}\n"

    @classmethod
    def from_text(cls, text: str) -> "RationalMap":
        parts = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(":")
            if key not in ("num", "den"):
                raise ValueError(f"unknown key {key!r} in rational map file")
            vals = []
            for tok in rest.split():
                re_, _, im_ = tok.partition(",")
                vals.append(complex(float(re_), float(im_ or 0)))
            parts[key] = np.array(vals, dtype=complex)
        if set(parts) != {"num", "den"}:
            raise ValueError("rational map file needs 'num:' and 'den:' lines")
        return cls(parts["num"], parts["den"])

    @classmethod
    def identity(cls) -> "RationalMap":
        return cls(np.array([0, 1]), np.array([1]))

    @classmethod
    def constant(cls, y) -> "RationalMap":
        y = normalize(y)
        return cls(np.array([y[0]]), np.array([y[1]]))


@dataclass(frozen=True, eq=False)
class FunctionMap(CP1Map):
    """Map given by a callable returning homogeneous pairs."""

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "function"

    def hom(self, z) -> np.ndarray:
        return normalize(self.fn(np.asarray(z, dtype=complex)))


@dataclass(frozen=True, eq=False)
class SampledMap(CP1Map):
    """Values at every cell of a grid; other points by bilinear sphere interpolation."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if not np.allclose(np.linalg.norm(v, axis=-1), 1, rtol=0, atol=1e-14):
            v = normalize(v)
        if v.shape != self.grid.shape + (2,):
            raise ValueError("sampled map needs one value per grid cell")
        object.__setattr__(self, "values", v)

    def on(self, S: RasterSet) -> np.ndarray:
        if S.grid == self.grid:
            return self.values[S.mask]
        return self.hom(S.points)

    def on_grid(self, grid: GridSpec) -> np.ndarray:
        if grid == self.grid:
            return self.values
        return self.hom(grid.points)

    def hom(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        g = self.grid
        col = (z.real + g.window_radius) / g.spacing - 0.5
        row = (z.imag + g.window_radius) / g.spacing - 0.5
        X = to_sphere(self.values)
        out = np.stack([map_coordinates(X[..., k], [row.ravel(), col.ravel()], order=1, mode="nearest")
                        for k in range(3)], axis=-1)
        return from_sphere(out).reshape(z.shape + (2,))


def stencil_jump(values: np.ndarray) -> np.ndarray:
    """Largest chordal distance from each cell to its four neighbours (NaN on the outer ring)."""
    V = normalize(values)
    J = np.full(V.shape[:2], np.nan)
    c = V[1:-1, 1:-1]
    nb = (V[1:-1, 2:], V[1:-1, :-2], V[2:, 1:-1], V[:-2, 1:-1])
    J[1:-1, 1:-1] = np.max([dist_cp1(c, n) for n in nb], axis=0)
    return J


def cr_residual(values: np.ndarray, grid: GridSpec, region: RasterSet,
                max_jump: float | None = None) -> tuple[float, int]:
    """Largest chordal ``|dbar u| / (1 + |u|^2)`` over ``region`` (centered differences).

    The chart (``u`` or ``1/u``) is chosen per cell by the value at that cell.
    Cells whose stencil jumps by more than ``max_jump`` in the chordal metric
    are under-resolved by the grid and skipped; returns (residual, cells skipped).
    """
    V = normalize(values)
    h = grid.spacing
    inner = region.interior(1).mask.copy()
    inner[0, :] = inner[-1, :] = inner[:, 0] = inner[:, -1] = False
    skipped = 0
    if max_jump is not None:
        bad = inner & ~(stencil_jump(V) <= max_jump)
        skipped = int(bad.sum())
        inner &= ~bad
    if not inner.any():
        return 0.0, skipped
    best = np.full(grid.shape, np.nan)
    for a, b in ((0, 1), (1, 0)):
        with np.errstate(divide="ignore", invalid="ignore"):
            U = V[..., a] / V[..., b]
        D = np.full(grid.shape, np.nan + 0j)
        D[1:-1, 1:-1] = 0.25 * ((U[1:-1, 2:] - U[1:-1, :-2]) + 1j * (U[2:, 1:-1] - U[:-2, 1:-1])) / h
        r = np.abs(D) / (1 + np.abs(U) ** 2)
        use = np.abs(V[..., a]) <= np.abs(V[..., b])
        best = np.where(use, r, best)
    vals = best[inner]
    vals = vals[np.isfinite(vals)]
    return (float(vals.max()) if vals.size else 0.0), skipped
