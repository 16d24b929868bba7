"""Bounded linear additive splitting on a Cartan pair.

Given ``g`` on ``K = A ∩ B`` and a cutoff ``chi`` (0 near ``A∖B``, 1 near
``B∖A``)::

    a = chi*g - T_K(g dbar chi)      on A
    b = (chi - 1)*g - T_K(g dbar chi) on B

so ``g = a - b`` on ``K`` identically, and ``a``, ``b`` are holomorphic
wherever ``g`` is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cauchy_green import (
    CutoffFunction,
    ParamField,
    ScalarField,
    build_cutoff,
    cauchy_transform_grid,
    dbar_centered,
)
from .planar_sets import CartanPair, RasterSet


@dataclass(frozen=True, eq=False)
class CousinSplit:
    a_field: ScalarField
    b_field: ScalarField
    identity_residual: float
    dbar_residual_A: float
    dbar_residual_B: float

    def report_rows(self, tolerance: float) -> list[tuple]:
        rows = [("identity_residual", self.identity_residual, 1e-12),
                ("dbar_residual_A", self.dbar_residual_A, tolerance),
                ("dbar_residual_B", self.dbar_residual_B, tolerance)]
        return [(q, v, tol, v <= tol) for q, v, tol in rows]


class CousinOperator:
    """Precomputed data for repeated splits on one pair and cutoff."""

    def __init__(self, pair: CartanPair, chi: CutoffFunction | None = None):
        self.pair = pair
        self.chi = chi if chi is not None else build_cutoff(pair)
        self.grid = pair.grid
        K = pair.K.mask
        self._K = K
        self._chi_K = self.chi.values[K]
        self._dchi_K = self.chi.dbar_values[K]
        self._active = np.abs(self._dchi_K) > 0

    @property
    def bound(self) -> float:
        """``C = 1 + 2 sqrt(Area(K)/pi) sup|dbar chi|`` with ``sup|a| + sup|b| <= C sup|g|``."""
        return 1.0 + 2.0 * math.sqrt(self.pair.K.area / math.pi) * self.chi.dbar_sup

    def transform(self, gK: np.ndarray) -> np.ndarray:
        """``T_K(g dbar chi)`` on the full grid for a stack of K-values ``(..., nK)``."""
        gK = np.asarray(gK, dtype=complex)
        full = np.zeros(gK.shape[:-1] + self.grid.shape, dtype=complex)
        full[..., self._K] = gK * self._dchi_K
        return cauchy_transform_grid(full, self.grid)

    def full_grids(self, gK: np.ndarray):
        """Grid arrays of ``a`` and ``b`` (meaningful on A and on B respectively)."""
        gK = np.asarray(gK, dtype=complex)
        T = self.transform(gK)
        gfull = np.zeros_like(T)
        gfull[..., self._K] = gK
        chi = self.chi.values
        return chi * gfull - T, (chi - 1) * gfull - T

    def apply(self, gK: np.ndarray):
        """Return ``(a on A, b on B)`` as arrays ``(..., nA)``, ``(..., nB)``."""
        a, b = self.full_grids(gK)
        return a[..., self.pair.A.mask], b[..., self.pair.B.mask]

    def apply_on(self, gK: np.ndarray, region: RasterSet):
        """``(a, b)`` sampled on an arbitrary region (e.g. ``K``)."""
        a, b = self.full_grids(gK)
        return a[..., region.mask], b[..., region.mask]


def _dbar_sup(F: np.ndarray, region: RasterSet, h: float) -> float:
    inner = region.interior(1)
    if inner.is_empty:
        return 0.0
    D = dbar_centered(F, h)[inner.mask]
    D = D[np.isfinite(D)]
    return float(np.abs(D).max()) if D.size else 0.0


def split_scalar(g: ScalarField, p: CartanPair, chi: CutoffFunction | None = None,
                 op: CousinOperator | None = None) -> CousinSplit:
    if g.support != p.K:
        raise ValueError("g must be supported on K of the pair")
    op = op or CousinOperator(p, chi)
    a, b = op.full_grids(g.values)
    h = p.grid.spacing
    a_A = ScalarField(p.A, a[p.A.mask])
    b_B = ScalarField(p.B, b[p.B.mask])
    ident = float(np.abs(g.values - (a[p.K.mask] - b[p.K.mask])).max()) if g.values.size else 0.0
    return CousinSplit(a_A, b_B, ident, _dbar_sup(a, p.A, h), _dbar_sup(b, p.B, h))


def split_param(g: ParamField, p: CartanPair, chi: CutoffFunction | None = None,
                op: CousinOperator | None = None) -> tuple[ParamField, ParamField]:
    """Per-parameter split; holomorphic in ``w`` because the operator is linear and ``w``-free."""
    if g.support != p.K:
        raise ValueError("g must be supported on K of the pair")
    op = op or CousinOperator(p, chi)

    def ev_a(w):
        return op.apply(g.evaluator(w))[0]

    def ev_b(w):
        return op.apply(g.evaluator(w))[1]

    return ParamField(p.A, ev_a, g.radius), ParamField(p.B, ev_b, g.radius)
