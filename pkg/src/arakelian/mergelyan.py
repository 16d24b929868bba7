"""Approximation engines.

* ``poly_approx``: scalar least-squares polynomial fit on a hole-free compact.
* ``rational_approx_cp1``: CP1-valued rational fit ``[N : D]`` by linearized
  homogeneous least squares with greedy pole insertion.
* ``continuous_glue``: continuous extension through the sphere embedding.
* ``avoid_set``: Mobius post-composition missing a finite set on the grid.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.ndimage import distance_transform_edt

from .maps import CP1Map, RationalMap, SampledMap
from .planar_sets import GridSpec, RasterSet, holes, hull
from .target_cp1 import (
    dist_cp1,
    exp_sl2,
    from_sphere,
    normalize,
    to_sphere,
)

log = logging.getLogger(__name__)

MAX_DEGREE = 60
GLUE_RADIUS = 0.5


class HolesError(ValueError):
    pass


class TargetNotReachedWarning(UserWarning):
    pass


class AvoidanceError(RuntimeError):
    pass


@dataclass
class ApproxReport:
    sup_error: float
    degree: int
    method: str
    history: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# scalar polynomials


@dataclass(frozen=True)
class Polynomial:
    coeffs: np.ndarray  # ascending, in (z - center) / scale
    center: complex = 0j
    scale: float = 1.0

    def __call__(self, z):
        x = (np.asarray(z, dtype=complex) - self.center) / self.scale
        out = np.zeros_like(x) + self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            out = out * x + c
        return out

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


def subcell_points(S: RasterSet) -> np.ndarray:
    """Four sub-cell centers per cell (a 2x refinement of ``S``)."""
    q = S.grid.spacing / 4
    off = np.array([-q - 1j * q, q - 1j * q, -q + 1j * q, q + 1j * q])
    return (S.points[:, None] + off[None, :]).ravel()


def _lstsq(M, y):
    return linalg.lstsq(M, y, lapack_driver="gelsy")[0]


def poly_approx(f: Callable, K: RasterSet, degree: int, boundary_weight: float = 4.0):
    """Least-squares polynomial of the given degree; error reported on sub-cell points."""
    if holes(K):
        raise HolesError("set has holes: polynomial approximation impossible in general")
    if K.is_empty:
        raise ValueError("empty set")
    degree = int(degree)
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must lie in [0, {MAX_DEGREE}]")
    z = K.points
    x0, x1 = z.real.min(), z.real.max()
    y0, y1 = z.imag.min(), z.imag.max()
    center = complex(round((x0 + x1) / 2, 12), round((y0 + y1) / 2, 12))
    scale = float(np.abs(z - center).max()) or 1.0
    w = np.where(K.boundary().mask[K.mask], boundary_weight, 1.0)
    V = np.vander((z - center) / scale, degree + 1, increasing=True)
    cn = np.linalg.norm(V, axis=0)
    c = _lstsq((V / cn) * w[:, None], np.asarray(f(z), dtype=complex) * w) / cn
    p = Polynomial(c, center, scale)
    zz = subcell_points(K)
    err = float(np.abs(p(zz) - f(zz)).max())
    return p, ApproxReport(err, degree, "poly-lstsq")


# --------------------------------------------------------------------------
# rational CP1 fitting


def chordal_residual(N, D, F) -> np.ndarray:
    F = normalize(F)
    return np.abs(N * F[..., 1] - D * F[..., 0]) / np.sqrt(np.abs(N) ** 2 + np.abs(D) ** 2)


def _basis(x, deg, poles):
    cols = [x ** k for k in range(deg + 1)]
    cols += [1.0 / (x - q) for q in poles]
    return np.stack(cols, axis=-1)


def _fit(x, F, deg, poles, sk_iters=3):
    """Homogeneous least squares for ``[N : D]`` with Sanathanan-Koerner reweighting."""
    Phi = _basis(x, deg, poles)
    cn = np.linalg.norm(Phi, axis=0)
    cn[cn == 0] = 1
    Phi = Phi / cn
    w = np.ones(len(x))
    for _ in range(sk_iters):
        M = np.hstack([(w * F[:, 1])[:, None] * Phi, -(w * F[:, 0])[:, None] * Phi])
        _, _, Vh = np.linalg.svd(M, full_matrices=False)
        v = np.conj(Vh[-1])
        m = Phi.shape[1]
        a, b = v[:m], v[m:]
        N, D = Phi @ a, Phi @ b
        w = 1.0 / np.maximum(np.sqrt(np.abs(N) ** 2 + np.abs(D) ** 2), 1e-300)
        w /= w.max()
    return a / cn, b / cn


def _fit_chart(x, F, deg, poles):
    """Least squares with ``D = 1``: ``N`` fits the chart value, weighted by ``|F1|``.

    A fallback for targets far from rational, where the homogeneous problem
    can settle on ``N`` and ``D`` sharing a zero inside the set.
    """
    Phi = _basis(x, deg, poles)
    cn = np.linalg.norm(Phi, axis=0)
    cn[cn == 0] = 1
    a = _lstsq((Phi / cn) * F[:, 1:2], F[:, 0]) / cn
    b = np.zeros_like(a)
    b[0] = 1.0
    return a, b


def _eval_fit(x, deg, poles, a, b):
    Phi = _basis(x, deg, poles)
    return Phi @ a, Phi @ b


def _expand(deg, poles, a, b, scale):
    """Partial-fraction form to polynomial ``N/D`` coefficients (ascending, in x)."""
    P = np.poly1d([1.0 + 0j])
    for q in poles:
        P = P * np.poly1d([1.0, -q])

    def one(c):
        out = np.poly1d(c[:deg + 1][::-1]) * P
        for j, q in enumerate(poles):
            rest = np.poly1d([1.0 + 0j])
            for l, ql in enumerate(poles):
                if l != j:
                    rest = rest * np.poly1d([1.0, -ql])
            out = out + c[deg + 1 + j] * rest
        return np.asarray(out.coeffs)[::-1]

    return RationalMap(one(a), one(b), scale)


def _refit_numerator(x, F, R: RationalMap, ndeg: int) -> RationalMap:
    """Keep the denominator of ``R`` and solve the weighted linear problem for the numerator."""
    D = np.polynomial.polynomial.polyval(x, R.den)
    V = np.vander(x, ndeg + 1, increasing=True)
    cn = np.linalg.norm(V, axis=0)
    cn[cn == 0] = 1
    N0 = np.polynomial.polynomial.polyval(x, R.num)
    w = 1.0 / np.sqrt(np.abs(N0) ** 2 + np.abs(D) ** 2)
    # minimize |N f1 - D f0| with D fixed
    a = _lstsq((V / cn) * (w * F[:, 1])[:, None], w * D * F[:, 0]) / cn
    return RationalMap(a, R.den, R.scale)


def _clean_doublets(R, err, gap, x_fit, F_fit, S, F_all, target, rounds: int = 4):
    """Cancel close pole-zero pairs and refit the numerator, keeping results within target."""
    total = 0
    for _ in range(rounds):
        R2, n = R.without_doublets(gap)
        if not n:
            break
        best = None
        for k in range(len(R.num) - 1, len(R.num) + 2 * n):
            cand = _refit_numerator(x_fit, F_fit, R2, k)
            e = float(dist_cp1(cand.on(S), F_all).max())
            clean = cand.without_doublets(gap)[1] == 0
            key = (not clean, e)
            if best is None or key < best[0]:
                best = (key, cand, e)
        (_, e2), cand, e2 = best[0], best[1], best[2]
        if e2 > max(target, err):
            break
        R, err, total = cand, e2, total + n
    return R, err, total


def _pole_candidate(worst: complex, forbidden: RasterSet, scale: float, R: float) -> complex:
    """Nearest admissible pole location to ``worst`` (grid cell off ``forbidden``, else beyond the window)."""
    free = ~forbidden.mask
    free[0, :] = free[-1, :] = free[:, 0] = free[:, -1] = False
    if free.any():
        pts = forbidden.grid.points[free]
        return complex(pts[np.argmin(np.abs(pts - worst))])
    d = worst if abs(worst) > 0 else 1.0
    return d / abs(d) * (R + forbidden.grid.spacing)


def rational_approx_cp1(f: CP1Map | np.ndarray, S: RasterSet, max_degree: int = 40,
                        target_error: float = 1e-6, max_points: int = 6000,
                        rng: np.random.Generator | None = None, pole_margin_cells: int = 2,
                        poles_allowed: bool = True, doublet_gap: float | None = None):
    """Rational map ``[N : D]`` fitting ``f`` on ``S`` in the chordal metric.

    Each greedy round tries the next monomial and a new simple pole at the
    admissible location nearest to the current worst point (outside a
    dilation of ``hull(S)``), keeping whichever lowers the sup error more.
    Pole-zero pairs closer than ``doublet_gap`` (default two cells) are
    cancelled when this keeps the error within target; such pairs carry no
    information on ``S`` but create features the grid cannot resolve.
    Returns the best map found and its report; warns when ``target_error`` is
    not reached within ``max_degree``.
    """
    if S.is_empty:
        raise ValueError("empty set")
    F_all = normalize(f.on(S) if isinstance(f, CP1Map) else f)
    z_all = S.points
    grid = S.grid
    scale = float(np.abs(z_all).max()) or 1.0
    idx = np.arange(len(z_all))
    if len(idx) > max_points:
        rng = rng or np.random.default_rng(0)
        bnd = np.flatnonzero(S.boundary().mask[S.mask])
        rest = np.setdiff1d(idx, bnd)
        k = max(max_points - len(bnd), max_points // 2)
        pick = rng.choice(rest, size=min(k, len(rest)), replace=False)
        idx = np.union1d(bnd[:max_points], pick)
    x_fit, F_fit = z_all[idx] / scale, F_all[idx]
    x_all = z_all / scale
    forbidden = hull(S).dilate(pole_margin_cells)

    def sup_err(deg, poles, ab):
        N, D = _eval_fit(x_all, deg, poles, *ab)
        e = chordal_residual(N, D, F_all)
        return float(e.max()), e

    def fit(deg, poles):
        out = []
        for ab in (_fit(x_fit, F_fit, deg, poles), _fit_chart(x_fit, F_fit, deg, poles)):
            out.append((sup_err(deg, poles, ab), ab))
        return min(out, key=lambda c: c[0][0])

    deg, poles = 1, []
    (err, e), ab = fit(deg, poles)
    best = (err, deg, list(poles), ab)
    history = [(1, err)]
    while err > target_error and deg + len(poles) < max_degree:
        cands = []
        if deg + 1 <= MAX_DEGREE:
            r1, ab1 = fit(deg + 1, poles)
            cands.append((r1, deg + 1, poles, ab1))
        if poles_allowed:
            worst = complex(z_all[int(np.argmax(e))])
            q = _pole_candidate(worst, forbidden, scale, grid.window_radius) / scale
            if all(abs(q - p) > 1e-9 for p in poles):
                pl = poles + [q]
                r2, ab2 = fit(deg, pl)
                cands.append((r2, deg, pl, ab2))
        if not cands:
            break
        (err, e), deg, poles, ab = min(cands, key=lambda c: c[0][0])
        history.append((deg + len(poles), err))
        if err < best[0]:
            best = (err, deg, list(poles), ab)
    err, deg, poles, ab = best
    R = _expand(deg, poles, ab[0], ab[1], scale)
    final = float(dist_cp1(R.on(S), F_all).max())
    # deflating near-common roots is ill-conditioned at high degree: keep it only if harmless
    Rc = R.cancel_common_roots()
    if Rc.degree < R.degree:
        ec = float(dist_cp1(Rc.on(S), F_all).max())
        if ec <= max(target_error, final):
            R, final = Rc, ec
    gap = 2 * grid.spacing if doublet_gap is None else doublet_gap
    R, final, n_removed = _clean_doublets(R, final, gap, x_fit, F_fit, S, F_all, target_error)
    rep = ApproxReport(final, R.degree, "rational-greedy", history,
                       {"poles": np.asarray(poles) * scale, "n_fit_points": len(idx),
                        "doublets_removed": n_removed})
    if final > target_error:
        warnings.warn(f"target not reached at max_degree: {final:.3g} > {target_error:.3g}",
                      TargetNotReachedWarning, stacklevel=2)
    return R, rep


# --------------------------------------------------------------------------
# continuous gluing


@dataclass
class GlueReport:
    sup_dist_on_E: float
    homotopy_min_norm: float
    band_cells: int


def continuous_glue(f: CP1Map, g_values: np.ndarray, E: RasterSet, r: float = GLUE_RADIUS,
                    band_cells: int = 3, grid: GridSpec | None = None):
    """Continuous total map equal to ``g`` on ``E`` and to ``f`` away from a band around ``E``.

    Works in the unit-sphere embedding.  The displacement ``g - f`` on ``E``
    is extended by nearest points, added to ``f`` and retracted by
    normalization to a target ``T``; the output is the retraction of
    ``(1 - lam) f + lam T`` with ``lam = chi * psi``.  ``chi`` falls from 1 on
    ``E`` to 0 at ``band_cells`` cells, ``psi`` switches the blend off where
    ``T`` drifts to distance ``r`` from ``f``.
    """
    grid = grid or E.grid
    Fv = f.on_grid(grid)
    g_values = np.asarray(g_values, dtype=complex)
    if g_values.shape != (E.count, 2):
        raise ValueError("g must hold one value per cell of E")
    if not np.allclose(np.linalg.norm(g_values, axis=-1), 1, rtol=0, atol=1e-14):
        g_values = normalize(g_values)
    if E.is_empty:
        return SampledMap(grid, Fv), GlueReport(0.0, 1.0, band_cells)
    dE = dist_cp1(Fv[E.mask], g_values)
    m = float(dE.max())
    if m >= r:
        k = int(np.argmax(dE))
        raise ValueError(f"maps too far apart: dist {m:.3g} >= r = {r} at z = {E.points[k]:.4g}")
    XF = to_sphere(Fv)
    delta = np.zeros(grid.shape + (3,))
    delta[E.mask] = to_sphere(g_values) - XF[E.mask]
    dist, (ri, ci) = distance_transform_edt(~E.mask, return_indices=True)
    delta = delta[ri, ci]
    chi = np.clip(1 - dist / band_cells, 0, 1)
    moved = chi * np.any(delta != 0, axis=-1) > 0
    T = XF.copy()
    T[moved] = XF[moved] + delta[moved]
    T[moved] /= np.linalg.norm(T[moved], axis=-1, keepdims=True)
    dft = np.linalg.norm(T - XF, axis=-1) / 2
    psi = np.clip((r - dft) / max(r - m, 1e-15), 0, 1)
    lam = chi * psi * moved
    blend = lam[..., None] * T + (1 - lam[..., None]) * XF
    out = Fv.copy()
    act = lam > 0
    out[act] = from_sphere(blend[act])
    out[E.mask] = g_values
    # straight-line homotopy from f to the output inside R^3
    Xo = to_sphere(out)
    XF = to_sphere(Fv)
    ts = np.linspace(0, 1, 11)
    hmin = min(float(np.linalg.norm((1 - t) * XF + t * Xo, axis=-1).min()) for t in ts)
    if hmin < 1 - r:
        raise ValueError(f"homotopy leaves the tubular neighbourhood (min norm {hmin:.3g})")
    return SampledMap(grid, out), GlueReport(m, hmin, band_cells)


# --------------------------------------------------------------------------
# avoidance


def avoid_set(F: RationalMap, M: Sequence, ball_radius: float, grid: GridSpec, c1: float,
              rng: np.random.Generator | None = None, max_draws: int = 20,
              min_dist: float = 1e-12):
    """Mobius post-composition ``exp(t) . F`` whose grid values keep away from ``M``.

    ``t = 0`` is tried first, then up to ``max_draws`` random ``t`` in the
    ball of radius ``ball_radius``.  Avoidance is certified on the grid only:
    a value within ``min_dist`` of ``M`` counts as a hit (rounding floor).
    """
    if ball_radius > 1.0:
        raise ValueError("ball_radius must not exceed c0 = 1")
    rng = rng or np.random.default_rng(0)
    Mh = normalize(np.asarray([np.asarray(getattr(m, "hom", m)) for m in M], dtype=complex))
    Z = grid.points
    F0 = F.hom(Z)
    draws = [np.zeros(3, complex)]
    for _ in range(max_draws):
        t = rng.normal(size=3) + 1j * rng.normal(size=3)
        draws.append(t / np.linalg.norm(t) * ball_radius * rng.uniform() ** (1 / 6))
    for k, t in enumerate(draws):
        Ft = F.compose_mobius(exp_sl2(t)) if np.any(t) else F
        V = Ft.hom(Z)
        dmin = min(float(dist_cp1(V, m).min()) for m in Mh)
        disp = float(dist_cp1(V, F0).max())
        tn = float(np.linalg.norm(t))
        if dmin > min_dist and disp <= c1 * tn + 1e-15:
            R = grid.window_radius
            pre = [int(np.sum((np.abs(p.real) <= R) & (np.abs(p.imag) <= R))) for p in
                   (Ft.preimages(m) for m in Mh)]
            return Ft, ApproxReport(disp, Ft.degree, "avoid-mobius", [],
                                    {"t": t, "draws": k, "grid_min_dist": dmin,
                                     "preimages_in_window": pre})
    raise AvoidanceError(f"no avoiding perturbation found after {max_draws} draws")
