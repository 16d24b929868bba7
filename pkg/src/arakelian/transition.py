"""Transition map ``G``, the fibre map ``gamma`` and its nonlinear splitting.

``G(y1, y2, t)`` solves ``exp(t) . y1 = exp(G) . y2`` with ``G = t' + lam * d``
where ``t'`` is the ``Ds(y2)``-kernel part of ``t`` and ``d`` is the chart
complement direction at ``y2``.  ``lam`` is found by Newton iteration on the
homogeneous cross product, using the closed-form derivative of ``exp``.

``split_gamma`` solves ``gamma o alpha = beta`` on ``K x r0 W`` by Picard
iteration on the additive split: with ``gamma(z,w) = (z, g(z,w))`` and
``alpha = w + p``, ``beta = w + q`` one needs ``p - q = (w + p) - g(w + p)``
on ``K``; each round splits the right side with the Cousin operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cauchy_green import ParamField
from .cousin import CousinOperator
from .planar_sets import CartanPair, RasterSet
from .target_cp1 import (
    CHART_ZERO,
    chart_of,
    dist_cp1,
    exp_sl2,
    exp_sl2_directional,
    normalize,
    spray_eval,
    vertical_coeffs,
)

_E_DIR = np.array([1, 0, 0], dtype=complex)
_F_DIR = np.array([0, 0, 1], dtype=complex)


class NewtonDivergenceError(RuntimeError):
    pass


class PointsTooFarError(ValueError):
    pass


class SplittingError(ValueError):
    """Raised when the Picard splitting cannot contract."""


@dataclass(frozen=True)
class TransitionMap:
    tolerance: float = 1e-12
    max_newton_iters: int = 50
    delta_G: float = 0.25
    c0: float = 1.0
    chart: str | None = None  # None: preferred chart of y2 per point

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def __call__(self, Y1, Y2, T):
        return solve_G(Y1, Y2, T, self)


def _residual(tp, lam, dirs, Y2, P):
    tau = tp + lam[..., None] * dirs
    X, E = exp_sl2_directional(tau, dirs)
    w = np.einsum("...ij,...j->...i", X, Y2)
    dw = np.einsum("...ij,...j->...i", E, Y2)
    F = w[..., 0] * P[..., 1] - w[..., 1] * P[..., 0]
    dF = dw[..., 0] * P[..., 1] - dw[..., 1] * P[..., 0]
    nw = np.sqrt(np.abs(w[..., 0]) ** 2 + np.abs(w[..., 1]) ** 2)
    return F, dF, np.abs(F) / nw


def solve_G(Y1, Y2, T, cfg: TransitionMap | None = None) -> np.ndarray:
    """Vectorized ``G(y1, y2, t)``; arrays broadcast over leading axes."""
    cfg = cfg or TransitionMap()
    Y1, Y2 = normalize(Y1), normalize(Y2)
    T = np.asarray(T, dtype=complex)
    shape = np.broadcast_shapes(Y1.shape[:-1], Y2.shape[:-1], T.shape[:-1])
    Y1 = np.broadcast_to(Y1, shape + (2,))
    Y2 = np.broadcast_to(Y2, shape + (2,))
    T = np.broadcast_to(T, shape + (3,))

    d12 = dist_cp1(Y1, Y2)
    if np.any(d12 >= cfg.delta_G):
        idx = np.unravel_index(int(np.argmax(d12)), shape) if shape else ()
        raise PointsTooFarError(f"points too far: dist {float(d12.max()):.3g} >= {cfg.delta_G} at {idx}")
    tn = np.linalg.norm(T, axis=-1)
    if np.any(tn >= cfg.c0):
        raise ValueError(f"|t| = {float(tn.max()):.3g} not below c0 = {cfg.c0}")

    chart = chart_of(Y2) if cfg.chart is None else np.broadcast_to(np.asarray(cfg.chart), shape)
    dirs = np.where((chart == CHART_ZERO)[..., None], _E_DIR, _F_DIR)
    lam0 = np.sum(vertical_coeffs(Y2, chart) * T, axis=-1)
    tp = T - lam0[..., None] * dirs
    P = normalize(np.einsum("...ij,...j->...i", exp_sl2(T), Y1))

    lam = lam0.copy()
    F, dF, res = _residual(tp, lam, dirs, Y2, P)
    exact = res <= cfg.tolerance
    done = exact.copy()
    polished = np.zeros(shape, dtype=bool)
    for _ in range(cfg.max_newton_iters):
        act = ~polished
        if not act.any():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(act & (dF != 0), F / np.where(dF != 0, dF, 1), 0)
        new = lam - step
        F2, dF2, res2 = _residual(tp, new, dirs, Y2, P)
        for _ in range(10):
            worse = act & ~done & (res2 > res)
            if not worse.any():
                break
            step = np.where(worse, step / 2, step)
            new = np.where(worse, lam - step, new)
            F2, dF2, res2 = _residual(tp, new, dirs, Y2, P)
        # polishing steps are accepted only if not worse
        keep = act & (~done | (res2 <= res))
        lam = np.where(keep, new, lam)
        F = np.where(keep, F2, F)
        dF = np.where(keep, dF2, dF)
        res = np.where(keep, res2, res)
        polished |= done & act
        done |= res <= cfg.tolerance
    if not np.all(done):
        raise NewtonDivergenceError(
            f"Newton divergence: residual {float(res[~done].max()):.3g} after {cfg.max_newton_iters} iterations")
    tau = tp + lam[..., None] * dirs
    return np.where(exact[..., None], T, tau)


def gtrans_residual(Y1, Y2, T, tau) -> np.ndarray:
    """``dist(s(y1, t), s(y2, tau))``."""
    return dist_cp1(spray_eval(Y1, T), spray_eval(Y2, tau))


# --------------------------------------------------------------------------
# gamma


def polydisc_sample(radius: float, n_angles: int = 3, scale: float = 1.0) -> np.ndarray:
    """Origin plus points on the distinguished boundary ``|w_k| = scale * radius``."""
    th = 2 * np.pi * (np.arange(n_angles) + 0.25) / n_angles
    rot = np.exp(1j * th)
    grid = np.stack(np.meshgrid(rot, rot, rot, indexing="ij"), axis=-1).reshape(-1, 3)
    return np.concatenate([np.zeros((1, 3), complex), scale * radius * grid])


@dataclass(eq=False)
class GammaMap:
    K: RasterSet
    radius: float
    f_prev: np.ndarray
    h: np.ndarray
    cfg: TransitionMap = field(default_factory=TransitionMap)
    dist_to_id: float = 0.0

    def g(self, w) -> np.ndarray:
        """Fibre component at parameters ``w`` of shape ``(..., nK, 3)`` or ``(3,)``."""
        return solve_G(self.f_prev, self.h, w, self.cfg)

    @property
    def field(self) -> ParamField:
        return ParamField(self.K, self.g, (self.radius,) * 3)

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.f_prev, self.h))

    def cr_residual_w(self, w, eps: float = 1e-4) -> float:
        """Largest Cauchy-Riemann defect in each ``w``-axis at one parameter point."""
        w = np.asarray(w, dtype=complex)
        out = 0.0
        for k in range(3):
            e = np.zeros(3, complex)
            e[k] = eps
            dx = (self.g(w + e) - self.g(w - e)) / (2 * eps)
            dy = (self.g(w + 1j * e) - self.g(w - 1j * e)) / (2 * eps)
            out = max(out, float(np.abs(dx + 1j * dy).max()) / 2)
        return out


def build_gamma(f_prev, h, K: RasterSet, radius: float = 0.5,
                cfg: TransitionMap | None = None, n_angles: int = 3) -> GammaMap:
    """``gamma(z, w) = (z, G(f_prev(z), h(z), w))`` on ``K x W``.

    ``f_prev`` and ``h`` are homogeneous values on the cells of ``K``.
    """
    cfg = cfg or TransitionMap()
    f_prev, h = normalize(f_prev), normalize(h)
    if f_prev.shape != (K.count, 2) or h.shape != (K.count, 2):
        raise ValueError("f_prev and h must hold one value per cell of K")
    if np.sqrt(3) * radius >= cfg.c0:
        raise ValueError("polydisc W must lie inside |t| < c0")
    d = dist_cp1(f_prev, h)
    if d.size and d.max() >= cfg.delta_G:
        k = int(np.argmax(d))
        raise PointsTooFarError(
            f"points too far at cell {k} (z = {K.points[k]:.4g}): dist {d[k]:.3g} >= {cfg.delta_G}")
    gm = GammaMap(K, radius, f_prev, h, cfg)
    if K.is_empty:
        return gm
    W = polydisc_sample(radius, n_angles, scale=0.999)
    G = gm.g(W[:, None, :])
    gm.dist_to_id = float(np.abs(G - W[:, None, :]).max())
    return gm


# --------------------------------------------------------------------------
# splitting


@dataclass(eq=False)
class SplitPair:
    a: ParamField
    b: ParamField
    composition_residual: float
    history: list
    delta: float
    r0: float

    @property
    def iterations(self) -> int:
        return len(self.history) - 1


def admissible_delta(op: CousinOperator, radius: float, r0: float) -> float:
    return (1 - r0) * radius / (4 * op.bound)


class _Picard:
    def __init__(self, gamma: GammaMap, op: CousinOperator, tol: float, max_iter: int):
        self.gamma, self.op, self.tol, self.max_iter = gamma, op, tol, max_iter
        self._cache: dict = {}

    def run(self, W: np.ndarray):
        """Split at a batch of parameters ``W`` ``(m, 3)``; returns (a on A, b on B, history, residual)."""
        key = W.tobytes()
        if key in self._cache:
            return self._cache[key]
        p = self.op.pair
        nK = p.K.count
        Wk = np.broadcast_to(W[:, None, :], (W.shape[0], nK, 3))
        pK = np.zeros_like(Wk)
        qK = np.zeros_like(Wk)
        a_A = np.broadcast_to(W[:, None, :], (W.shape[0], p.A.count, 3)).copy()
        b_B = np.broadcast_to(W[:, None, :], (W.shape[0], p.B.count, 3)).copy()
        G = self.gamma.g(Wk + pK)
        defect = float(np.abs(G - (Wk + qK)).max()) if nK else 0.0
        history = [defect]
        it = 0
        while defect > self.tol:
            if it >= self.max_iter:
                raise SplittingError(f"dist_to_id too large: splitting not contractive "
                                     f"(defect {defect:.3g} after {it} iterations)")
            d = (Wk + pK) - G
            a_full, b_full = self.op.full_grids(np.moveaxis(d, -1, -2))
            a_full = np.moveaxis(a_full, -3, -1)
            b_full = np.moveaxis(b_full, -3, -1)
            Kmask = p.K.mask
            pK = a_full[:, Kmask]
            qK = b_full[:, Kmask]
            a_A = W[:, None, :] + a_full[:, p.A.mask]
            b_B = W[:, None, :] + b_full[:, p.B.mask]
            if np.any(np.linalg.norm(Wk + pK, axis=-1) >= self.gamma.cfg.c0):
                raise SplittingError("dist_to_id too large: splitting not contractive (iterate left W)")
            G = self.gamma.g(Wk + pK)
            new = float(np.abs(G - (Wk + qK)).max())
            history.append(new)
            it += 1
            if new > 0.5 * defect and defect > 1e3 * self.tol:
                raise SplittingError(f"dist_to_id too large: splitting not contractive "
                                     f"(defect ratio {new / defect:.3g} at iteration {it})")
            if new >= defect and defect <= 1e3 * self.tol:
                break  # rounding floor
            defect = new
        out = (a_A, b_B, history, history[-1])
        self._cache[key] = out
        return out


def split_gamma(gamma: GammaMap, p: CartanPair, r0: float = 0.5, op: CousinOperator | None = None,
                tol: float = 1e-12, max_iter: int = 60, n_angles: int = 2,
                check_precondition: bool = True) -> SplitPair:
    """Maps ``a`` on ``A x r0 W`` and ``b`` on ``B x r0 W`` with ``g(z, a) = b`` on ``K``."""
    if not 0 < r0 < 1:
        raise ValueError("r0 must lie in (0, 1)")
    if gamma.K != p.K:
        raise ValueError("gamma must live on K of the pair")
    op = op or CousinOperator(p)
    delta = admissible_delta(op, gamma.radius, r0)
    if check_precondition and gamma.dist_to_id >= delta:
        raise SplittingError(f"dist_to_id too large: splitting not contractive "
                             f"(dist_to_id {gamma.dist_to_id:.3g} >= delta {delta:.3g})")
    pic = _Picard(gamma, op, tol, max_iter)
    rW = (r0 * gamma.radius,) * 3

    def _eval(w, which):
        w = np.asarray(w, dtype=complex)
        if np.any(np.abs(w) >= r0 * gamma.radius + 1e-12):
            raise ValueError(f"parameter {w} outside r0 W")
        out = pic.run(w.reshape(1, 3))
        return out[which][0]

    a = ParamField(p.A, lambda w: _eval(w, 0), rW)
    b = ParamField(p.B, lambda w: _eval(w, 1), rW)
    W = polydisc_sample(r0 * gamma.radius, n_angles, scale=0.999)
    _, _, hist, res_s = pic.run(W)
    _, _, _, res0 = pic.run(np.zeros((1, 3), complex))
    return SplitPair(a, b, max(res0, res_s), hist, delta, r0)
