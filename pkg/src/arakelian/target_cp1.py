"""The Riemann sphere as a homogeneous space of SL(2, C).

Points are stored as normalized homogeneous pairs ``(z0, z1)`` with chart
coordinate ``u = z0 / z1`` (so ``[0:1]`` is ``u = 0`` and ``[1:0]`` is
``u = inf``).  Vectorized helpers act on arrays of shape ``(..., 2)``.

Lie algebra vectors ``t = (t1, t2, t3)`` use the basis
``e = [[0,1],[0,0]]``, ``h = diag(1,-1)``, ``f = [[0,0],[1,0]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CHART_ZERO = "0"
CHART_INF = "inf"

BASIS = (
    np.array([[0, 1], [0, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
    np.array([[0, 0], [1, 0]], dtype=complex),
)

_SERIES_Q = 1e-3


class ChartMismatchError(ValueError):
    pass


# --------------------------------------------------------------------------
# points


def normalize(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=complex)
    n = np.sqrt(np.abs(Y[..., 0]) ** 2 + np.abs(Y[..., 1]) ** 2)
    if np.any(n == 0):
        raise ValueError("(0, 0) is not a point of CP1")
    return Y / n[..., None]


def from_chart(u) -> np.ndarray:
    """Homogeneous coordinates of chart points; ``inf`` maps to ``[1:0]``."""
    u = np.asarray(u, dtype=complex)
    inf = ~np.isfinite(u)
    uu = np.where(inf, 0, u)
    z0 = np.where(inf, 1.0, uu)
    z1 = np.where(inf, 0.0, 1.0)
    return normalize(np.stack([z0, z1], axis=-1))


def to_chart(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(Y[..., 1] != 0, Y[..., 0] / np.where(Y[..., 1] != 0, Y[..., 1], 1), np.inf)


def dist_cp1(P, Q) -> np.ndarray:
    """Chordal distance ``|p0 q1 - p1 q0|`` of normalized representatives, in [0, 1]."""
    P, Q = normalize(P), normalize(Q)
    return np.minimum(np.abs(P[..., 0] * Q[..., 1] - P[..., 1] * Q[..., 0]), 1.0)


def to_sphere(Y) -> np.ndarray:
    """Unit-sphere embedding; chord length equals ``2 * dist_cp1``."""
    Y = normalize(Y)
    w = 2 * Y[..., 0] * np.conj(Y[..., 1])
    Z = np.abs(Y[..., 0]) ** 2 - np.abs(Y[..., 1]) ** 2
    return np.stack([w.real, w.imag, Z], axis=-1)


def from_sphere(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = np.linalg.norm(X, axis=-1)
    if np.any(n == 0):
        raise ValueError("zero vector has no direction")
    X = X / n[..., None]
    w = X[..., 0] + 1j * X[..., 1]
    Z = X[..., 2]
    south = Z <= 0
    a = np.sqrt(np.maximum((1 - Z) / 2, 0))
    b = np.sqrt(np.maximum((1 + Z) / 2, 0))
    z1_s = a
    z0_s = w / (2 * np.where(south, a, 1))
    z0_n = b
    z1_n = np.conj(w) / (2 * np.where(south, 1, b))
    z0 = np.where(south, z0_s, z0_n)
    z1 = np.where(south, z1_s, z1_n)
    return normalize(np.stack([z0, z1], axis=-1))


def chart_of(Y) -> np.ndarray:
    """Preferred chart per point: ``'0'`` when ``|u| <= 1``, else ``'inf'``."""
    Y = np.asarray(Y, dtype=complex)
    return np.where(np.abs(Y[..., 0]) <= np.abs(Y[..., 1]), CHART_ZERO, CHART_INF)


def act(A, Y) -> np.ndarray:
    """Projective action of 2x2 matrices on homogeneous points (broadcast)."""
    A = np.asarray(A, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    return normalize(np.einsum("...ij,...j->...i", A, Y))


@dataclass(frozen=True)
class CP1Point:
    z0: complex
    z1: complex

    def __post_init__(self):
        v = normalize(np.array([self.z0, self.z1], dtype=complex))
        object.__setattr__(self, "z0", complex(v[0]))
        object.__setattr__(self, "z1", complex(v[1]))

    @classmethod
    def chart(cls, u) -> "CP1Point":
        v = from_chart(u)
        return cls(v[0], v[1])

    @classmethod
    def infinity(cls) -> "CP1Point":
        return cls(1, 0)

    @property
    def hom(self) -> np.ndarray:
        return np.array([self.z0, self.z1])

    @property
    def u(self) -> complex:
        return complex(to_chart(self.hom))

    def dist(self, other: "CP1Point") -> float:
        return float(dist_cp1(self.hom, other.hom))


# --------------------------------------------------------------------------
# Lie algebra and exponential


def lie_matrix(t) -> np.ndarray:
    t = np.asarray(t, dtype=complex)
    M = np.empty(t.shape[:-1] + (2, 2), dtype=complex)
    M[..., 0, 0] = t[..., 1]
    M[..., 0, 1] = t[..., 0]
    M[..., 1, 0] = t[..., 2]
    M[..., 1, 1] = -t[..., 1]
    return M


def _q(t):
    return t[..., 1] ** 2 + t[..., 0] * t[..., 2]


def exp_coeffs(q):
    """``C = cosh(sqrt q)``, ``S = sinh(sqrt q)/sqrt q`` and ``dS/dq``."""
    q = np.asarray(q, dtype=complex)
    small = np.abs(q) < _SERIES_Q
    qs = np.where(small, q, 0)
    C_ser = 1 + qs / 2 + qs ** 2 / 24 + qs ** 3 / 720
    S_ser = 1 + qs / 6 + qs ** 2 / 120 + qs ** 3 / 5040
    Sp_ser = 1 / 6 + qs / 60 + qs ** 2 / 1680 + qs ** 3 / 90720
    ql = np.where(small, 1, q)
    mu = np.sqrt(ql)
    C_l = np.cosh(mu)
    S_l = np.sinh(mu) / mu
    Sp_l = (C_l - S_l) / (2 * ql)
    return (np.where(small, C_ser, C_l), np.where(small, S_ser, S_l),
            np.where(small, Sp_ser, Sp_l))


def exp_sl2(t) -> np.ndarray:
    """``exp(M) = cosh(mu) I + sinhc(mu) M`` with ``mu^2 = t2^2 + t1 t3``."""
    t = np.asarray(t, dtype=complex)
    C, S, _ = exp_coeffs(_q(t))
    M = lie_matrix(t)
    out = S[..., None, None] * M
    out[..., 0, 0] += C
    out[..., 1, 1] += C
    return out


def exp_sl2_directional(t, delta):
    """``exp(t)`` and its derivative along ``delta``."""
    t = np.asarray(t, dtype=complex)
    delta = np.asarray(delta, dtype=complex)
    q = _q(t)
    C, S, Sp = exp_coeffs(q)
    dq = 2 * t[..., 1] * delta[..., 1] + delta[..., 0] * t[..., 2] + t[..., 0] * delta[..., 2]
    M, E = lie_matrix(t), lie_matrix(delta)
    Cp = S / 2
    E_out = (Sp * dq)[..., None, None] * M + S[..., None, None] * E
    E_out[..., 0, 0] += Cp * dq
    E_out[..., 1, 1] += Cp * dq
    X = S[..., None, None] * M
    X[..., 0, 0] += C
    X[..., 1, 1] += C
    return X, E_out


def spray_eval(Y, t) -> np.ndarray:
    """``s(y, t) = exp(t) . y``."""
    return act(exp_sl2(t), Y)


# --------------------------------------------------------------------------
# vertical derivative and complement


def vertical_coeffs(Y, chart: str | None = None) -> np.ndarray:
    """Coefficient vector of ``Ds(y)`` in the given chart (default: preferred)."""
    Y = normalize(Y)
    if chart is None:
        chart = chart_of(Y)
    chart = np.broadcast_to(np.asarray(chart), Y.shape[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(chart == CHART_ZERO, Y[..., 0] / np.where(Y[..., 1] != 0, Y[..., 1], 1), 0)
        v = np.where(chart == CHART_INF, Y[..., 1] / np.where(Y[..., 0] != 0, Y[..., 0], 1), 0)
    bad = ((chart == CHART_ZERO) & (Y[..., 1] == 0)) | ((chart == CHART_INF) & (Y[..., 0] == 0))
    if np.any(bad):
        raise ChartMismatchError("point not in the requested chart")
    c0 = np.stack([np.ones_like(u), 2 * u, -u * u], axis=-1)
    ci = np.stack([-v * v, -2 * v, np.ones_like(v)], axis=-1)
    return np.where((chart == CHART_ZERO)[..., None], c0, ci)


def vertical_derivative(Y, t, chart: str | None = None) -> np.ndarray:
    """``Ds(y)(t)``: ``t1 + 2 t2 u - t3 u^2`` in chart 0, ``t3 - 2 t2 v - t1 v^2`` at inf."""
    return np.sum(vertical_coeffs(Y, chart) * np.asarray(t, dtype=complex), axis=-1)


@dataclass(frozen=True)
class ChartComplement:
    chart: str = CHART_ZERO

    def __post_init__(self):
        if self.chart not in (CHART_ZERO, CHART_INF):
            raise ValueError(f"unknown chart {self.chart!r}")

    @property
    def direction(self) -> np.ndarray:
        return np.array([1, 0, 0] if self.chart == CHART_ZERO else [0, 0, 1], dtype=complex)

    def coordinate(self, Y) -> np.ndarray:
        Y = normalize(Y)
        num, den = (Y[..., 0], Y[..., 1]) if self.chart == CHART_ZERO else (Y[..., 1], Y[..., 0])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den != 0, num / np.where(den != 0, den, 1), np.inf)


def decompose(t, Y, c: ChartComplement = ChartComplement()):
    """Split ``t = t' + t''`` with ``Ds(y) t' = 0`` and ``t''`` along the complement direction."""
    coord = c.coordinate(Y)
    if np.any(~(np.abs(coord) <= 1 + 1e-12)):
        raise ChartMismatchError(f"point outside chart {c.chart} (|coordinate| > 1)")
    t = np.asarray(t, dtype=complex)
    # Ds(y)(direction) = 1 in its own chart, so the coefficient is Ds(y)(t)
    lam = vertical_derivative(Y, t, chart=c.chart)
    t2 = lam[..., None] * c.direction
    return t - t2, t2


# --------------------------------------------------------------------------
# spray constants and flexibility


def _sample_points(n: int) -> np.ndarray:
    """Fibonacci lattice on the sphere, mapped to CP1."""
    k = np.arange(n) + 0.5
    Z = 1 - 2 * k / n
    phi = math.pi * (1 + 5 ** 0.5) * k
    r = np.sqrt(1 - Z * Z)
    return from_sphere(np.stack([r * np.cos(phi), r * np.sin(phi), Z], axis=-1))


def estimate_constants(n_points: int = 400, n_dirs: int = 16, n_mags: int = 12,
                       seed: int = 0, inflate: float = 1.1) -> tuple[float, float]:
    """``(c0, c1)`` with ``dist(y, s(y,t)) <= c1 |t|`` for ``|t| <= c0``.

    The sample uses a sphere lattice of points, random unit directions plus
    the steepest direction ``conj(Ds(y))`` at each point, and log-spaced
    magnitudes in ``[1e-3, c0]``.
    """
    c0 = 1.0
    rng = np.random.default_rng(seed)
    Y = _sample_points(n_points)
    dirs = rng.normal(size=(n_points, n_dirs, 3)) + 1j * rng.normal(size=(n_points, n_dirs, 3))
    steep = np.conj(vertical_coeffs(Y))
    dirs = np.concatenate([dirs, steep[:, None, :]], axis=1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    mags = np.geomspace(1e-3, c0, n_mags)
    T = dirs[:, :, None, :] * mags[None, None, :, None]
    S = spray_eval(Y[:, None, None, :], T)
    ratio = dist_cp1(Y[:, None, None, :], S) / mags[None, None, :]
    return c0, float(ratio.max()) * inflate


def flexibility_check(sections: Sequence, sample) -> bool:
    """True iff the fields ``y -> Ds(y) xi_j`` span the tangent line at every sample point."""
    if len(sections) == 0:
        return False
    Y = normalize(np.atleast_2d(np.asarray(sample, dtype=complex)))
    xi = np.asarray(sections, dtype=complex)
    V = np.stack([vertical_derivative(Y, x) for x in xi], axis=-1)
    return bool(np.all(np.any(np.abs(V) > 1e-14, axis=-1)))


@dataclass(frozen=True)
class Spray:
    c0: float
    c1: float
    basis: tuple = field(default=BASIS, repr=False)

    @classmethod
    def default(cls, **kw) -> "Spray":
        c0, c1 = estimate_constants(**kw)
        return cls(c0, c1)

    def __call__(self, Y, t):
        return spray_eval(Y, t)

    def verify(self, n_points: int = 200, seed: int = 1) -> float:
        """Largest observed ``dist / (c1 |t|)`` on a fresh random sample (should be <= 1)."""
        rng = np.random.default_rng(seed)
        Y = normalize(rng.normal(size=(n_points, 2)) + 1j * rng.normal(size=(n_points, 2)))
        t = rng.normal(size=(n_points, 3)) + 1j * rng.normal(size=(n_points, 3))
        t *= (rng.uniform(1e-3, self.c0, size=n_points) / np.linalg.norm(t, axis=-1))[:, None]
        r = dist_cp1(Y, spray_eval(Y, t)) / (self.c1 * np.linalg.norm(t, axis=-1))
        return float(r.max())
