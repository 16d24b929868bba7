"""Independent reference computations used by the tests.

None of these call into the package: plain BFS, 1-D quadrature of
ray integrals, truncated series and scipy's general-purpose routines.
"""

from collections import deque

import numpy as np
from scipy import integrate


def bfs_components(free: np.ndarray):
    """4-connected components of ``free`` as (size, touches_edge) pairs."""
    seen = np.zeros_like(free, dtype=bool)
    n, m = free.shape
    out = []
    for si in range(n):
        for sj in range(m):
            if not free[si, sj] or seen[si, sj]:
                continue
            size, edge = 0, False
            q = deque([(si, sj)])
            seen[si, sj] = True
            while q:
                i, j = q.popleft()
                size += 1
                if i in (0, n - 1) or j in (0, m - 1):
                    edge = True
                for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
                    if 0 <= a < n and 0 <= b < m and free[a, b] and not seen[a, b]:
                        seen[a, b] = True
                        q.append((a, b))
            out.append((size, edge))
    return out


def bfs_hole_count(mask: np.ndarray) -> int:
    return sum(1 for _, edge in bfs_components(~mask) if not edge)


def bfs_hull(mask: np.ndarray) -> np.ndarray:
    """Mask plus every complement cell not reachable from the window edge."""
    free = ~mask
    reach = np.zeros_like(free)
    n, m = free.shape
    q = deque()
    for i in range(n):
        for j in (0, m - 1):
            if free[i, j] and not reach[i, j]:
                reach[i, j] = True
                q.append((i, j))
    for j in range(m):
        for i in (0, n - 1):
            if free[i, j] and not reach[i, j]:
                reach[i, j] = True
                q.append((i, j))
    while q:
        i, j = q.popleft()
        for a, b in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)):
            if 0 <= a < n and 0 <= b < m and free[a, b] and not reach[a, b]:
                reach[a, b] = True
                q.append((a, b))
    return ~reach


def disc_transform_ray(z: complex, radius: float = 1.0) -> complex:
    """``(1/pi) int_{|zeta|<=radius} dA/(z - zeta)`` by rays from ``z``.

    With ``zeta = z + rho e^{i phi}`` the integrand times ``rho`` is the
    bounded ``-e^{-i phi}``, so the area integral reduces to a 1-D integral of
    the chord length of each ray inside the disc.
    """

    def chord(phi):
        b = (np.conj(z) * np.exp(1j * phi)).real
        disc = b * b + radius ** 2 - abs(z) ** 2
        if disc <= 0:
            return 0.0
        r1, r2 = -b - np.sqrt(disc), -b + np.sqrt(disc)
        return max(r2, 0.0) - max(r1, 0.0)

    if abs(z) > radius:
        # only rays within asin(radius/|z|) of the direction to the centre meet the disc
        c = np.angle(-z)
        w = np.arcsin(radius / abs(z))
        lo, hi = c - w, c + w
    else:
        lo, hi = 0.0, 2 * np.pi
    re = integrate.quad(lambda p: -np.cos(p) * chord(p), lo, hi, limit=400, epsabs=1e-13)[0]
    im = integrate.quad(lambda p: np.sin(p) * chord(p), lo, hi, limit=400, epsabs=1e-13)[0]
    return (re + 1j * im) / np.pi


def disc_transform_closed(z, radius: float = 1.0):
    """Closed form for ``g = 1`` on a centred disc: conj(z) inside, radius^2/z outside."""
    z = np.asarray(z, dtype=complex)
    safe = np.where(z == 0, 1, z)
    return np.where(np.abs(z) <= radius, np.conj(z), radius ** 2 / safe)


def cell_integral_dblquad(d: complex, h: float) -> complex:
    """``int_cell dA/(d - zeta)`` over the square cell of side ``h`` centred at 0."""
    re = integrate.dblquad(lambda y, x: (1 / (d - (x + 1j * y))).real, -h / 2, h / 2, -h / 2, h / 2,
                           epsabs=1e-13)[0]
    im = integrate.dblquad(lambda y, x: (1 / (d - (x + 1j * y))).imag, -h / 2, h / 2, -h / 2, h / 2,
                           epsabs=1e-13)[0]
    return re + 1j * im


def geometric_tail_bound(n: int, p: float = 2.0, samples: int = 4000) -> float:
    """``sup_{|z|<=1} |z/p|^{n+1} / |p - z|``: the error of the degree-n Taylor sum of 1/(p - z)."""
    z = np.exp(2j * np.pi * np.arange(samples) / samples)
    return float(np.max(np.abs(z / p) ** (n + 1) / np.abs(p - z)))


def mobius(A, u):
    """Action of a 2x2 matrix on a chart coordinate."""
    return (A[0, 0] * u + A[0, 1]) / (A[1, 0] * u + A[1, 1])


def chordal(u, v):
    """Chordal distance between chart coordinates (finite values)."""
    return np.abs(u - v) / np.sqrt((1 + np.abs(u) ** 2) * (1 + np.abs(v) ** 2))
