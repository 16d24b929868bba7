"""Closed planar sets sampled on a square window.

Sets are described analytically (unions of discs, annuli, thickened lines,
rectangles) and rasterized onto a cell-centered grid.  Topological notions
(holes, hulls, bounded exhaustion hulls) are evaluated on the raster, with
"unbounded" meaning "touches the window boundary".

Connectivity convention: complements are labeled with 4-connectivity, sets
with 8-connectivity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy import ndimage

FOUR = ndimage.generate_binary_structure(2, 1)
EIGHT = ndimage.generate_binary_structure(2, 2)


class NotArakelianError(ValueError):
    pass


class WindowExhaustedError(ValueError):
    pass


class SeparationError(ValueError):
    pass


class BEHInconclusiveWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class GridSpec:
    """Square window ``[-R, R]^2`` split into ``n x n`` cells of side ``spacing``."""

    window_radius: float
    spacing: float

    def __post_init__(self):
        if self.window_radius <= 0 or self.spacing <= 0:
            raise ValueError("window_radius and spacing must be positive")
        if self.spacing >= self.window_radius:
            raise ValueError("spacing must be smaller than window_radius")
        if self.n < 16:
            raise ValueError(f"grid has {self.n} cells per side; at least 16 required")

    @property
    def n(self) -> int:
        return int(round(2 * self.window_radius / self.spacing))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @cached_property
    def axis(self) -> np.ndarray:
        h = self.spacing
        return -self.window_radius + h * (np.arange(self.n) + 0.5)

    @cached_property
    def points(self) -> np.ndarray:
        """Complex cell centers, indexed ``[row, col]`` with row = y index."""
        x = self.axis
        return x[None, :] + 1j * x[:, None]

    def index_of(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Row/column of the cell containing each point (clipped to the window)."""
        z = np.asarray(z)
        h = self.spacing
        col = np.floor((z.real + self.window_radius) / h).astype(int)
        row = np.floor((z.imag + self.window_radius) / h).astype(int)
        return np.clip(row, 0, self.n - 1), np.clip(col, 0, self.n - 1)

    def refine(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.window_radius, self.spacing / factor)


# --------------------------------------------------------------------------
# analytic primitives


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def contains(self, z):
        return np.abs(z - self.center) <= self.radius

    def distance(self, z):
        return np.maximum(np.abs(z - self.center) - self.radius, 0.0)

    @property
    def thickness(self) -> float:
        return 2 * self.radius


@dataclass(frozen=True)
class Annulus:
    center: complex
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError("annulus needs 0 <= inner < outer")

    def contains(self, z):
        r = np.abs(z - self.center)
        return (r >= self.inner) & (r <= self.outer)

    def distance(self, z):
        r = np.abs(z - self.center)
        return np.maximum(np.maximum(self.inner - r, r - self.outer), 0.0)

    @property
    def thickness(self) -> float:
        return self.outer - self.inner


@dataclass(frozen=True)
class Strip:
    """Thickened line ``|y - offset| <= width/2`` (or the vertical analogue).

    ``lo``/``hi`` cut the strip along its length, giving half-strips and
    segments.
    """

    orientation: str
    offset: float
    width: float
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.orientation not in ("h", "v"):
            raise ValueError("orientation must be 'h' or 'v'")
        if self.width <= 0 or self.lo >= self.hi:
            raise ValueError("degenerate strip")

    def _coords(self, z):
        z = np.asarray(z)
        if self.orientation == "h":
            return z.real, z.imag
        return z.imag, z.real

    def contains(self, z):
        along, across = self._coords(z)
        return (np.abs(across - self.offset) <= self.width / 2) & (along >= self.lo) & (along <= self.hi)

    def distance(self, z):
        along, across = self._coords(z)
        d_across = np.maximum(np.abs(across - self.offset) - self.width / 2, 0.0)
        d_along = np.maximum(np.maximum(self.lo - along, along - self.hi), 0.0)
        return np.hypot(d_across, d_along)

    @property
    def thickness(self) -> float:
        return self.width


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError("degenerate rectangle")

    def contains(self, z):
        z = np.asarray(z)
        return (z.real >= self.x0) & (z.real <= self.x1) & (z.imag >= self.y0) & (z.imag <= self.y1)

    def distance(self, z):
        z = np.asarray(z)
        dx = np.maximum(np.maximum(self.x0 - z.real, z.real - self.x1), 0.0)
        dy = np.maximum(np.maximum(self.y0 - z.imag, z.imag - self.y1), 0.0)
        return np.hypot(dx, dy)

    @property
    def thickness(self) -> float:
        return min(self.x1 - self.x0, self.y1 - self.y0)


Primitive = Union[Disc, Annulus, Strip, Rect]


@dataclass(frozen=True)
class SetDescriptor:
    """Finite union of primitives."""

    primitives: tuple = ()

    def __or__(self, other: "SetDescriptor") -> "SetDescriptor":
        return SetDescriptor(tuple(self.primitives) + tuple(other.primitives))

    def contains(self, z):
        z = np.asarray(z)
        out = np.zeros(z.shape, dtype=bool)
        for p in self.primitives:
            out |= p.contains(z)
        return out

    def distance(self, z):
        z = np.asarray(z)
        out = np.full(z.shape, np.inf)
        for p in self.primitives:
            out = np.minimum(out, p.distance(z))
        return out

    @classmethod
    def parse(cls, lines: Sequence[str]) -> "SetDescriptor":
        return cls(tuple(parse_primitive(s) for s in lines if s.strip()))


def _num(tok: str) -> float:
    return float(tok)


def parse_primitive(text: str) -> Primitive:
    """Parse one primitive from text.

    Formats::

        disc CX CY R
        annulus CX CY R_IN R_OUT
        hstrip Y WIDTH [X_LO X_HI]
        vstrip X WIDTH [Y_LO Y_HI]
        rect X0 X1 Y0 Y1
    """
    tok = text.split()
    if not tok:
        raise ValueError("empty primitive")
    kind, args = tok[0].lower(), [_num(t) for t in tok[1:]]
    try:
        if kind == "disc" and len(args) == 3:
            return Disc(complex(args[0], args[1]), args[2])
        if kind == "annulus" and len(args) == 4:
            return Annulus(complex(args[0], args[1]), args[2], args[3])
        if kind in ("hstrip", "vstrip") and len(args) in (2, 4):
            lo, hi = (args[2], args[3]) if len(args) == 4 else (-math.inf, math.inf)
            return Strip(kind[0], args[0], args[1], lo, hi)
        if kind == "rect" and len(args) == 4:
            return Rect(*args)
    except ValueError as exc:
        raise ValueError(f"bad primitive {text!r}: {exc}") from None
    raise ValueError(f"unknown primitive or wrong argument count: {text!r}")


def format_primitive(p: Primitive) -> str:
    if isinstance(p, Disc):
        return f"disc {p.center.real:g} {p.center.imag:g} {p.radius:g}"
    if isinstance(p, Annulus):
        return f"annulus {p.center.real:g} {p.center.imag:g} {p.inner:g} {p.outer:g}"
    if isinstance(p, Strip):
        tail = "" if math.isinf(p.lo) and math.isinf(p.hi) else f" {p.lo:g} {p.hi:g}"
        return f"{p.orientation}strip {p.offset:g} {p.width:g}{tail}"
    return f"rect {p.x0:g} {p.x1:g} {p.y0:g} {p.y1:g}"


# --------------------------------------------------------------------------
# rasters


@dataclass(frozen=True, eq=False)
class RasterSet:
    """Boolean mask on a grid, with lazily computed complement components."""

    grid: GridSpec
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.shape != self.grid.shape:
            raise ValueError(f"mask shape {m.shape} does not match grid {self.grid.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    # set algebra on a common grid
    def _check(self, other: "RasterSet"):
        if other.grid != self.grid:
            raise ValueError("raster sets live on different grids")

    def __or__(self, other):
        self._check(other)
        return RasterSet(self.grid, self.mask | other.mask)

    def __and__(self, other):
        self._check(other)
        return RasterSet(self.grid, self.mask & other.mask)

    def __sub__(self, other):
        self._check(other)
        return RasterSet(self.grid, self.mask & ~other.mask)

    def __eq__(self, other):
        return isinstance(other, RasterSet) and other.grid == self.grid and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.grid, self.mask.tobytes()))

    def __contains__(self, other: "RasterSet") -> bool:
        return not np.any(other.mask & ~self.mask)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    @property
    def area(self) -> float:
        return self.count * self.grid.spacing**2

    @property
    def points(self) -> np.ndarray:
        return self.grid.points[self.mask]

    def dilate(self, cells: int = 1) -> "RasterSet":
        if cells <= 0:
            return self
        return RasterSet(self.grid, ndimage.binary_dilation(self.mask, EIGHT, iterations=cells))

    def interior(self, cells: int = 1) -> "RasterSet":
        """Cells whose whole ``cells``-neighbourhood lies in the set (erosion)."""
        return RasterSet(self.grid, ndimage.binary_erosion(self.mask, EIGHT, iterations=cells, border_value=0))

    def inset(self, margin: float) -> "RasterSet":
        """Erosion by a fixed length ``margin`` (rounded up to whole cells).

        Grid residuals converge uniformly on such compact pieces of the
        interior; at a fixed number of cells from a staircase corner they do not.
        """
        return self.interior(max(1, math.ceil(margin / self.grid.spacing - 1e-9)))

    def boundary(self) -> "RasterSet":
        return self - self.interior(1)

    def touches_window_boundary(self) -> bool:
        m = self.mask
        return bool(m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any())

    @cached_property
    def complement_labels(self) -> tuple[np.ndarray, int]:
        return ndimage.label(~self.mask, structure=FOUR)

    @cached_property
    def touches_boundary(self) -> np.ndarray:
        """Flag per complement component (index ``k-1`` for label ``k``)."""
        labels, n = self.complement_labels
        edge = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
        flags = np.zeros(n, dtype=bool)
        hit = np.unique(edge[edge > 0])
        flags[hit - 1] = True
        return flags

    def component_table(self) -> list[tuple[int, int, bool]]:
        """Rows ``(component_id, area_cells, touches_boundary)`` of the complement."""
        labels, n = self.complement_labels
        sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
        return [(k + 1, int(sizes[k]), bool(self.touches_boundary[k])) for k in range(n)]

    def set_components(self) -> list["RasterSet"]:
        labels, n = ndimage.label(self.mask, structure=EIGHT)
        return [RasterSet(self.grid, labels == k) for k in range(1, n + 1)]

    def distance_to(self) -> np.ndarray:
        """Euclidean distance (between cell centers) from every cell to this set."""
        if self.is_empty:
            return np.full(self.grid.shape, np.inf)
        return ndimage.distance_transform_edt(~self.mask, sampling=self.grid.spacing)


def rasterize(d: SetDescriptor, g: GridSpec) -> RasterSet:
    """Sample a descriptor at cell centers and label its complement."""
    for p in d.primitives:
        if p.thickness < 2 * g.spacing:
            raise ValueError(f"primitive {format_primitive(p)!r} thinner than 2*spacing={2 * g.spacing:g}")
    mask = d.contains(g.points)
    if not mask.any():
        raise ValueError("empty set: descriptor does not meet the window")
    return RasterSet(g, mask)


def disc_raster(disc: Disc, g: GridSpec) -> RasterSet:
    return RasterSet(g, disc.contains(g.points))


def holes(S: RasterSet) -> list[RasterSet]:
    """Bounded complement components (those not touching the window boundary)."""
    if S.is_empty:
        raise ValueError("holes of an empty set")
    labels, n = S.complement_labels
    return [RasterSet(S.grid, labels == k + 1) for k in range(n) if not S.touches_boundary[k]]


def holes_mask(S: RasterSet) -> np.ndarray:
    labels, n = S.complement_labels
    bounded = np.flatnonzero(~S.touches_boundary) + 1
    return np.isin(labels, bounded)


def hull_and_h(S: RasterSet) -> tuple[RasterSet, RasterSet]:
    """Hull ``S ∪ holes`` and the closure of the union of holes."""
    if S.is_empty:
        raise ValueError("hull of an empty set")
    hm = holes_mask(S)
    hull = RasterSet(S.grid, S.mask | hm)
    if not hm.any():
        return hull, RasterSet(S.grid, np.zeros_like(hm))
    closure = ndimage.binary_dilation(hm, EIGHT) & hull.mask
    return hull, RasterSet(S.grid, closure)


def hull(S: RasterSet) -> RasterSet:
    return hull_and_h(S)[0]


# --------------------------------------------------------------------------
# bounded exhaustion hulls


@dataclass(frozen=True)
class BEHReport:
    bounded: bool
    conclusive: bool
    hole_cells: int
    split_components: int

    @property
    def passed(self) -> bool:
        return self.bounded and self.conclusive


def beh_report(E: RasterSet, disc: Disc) -> BEHReport:
    """Check that adjoining ``disc`` to ``E`` only creates bounded holes.

    On a finite window every complement piece touching the boundary looks
    unbounded, so the check looks for the one observable failure mode: the
    disc cutting a boundary-touching component of the complement of ``E``
    into several boundary-touching pieces.  Some of those pieces may close
    up outside the window and form unbounded families of holes; the result
    is then reported as inconclusive.
    """
    D = disc_raster(disc, E.grid)
    U = E | D
    hm = holes_mask(U)
    labels_E, _ = E.complement_labels
    labels_U, nU = U.complement_labels
    split = 0
    for k in np.flatnonzero(E.touches_boundary) + 1:
        inside = labels_U[(labels_E == k) & (labels_U > 0)]
        pieces = np.unique(inside)
        n_edge = int(sum(U.touches_boundary[p - 1] for p in pieces))
        split += max(n_edge - 1, 0)
    return BEHReport(bounded=True, conclusive=split == 0, hole_cells=int(hm.sum()), split_components=split)


def beh_check(E: RasterSet, disc: Disc) -> bool:
    """True iff the holes of ``E ∪ disc`` stay bounded inside the window."""
    rep = beh_report(E, disc)
    if not rep.conclusive:
        warnings.warn(
            f"BEH inconclusive for {format_primitive(disc)}: the disc splits an unbounded complement "
            f"component into {rep.split_components + 1} pieces reaching the window boundary",
            BEHInconclusiveWarning,
            stacklevel=2,
        )
    return rep.passed


# --------------------------------------------------------------------------
# exhaustion and Cartan pairs


@dataclass(frozen=True)
class ExhaustionStep:
    disc: Disc
    delta: RasterSet
    holes: RasterSet
    E: RasterSet
    outer_radius: float


def _outer_radius(disc: Disc, H: RasterSet) -> float:
    r = disc.radius
    if not H.is_empty:
        half_diag = H.grid.spacing / math.sqrt(2)
        r = max(r, float(np.abs(H.points - disc.center).max()) + half_diag)
    return r


def build_exhaustion(E: RasterSet, n: int, *, first_radius: float | None = None,
                     margin_cells: int = 4, center: complex = 0j) -> list[ExhaustionStep]:
    """Concentric discs ``Δ_1 ⊂ ... ⊂ Δ_n`` with ``E_i = E ∪ Δ_i ∪ H_i``.

    Radii start evenly spaced up to the largest disc fitting in the window and
    are pushed outward whenever a hole closure comes within ``margin_cells``
    of the next boundary circle.
    """
    if n < 1:
        raise ValueError("need at least one exhaustion step")
    if hull(E) != E:
        raise NotArakelianError("not Arakelian: the set has holes (hull differs from the set)")
    g = E.grid
    h = g.spacing
    r_max = g.window_radius - max(abs(center.real), abs(center.imag)) - 2 * h
    if first_radius is None:
        r, incr = r_max / n, r_max / n
    else:
        r, incr = first_radius, (r_max - first_radius) / max(n - 1, 1)
    out: list[ExhaustionStep] = []
    for i in range(n):
        if r > r_max + 1e-12:
            raise WindowExhaustedError(f"window exhausted: disc {i + 1} needs radius {r:.4g} > {r_max:.4g}")
        disc = Disc(center, r)
        D = disc_raster(disc, g)
        beh_check(E, disc)
        U = E | D
        H = RasterSet(g, holes_mask(U))
        Ei = U | H
        if holes(Ei):
            raise NotArakelianError(f"E_{i + 1} has holes")
        outer = _outer_radius(disc, H)
        out.append(ExhaustionStep(disc, D, H, Ei, outer))
        r = max(r + incr, outer + margin_cells * h)
    return out


@dataclass(frozen=True)
class CartanPair:
    """Closed sets ``A``, ``B`` with compact overlap ``K`` and separated differences."""

    A: RasterSet
    B: RasterSet
    K: RasterSet
    separation: float
    annulus: tuple | None = None

    @property
    def grid(self) -> GridSpec:
        return self.A.grid

    def verify(self) -> None:
        if self.A & self.B != self.K:
            raise ValueError("K differs from A ∩ B")
        if self.K.touches_window_boundary():
            raise ValueError("K touches the window boundary (not compact)")
        if not self.separation > 0:
            raise SeparationError("separation failure")


def pair_separation(A: RasterSet, B: RasterSet) -> float:
    AmB, BmA = A - B, B - A
    if AmB.is_empty or BmA.is_empty:
        return math.inf
    return float(BmA.distance_to()[AmB.mask].min())


def make_cartan_pair(A: RasterSet, B: RasterSet, annulus=None) -> CartanPair:
    sep = pair_separation(A, B)
    if sep <= A.grid.spacing * 1.5:
        raise SeparationError(f"separation failure: closures of A∖B and B∖A meet (gap {sep:.3g})")
    p = CartanPair(A, B, A & B, sep, annulus)
    p.verify()
    return p


def cartan_pair_for_step(E_i: RasterSet, inner: Disc, outer: Disc) -> CartanPair:
    """``A = closure(E_i ∖ Δ)``, ``B = E_i ∩ Δ_next``, ``K = A ∩ B``."""
    if inner.center != outer.center or inner.radius >= outer.radius:
        raise ValueError("inner disc must lie strictly inside the outer disc")
    g = E_i.grid
    h = g.spacing
    r = np.abs(g.points - inner.center)
    open_inner = r < inner.radius - h
    A = RasterSet(g, E_i.mask & ~open_inner)
    B = E_i & disc_raster(outer, g)
    if A.is_empty:
        raise ValueError("degenerate step: A is empty (nothing to glue)")
    return make_cartan_pair(A, B, annulus=(inner.center, inner.radius, outer.radius))
