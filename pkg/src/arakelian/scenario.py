"""Scenario files: INI sections ``[grid]``, ``[set]``, ``[map]``, ``[run]``.

Example::

    [grid]
    window_radius = 6
    spacing = 0.05

    [set]
    primitives =
        hstrip 0 0.5
        disc 0 0 1

    [map]
    kind = identity
    extension = bump

    [run]
    epsilon = 0.1
    steps = 3
    seed = 0
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .maps import CP1Map, FunctionMap, RationalMap
from .mergelyan import GLUE_RADIUS
from .planar_sets import GridSpec, SetDescriptor
from .target_cp1 import exp_sl2, normalize


class ConfigError(ValueError):
    pass


_KEYS = {
    "grid": {"window_radius", "spacing"},
    "set": {"primitives"},
    "map": {"kind", "a", "p", "scale", "k", "num", "den", "extension", "bump_width", "bump_t"},
    "run": {"epsilon", "steps", "seed", "first_radius", "margin_cells", "w_radius", "r0",
            "max_retries", "fit_max_degree", "fit_points", "glue_band", "final_fit"},
}

MAP_KINDS = ("identity", "pole", "blaschke", "exp", "tanh", "rational")


def parse_complex(text: str) -> complex:
    t = text.strip().replace(" ", "")
    if t.lower() in ("inf", "infinity"):
        return complex(np.inf)
    t = t.replace("i", "j")
    try:
        return complex(t)
    except ValueError as e:
        raise ConfigError(f"not a complex number: {text!r}") from e


def parse_coeffs(text: str) -> np.ndarray:
    out = []
    for tok in text.split():
        re_, _, im_ = tok.partition(",")
        out.append(complex(float(re_), float(im_ or 0)))
    if not out:
        raise ConfigError("empty coefficient list")
    return np.array(out)


def _hom(u: np.ndarray) -> np.ndarray:
    return np.stack([u, np.ones_like(u)], axis=-1)


def holomorphic_map(kind: str, params: dict) -> CP1Map:
    """Base map holomorphic near the set; values as homogeneous pairs."""
    g = params.get
    if kind == "identity":
        return RationalMap.identity()
    if kind == "pole":
        p = parse_complex(g("p", "2"))
        return RationalMap(np.array([1]), np.array([-p, 1]))
    if kind == "blaschke":
        a = parse_complex(g("a", "0.3"))
        if abs(a) >= 1:
            raise ConfigError("blaschke parameter needs |a| < 1")
        return RationalMap(np.array([-a, 1]), np.array([1, -np.conj(a)]))
    if kind == "rational":
        return RationalMap(parse_coeffs(g("num", "0,0 1,0")), parse_coeffs(g("den", "1,0")))
    s = parse_complex(g("scale", "1"))
    k = parse_complex(g("k", "1"))
    if kind == "exp":
        return FunctionMap(lambda z: _hom(s * np.exp(k * z)), "exp")
    if kind == "tanh":
        # tanh = (e^{2kz} - 1)/(e^{2kz} + 1), evaluated without overflow
        def fn(z):
            sgn = np.where((k * z).real >= 0, 1, -1)
            w = np.exp(-2 * np.abs((k * z).real)) * np.exp(-2j * sgn * (k * z).imag)
            return np.stack([s * sgn * (1 - w), 1 + w], axis=-1)
        return FunctionMap(fn, "tanh")
    raise ConfigError(f"unknown map kind {kind!r} (choose from {', '.join(MAP_KINDS)})")


@dataclass(frozen=True, eq=False)
class BumpExtension(CP1Map):
    """``exp(beta(z) t0) . f(z)`` with ``beta = min(1, dist(z, E)/width)``; equals ``f`` on ``E``."""

    base: CP1Map
    E: SetDescriptor
    width: float
    t0: np.ndarray

    def hom(self, z):
        z = np.asarray(z, dtype=complex)
        beta = np.clip(self.E.distance(z) / self.width, 0, 1)
        F = self.base.hom(z)
        A = exp_sl2(beta[..., None] * self.t0)
        out = np.einsum("...ij,...j->...i", A, F)
        return np.where((beta == 0)[..., None], F, normalize(out))


@dataclass
class Scenario:
    grid: GridSpec
    E: SetDescriptor
    f: CP1Map
    epsilon: float
    steps: int
    seed: int = 0
    first_radius: float | None = None
    margin_cells: int = 4
    w_radius: float = 0.5
    r0: float = 0.5
    max_retries: int = 8
    fit_max_degree: int = 40
    fit_points: int = 6000
    glue_band: int = 3
    final_fit: bool = True
    name: str = "scenario"
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.epsilon < GLUE_RADIUS:
            raise ConfigError(f"epsilon must satisfy 0 < epsilon < r = {GLUE_RADIUS} "
                              f"(gluing radius); got {self.epsilon}")
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        if not 0 < self.r0 < 1:
            raise ConfigError("r0 must lie in (0, 1)")
        if not 0 < self.w_radius < 1 / np.sqrt(3):
            raise ConfigError("w_radius must lie in (0, 1/sqrt(3)) so that W fits in |t| < c0")


def _read(path: str | Path | None, text: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if text is not None:
            cp.read_string(text)
        else:
            with open(path) as fh:
                cp.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"cannot read scenario: {e}") from e
    return cp


def apply_overrides(cp: configparser.ConfigParser, overrides) -> None:
    for ov in overrides or ():
        key, sep, value = ov.partition("=")
        sec, dot, opt = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value: {ov!r}")
        if sec not in _KEYS or opt not in _KEYS[sec]:
            raise ConfigError(f"unknown key {key.strip()!r}")
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec, opt, value.strip())


def load_scenario(path: str | Path | None = None, overrides=(), text: str | None = None,
                  seed: int | None = None) -> Scenario:
    cp = _read(path, text)
    apply_overrides(cp, overrides)
    for sec in cp.sections():
        if sec not in _KEYS:
            raise ConfigError(f"unknown section [{sec}]")
        extra = set(cp[sec]) - _KEYS[sec]
        if extra:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")
    for sec in ("grid", "set", "map", "run"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing section [{sec}]")
    try:
        grid = GridSpec(cp.getfloat("grid", "window_radius"), cp.getfloat("grid", "spacing"))
        lines = [ln for ln in cp.get("set", "primitives").splitlines() if ln.strip()]
        E = SetDescriptor.parse(lines)
        m = dict(cp["map"])
        base = holomorphic_map(m.get("kind", "identity"), m)
        ext = m.get("extension", "none")
        if ext == "bump":
            t0 = np.array([parse_complex(x) for x in m.get("bump_t", "0.3 0.2j 0.1").split()])
            if t0.shape != (3,):
                raise ConfigError("bump_t needs three complex numbers")
            f = BumpExtension(base, E, float(m.get("bump_width", "1.0")), t0)
        elif ext == "none":
            f = base
        else:
            raise ConfigError(f"unknown extension {ext!r} (none or bump)")
        r = cp["run"]
        fr = r.get("first_radius")
        sc = Scenario(
            grid=grid, E=E, f=f,
            epsilon=r.getfloat("epsilon"), steps=r.getint("steps"),
            seed=r.getint("seed", 0) if seed is None else int(seed),
            first_radius=float(fr) if fr else None,
            margin_cells=r.getint("margin_cells", 4),
            w_radius=r.getfloat("w_radius", 0.5), r0=r.getfloat("r0", 0.5),
            max_retries=r.getint("max_retries", 8),
            fit_max_degree=r.getint("fit_max_degree", 40),
            fit_points=r.getint("fit_points", 6000),
            glue_band=r.getint("glue_band", 3),
            final_fit=r.getboolean("final_fit", True),
            name=Path(path).stem if path else "scenario",
            source={s: dict(cp[s]) for s in cp.sections()},
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError, configparser.Error) as e:
        raise ConfigError(str(e)) from e
    return sc


def with_seed(sc: Scenario, seed: int) -> Scenario:
    return replace(sc, seed=seed)
