"""The induction over an exhaustion of the window.

Step ``i`` (1-based) works with ``E_{i-1} ⊂ E_i = E ∪ Δ_i ∪ H_i`` and:

1. picks a disc ``Δ`` with ``Δ_i ∪ H_i ⊂ Δ ⊂ int Δ_{i+1}``;
2. fits a rational ``h`` to ``f_{i-1}`` on ``E_{i-1} ∩ Δ_{i+1}`` within ``c``;
3. rotates the sphere so that values on ``K`` sit in the chart ``|u| <= 1``;
4. builds ``gamma``, splits it on the pair ``(A, B)`` and sets
   ``f_i = s(f_{i-1}, a(., 0))`` on ``A`` and ``s(h, b(., 0))`` on ``B``;
5. checks the step budget on ``E_{i-1}`` (halving ``c`` on failure);
6. extends ``f_i`` continuously to the window.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cauchy_green import build_cutoff
from .cousin import CousinOperator
from .maps import CP1Map, SampledMap, cr_residual
from .mergelyan import (
    GLUE_RADIUS,
    TargetNotReachedWarning,
    continuous_glue,
    rational_approx_cp1,
)
from .planar_sets import (
    Disc,
    ExhaustionStep,
    RasterSet,
    build_exhaustion,
    cartan_pair_for_step,
    rasterize,
)
from .scenario import Scenario
from .target_cp1 import act, dist_cp1, estimate_constants, from_sphere, spray_eval, to_sphere
from .transition import (
    PointsTooFarError,
    SplittingError,
    TransitionMap,
    build_gamma,
    split_gamma,
)

log = logging.getLogger(__name__)

# cells whose neighbours differ by more than this (chordal) are not resolved by the grid
CR_MAX_JUMP = 0.1


class StepError(RuntimeError):
    def __init__(self, step: int, message: str, **values):
        self.step = step
        self.values = values
        extra = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items())
        super().__init__(f"step {step}: {message}" + (f" ({extra})" if extra else ""))


class BudgetError(StepError):
    pass


class ChartError(StepError):
    pass


@dataclass(frozen=True, eq=False)
class InductionState:
    i: int
    E_i: RasterSet
    f: SampledMap
    spent_budget: float
    disc: Disc | None = None


@dataclass
class StepRecord:
    step: int
    c: float
    retries: int
    kind: str
    fit_error: float
    fit_degree: int
    dist_to_id: float
    delta: float
    picard_iters: int
    composition_residual: float
    branch_gap: float
    deviation: float
    budget: float
    glue_min_norm: float
    cr_residual: float
    cr_skipped: int
    K_cells: int
    defect_history: list = field(default_factory=list)


@dataclass
class RunReport:
    scenario: str
    epsilon: float
    c1: float
    radii: list
    steps: list
    final_error: float = np.nan
    final_fit_error: float = np.nan
    final_degree: int = 0
    telescoped: float = np.nan
    runtime: float = 0.0
    states: list = field(default_factory=list, repr=False)
    exhaustion: list = field(default_factory=list, repr=False)
    E: RasterSet | None = field(default=None, repr=False)
    f0: SampledMap | None = field(default=None, repr=False)
    F: CP1Map | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        ok = all(r.deviation < r.budget for r in self.steps)
        return ok and self.final_error < self.epsilon


def sphere_rotation(Y: np.ndarray) -> np.ndarray:
    """SU(2) matrix sending the mean sphere direction of ``Y`` to ``u = 0``."""
    m = to_sphere(Y).mean(axis=0)
    if np.linalg.norm(m) < 1e-6:
        raise ValueError("values spread evenly over the sphere; no preferred chart")
    p = from_sphere(m)
    return np.array([[p[1], -p[0]], [np.conj(p[0]), np.conj(p[1])]])


def _fit(f_vals, S: RasterSet, target: float, sc: Scenario, rng):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TargetNotReachedWarning)
        return rational_approx_cp1(f_vals, S, max_degree=sc.fit_max_degree, target_error=target,
                                   max_points=sc.fit_points, rng=rng)


def _attempt(i, state, ex_i: ExhaustionStep, ex_next: ExhaustionStep, c, sc, rng):
    """One try of step ``i`` with approximation constant ``c``; returns (values on E_i, h, record)."""
    g = sc.grid
    h_ = g.spacing
    E_prev, E_i = state.E_i, ex_i.E
    f_prev = state.f
    S = E_prev & ex_next.delta
    h, rep = _fit(f_prev.on(S), S, c / 2, sc, rng)
    if rep.sup_error >= c:
        raise BudgetError(i, "rational fit did not reach c", fit_error=rep.sup_error, c=c)
    rho = ex_i.outer_radius + h_
    center = ex_i.disc.center
    try:
        pair = cartan_pair_for_step(E_i, Disc(center, rho), ex_next.disc)
    except ValueError as e:
        if "A is empty" not in str(e):
            raise StepError(i, str(e)) from e
        pair = None
    out = np.zeros((E_i.count, 2), complex)
    rec = dict(fit_error=rep.sup_error, fit_degree=rep.degree, dist_to_id=0.0, delta=np.inf,
               picard_iters=0, composition_residual=0.0, branch_gap=0.0, K_cells=0, defect_history=[])
    Hv = h.on_grid(g)
    Fv = f_prev.on_grid(g)
    idx = np.full(g.shape, -1)
    idx[E_i.mask] = np.arange(E_i.count)
    if pair is None:
        kind = "mergelyan"
        out[:] = Hv[E_i.mask]
        chi_vals = np.ones(g.shape)
    elif pair.K.is_empty:
        kind = "disjoint"
        out[idx[pair.A.mask]] = Fv[pair.A.mask]
        out[idx[pair.B.mask]] = Hv[pair.B.mask]
        chi_vals = build_cutoff(pair).values
    else:
        kind = "split"
        K = pair.K
        op = CousinOperator(pair)
        chi_vals = op.chi.values
        try:
            R = sphere_rotation(np.concatenate([Fv[K.mask], Hv[K.mask]]))
        except ValueError as e:
            raise ChartError(i, str(e)) from e
        fK, hK = act(R, Fv[K.mask]), act(R, Hv[K.mask])
        spread = max(float((np.abs(fK[:, 0]) / np.abs(fK[:, 1])).max()),
                     float((np.abs(hK[:, 0]) / np.abs(hK[:, 1])).max()))
        if spread > 1:
            raise ChartError(i, "values on K leave the chart |u| <= 1 after rotation; refine K",
                             max_u=spread)
        try:
            gamma = build_gamma(fK, hK, K, radius=sc.w_radius, cfg=TransitionMap(chart="0"))
            sp = split_gamma(gamma, pair, r0=sc.r0, op=op)
        except (SplittingError, PointsTooFarError) as e:
            raise BudgetError(i, f"splitting precondition failed: {e}") from e
        a0 = sp.a.slice(np.zeros(3))
        b0 = sp.b.slice(np.zeros(3))
        RH = R.conj().T
        fa = act(RH, spray_eval(act(R, Fv[pair.A.mask]), a0.values))
        hb = act(RH, spray_eval(act(R, Hv[pair.B.mask]), b0.values))
        out[idx[pair.A.mask]] = fa
        out[idx[pair.B.mask]] = hb
        # branch agreement on K
        KA = K.mask[pair.A.mask]
        KB = K.mask[pair.B.mask]
        gap = float(dist_cp1(fa[KA], hb[KB]).max())
        rec.update(dist_to_id=gamma.dist_to_id, delta=sp.delta, picard_iters=sp.iterations,
                   composition_residual=sp.composition_residual, branch_gap=gap, K_cells=K.count,
                   defect_history=list(sp.history))
    dev = float(dist_cp1(out[idx[E_prev.mask]], f_prev.on(E_prev)).max())
    return out, h, chi_vals, kind, dev, rec


def step(state: InductionState, sc: Scenario, exhaustion: list, c1: float, rng) -> tuple[InductionState, StepRecord]:
    i = state.i + 1
    ex_i, ex_next = exhaustion[i - 1], exhaustion[i]
    budget = 2.0 ** -i * sc.epsilon
    c = budget / (4 * c1)
    last = None
    for retry in range(sc.max_retries + 1):
        try:
            out, h, chi_vals, kind, dev, rec = _attempt(i, state, ex_i, ex_next, c, sc, rng)
        except BudgetError as e:
            last = e
            log.info("step %d retry %d: %s", i, retry, e)
            c /= 2
            continue
        if dev < budget:
            break
        last = BudgetError(i, "budget violation", deviation=dev, budget=budget, c=c)
        log.info("step %d retry %d: %s", i, retry, last)
        c /= 2
    else:
        raise BudgetError(i, f"budget violation at step {i} after {sc.max_retries} retries: {last}")
    g = sc.grid
    # continuous reference map: h near Δ, f_{i-1} outside, blended through the annulus
    XH, XF = to_sphere(h.on_grid(g)), to_sphere(state.f.values)
    blend = chi_vals[..., None] * XH + (1 - chi_vals[..., None]) * XF
    if np.linalg.norm(blend, axis=-1).min() < 1e-6:
        raise StepError(i, "extension reference degenerate (antipodal values in the annulus)")
    ref = SampledMap(g, from_sphere(blend))
    f_new, glue = continuous_glue(ref, out, ex_i.E, r=GLUE_RADIUS, band_cells=sc.glue_band)
    cr, skipped = cr_residual(f_new.values, g, ex_i.E, max_jump=CR_MAX_JUMP)
    record = StepRecord(i, c, retry, kind, rec["fit_error"], rec["fit_degree"], rec["dist_to_id"],
                        rec["delta"], rec["picard_iters"], rec["composition_residual"], rec["branch_gap"],
                        dev, budget, glue.homotopy_min_norm, cr, skipped, rec["K_cells"], rec["defect_history"])
    new = InductionState(i, ex_i.E, f_new, state.spent_budget + dev, ex_i.disc)
    return new, record


def run(sc: Scenario, c1: float | None = None, keep_states: bool = True) -> tuple[CP1Map, RunReport]:
    t0 = time.perf_counter()
    rng = np.random.default_rng(sc.seed)
    g = sc.grid
    E = rasterize(sc.E, g)
    exhaustion = build_exhaustion(E, sc.steps + 1, first_radius=sc.first_radius,
                                  margin_cells=sc.margin_cells)
    if c1 is None:
        c1 = estimate_constants(seed=sc.seed)[1]
    f0 = SampledMap(g, sc.f.on_grid(g))
    state = InductionState(0, E, f0, 0.0)
    report = RunReport(sc.name, sc.epsilon, c1, [ex.disc.radius for ex in exhaustion], [],
                       E=E, f0=f0, exhaustion=exhaustion)
    if keep_states:
        report.states.append(state)
    for _ in range(sc.steps):
        state, rec = step(state, sc, exhaustion, c1, rng)
        report.steps.append(rec)
        if keep_states:
            report.states.append(state)
        log.info("step %d: kind=%s c=%.3g deviation=%.3g budget=%.3g",
                 rec.step, rec.kind, rec.c, rec.deviation, rec.budget)
    report.telescoped = float(dist_cp1(state.f.on(E), f0.on(E)).max())
    if sc.final_fit:
        budget = 2.0 ** -(sc.steps + 1) * sc.epsilon
        F, rep = _fit(state.f.on(state.E_i), state.E_i, budget / 2, sc, rng)
        report.final_fit_error = rep.sup_error
        report.final_degree = rep.degree
    else:
        F = state.f
    report.F = F
    report.final_error = float(dist_cp1(F.on(E), f0.on(E)).max())
    report.runtime = time.perf_counter() - t0
    return F, report
