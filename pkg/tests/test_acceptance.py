"""The nine acceptance criteria at their stated tolerances.

Each test stores a one-line PASS/FAIL summary that is printed in the
"acceptance criteria" section at the end of the pytest run.
"""

import time

import numpy as np
import pytest
from scipy import optimize

from arakelian.cauchy_green import ScalarField, cauchy_transform, dbar_residual
from arakelian.cousin import CousinOperator, split_scalar
from arakelian.driver import run
from arakelian.maps import RationalMap
from arakelian.mergelyan import avoid_set
from arakelian.planar_sets import Disc, GridSpec, RasterSet, disc_raster, make_cartan_pair
from arakelian.scenario import load_scenario
from arakelian.target_cp1 import (
    BASIS,
    CP1Point,
    chart_of,
    dist_cp1,
    estimate_constants,
    exp_sl2,
    flexibility_check,
    normalize,
    spray_eval,
    vertical_derivative,
)
from arakelian.transition import (
    admissible_delta,
    build_gamma,
    gtrans_residual,
    solve_G,
    split_gamma,
)
from oracles import chordal, disc_transform_closed, disc_transform_ray, mobius


def strip_pair(h, R=2.0):
    g = GridSpec(R, h)
    Z = g.points
    A = RasterSet(g, (Z.real < 0.5) & (abs(Z.imag) < 1))
    B = RasterSet(g, (Z.real > -0.5) & (abs(Z.imag) < 1))
    return make_cartan_pair(A, B)


def unit_ball(rng, n, radius, dim=3):
    t = rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))
    return t * (radius * rng.uniform(size=n) ** (1 / (2 * dim)) / np.linalg.norm(t, axis=1))[:, None]


def test_c1_cauchy_green(record):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    z = rng.uniform(-1.9, 1.9, 200) + 1j * rng.uniform(-1.9, 1.9, 200)
    exact = disc_transform_closed(z)
    # the closed form against refined 1-D quadrature of the ray integral
    oracle_gap = max(abs(disc_transform_ray(w) - e) for w, e in zip(z[:25], exact[:25]))
    errs = []
    for h in (0.08, 0.04, 0.02):
        g = GridSpec(2.0, h)
        K = disc_raster(Disc(0, 1), g)
        errs.append(float(np.abs(cauchy_transform(ScalarField.from_function(K, np.ones_like), z) - exact).max()))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    dt = time.perf_counter() - t0
    ok = oracle_gap < 1e-6 and min(ratios) >= 1.7 and errs[-1] < 0.05 and dt < 30
    record(1, ok, f"sup error {errs[-1]:.3g} at h=0.02 (< 0.05), halving ratios "
                  f"{', '.join(f'{r:.2f}' for r in ratios)}, oracle gap {oracle_gap:.2g}, {dt:.1f} s")
    assert ok


def test_c2_dbar_identity(record):
    out = []
    ok = True
    for name, fn in (("1", np.ones_like), ("z", lambda z: z), ("z^2", lambda z: z * z)):
        res = []
        for h in (0.04, 0.02, 0.01):
            g = GridSpec(2.0, h)
            K = disc_raster(Disc(0, 1), g)
            res.append(dbar_residual(ScalarField.from_function(K, fn), K.inset(0.1)))
        ratio = min(a / b for a, b in zip(res, res[1:]))
        ok &= ratio >= 1.7 and res[-1] < 0.1
        out.append(f"g={name}: {res[-1]:.2g} (ratio {ratio:.2f})")
    record(2, ok, "residual at h=0.01 " + "; ".join(out))
    assert ok


def test_c3_cousin(record):
    rng = np.random.default_rng(3)
    pairs = {h: strip_pair(h) for h in (0.02, 0.01)}
    ops = {h: CousinOperator(p) for h, p in pairs.items()}
    worst_ident, worst_ratio, worst_final = 0.0, np.inf, 0.0
    for _ in range(20):
        deg = rng.integers(0, 6)
        c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        res = {}
        for h, p in pairs.items():
            gK = ScalarField.from_function(p.K, lambda z: np.polyval(c, z))
            sp = split_scalar(gK, p, op=ops[h])
            worst_ident = max(worst_ident, sp.identity_residual)
            res[h] = (sp.dbar_residual_A, sp.dbar_residual_B)
        for k in range(2):
            worst_ratio = min(worst_ratio, res[0.02][k] / res[0.01][k])
            worst_final = max(worst_final, res[0.01][k])
    ok = worst_ident < 1e-12 and worst_ratio >= 1.7 and worst_final < 0.1
    record(3, ok, f"identity residual {worst_ident:.2g} (< 1e-12), dbar residual {worst_final:.2g} "
                  f"at h=0.01 (< 0.1), worst halving ratio {worst_ratio:.2f} (>= 1.7)")
    assert ok


def test_c4_spray_algebra(record):
    rng = np.random.default_rng(4)
    t = unit_ball(rng, 1000, 3.0)
    X, Xm = exp_sl2(t), exp_sl2(-t)
    det_err = float(np.abs(np.linalg.det(X) - 1).max())
    inv_err = float(np.abs(X @ Xm - np.eye(2)).max())
    # Ds(y) t = d/ds of the chart coordinate of exp(s t) . y at s = 0
    Y = normalize(rng.normal(size=(100, 2)) + 1j * rng.normal(size=(100, 2)))
    d = rng.normal(size=(100, 3)) + 1j * rng.normal(size=(100, 3))
    chart = chart_of(Y)

    def coord(P):
        return np.where(chart == "0", P[:, 0] / P[:, 1], P[:, 1] / P[:, 0])

    sym = vertical_derivative(Y, d)
    fd_err = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        fd = (coord(spray_eval(Y, eps * d)) - coord(spray_eval(Y, -eps * d))) / (2 * eps)
        fd_err.append(float(np.abs(fd - sym).max()))
    orders = [np.log2(a / b) for a, b in zip(fd_err, fd_err[1:])]
    ok = det_err < 1e-12 and inv_err < 1e-12 and min(orders) > 1.8
    record(4, ok, f"det error {det_err:.2g}, exp(t)exp(-t) error {inv_err:.2g} (< 1e-12), "
                  f"Ds finite-difference order {min(orders):.2f} (eps error {fd_err[-1]:.2g})")
    assert ok


def test_c5_transition(record):
    rng = np.random.default_rng(5)
    n = 1000
    Y1 = normalize(rng.normal(size=(n, 2)) + 1j * rng.normal(size=(n, 2)))
    # y2 = exp(p).y1 with small p keeps dist(y1, y2) below the admissible bound
    Y2 = normalize(np.einsum("nij,nj->ni", exp_sl2(unit_ball(rng, n, 0.2)), Y1))
    T = unit_ball(rng, n, 0.9)
    tau = solve_G(Y1, Y2, T)
    res = float(gtrans_residual(Y1, Y2, T, tau).max())
    # independent check with Mobius maps in the chart
    u1 = mobius(exp_sl2(T).transpose(1, 2, 0), Y1[:, 0] / Y1[:, 1])
    u2 = mobius(exp_sl2(tau).transpose(1, 2, 0), Y2[:, 0] / Y2[:, 1])
    finite = np.isfinite(u1) & np.isfinite(u2)
    oracle = float(chordal(u1[finite], u2[finite]).max())
    same = solve_G(Y1, Y1, T)
    exact = bool(np.array_equal(same, T))
    ok = res < 1e-10 and oracle < 1e-10 and exact
    record(5, ok, f"transition residual {res:.2g} (< 1e-10), chart oracle {oracle:.2g}, "
                  f"G(y,y,t) = t {'exactly' if exact else 'NOT exactly'}")
    assert ok


def test_c6_nonlinear_splitting(record):
    p = strip_pair(0.05)
    op = CousinOperator(p)
    radius, r0 = 0.5, 0.5
    delta = admissible_delta(op, radius, r0)
    zK = p.K.points
    f = normalize(np.stack([0.3 * zK, np.ones_like(zK)], -1))

    def h(s):
        return normalize(np.stack([0.3 * zK + s * (1 + 0.2 * zK), 1 - s * 0.1 * zK], -1))

    s = optimize.brentq(lambda s: build_gamma(f, h(s), p.K, radius).dist_to_id - delta / 4, 1e-8, 0.05,
                        xtol=1e-14)
    gamma = build_gamma(f, h(s), p.K, radius)
    sp = split_gamma(gamma, p, r0=r0, op=op)
    hist = np.asarray(sp.history)
    ratio = float((hist[1:] / hist[:-1]).max())
    ident = split_gamma(build_gamma(f, f, p.K, radius), p, r0=r0, op=op)
    w = np.array([0.1, -0.05j, 0.02 + 0.1j])
    exact = (np.array_equal(ident.a.slice(w).values, np.broadcast_to(w, (p.A.count, 3)))
             and np.array_equal(ident.b.slice(w).values, np.broadcast_to(w, (p.B.count, 3))))
    ok = ratio <= 0.6 and sp.composition_residual < 1e-8 and exact
    record(6, ok, f"dist_to_id/delta {gamma.dist_to_id / delta:.3f}, {sp.iterations} iterations, "
                  f"max defect ratio {ratio:.2g} (<= 0.6), composition residual "
                  f"{sp.composition_residual:.2g} (< 1e-8), identity split exact: {exact}")
    assert ok


@pytest.mark.slow
def test_c7_end_to_end(record, scenario_dir):
    sc = load_scenario(scenario_dir / "strip_disc.ini")
    assert sc.grid.window_radius == 6 and sc.epsilon == 0.1 and sc.steps == 3
    t0 = time.perf_counter()
    F1, rep1 = run(sc)
    dt = time.perf_counter() - t0
    F2, rep2 = run(sc)
    E = rep1.E
    same = (np.array_equal(F1.on(E), F2.on(E))
            and [vars(r) for r in rep1.steps] == [vars(r) for r in rep2.steps]
            and rep1.final_error == rep2.final_error)
    devs = all(r.deviation < 2.0 ** -r.step * 0.1 for r in rep1.steps)
    # the final error recomputed from scratch against the scenario map
    err = float(dist_cp1(F1.on(E), sc.f.on(E)).max())
    ok = devs and err < 0.1 and rep1.final_error < 0.1 and same and dt < 600
    dev_txt = ", ".join(f"{r.deviation:.2g}<{2.0 ** -r.step * 0.1:.3g}" for r in rep1.steps)
    record(7, ok, f"final error {err:.2g} (< 0.1), deviations {dev_txt}, "
                  f"deterministic: {same}, {dt:.1f} s")
    assert ok


def test_c8_avoidance(record):
    g = GridSpec(2.05, 0.1)
    c1 = estimate_constants()[1]
    # a value F(z) = z takes exactly at a cell centre, so t = 0 must be rejected
    target = CP1Point.chart(g.points[25, 30])
    Ft, rep = avoid_set(RationalMap.identity(), [target], 0.1, g, c1, rng=np.random.default_rng(8))
    t = rep.extra["t"]
    V = Ft.hom(g.points)
    dmin = float(dist_cp1(V, target.hom).min())
    disp = float(dist_cp1(V, RationalMap.identity().hom(g.points)).max())
    ok = 1 <= rep.extra["draws"] <= 20 and dmin > 0 and disp <= c1 * np.linalg.norm(t)
    record(8, ok, f"{rep.extra['draws']} draws (<= 20), grid min distance {dmin:.2g} (> 0), "
                  f"displacement {disp:.2g} <= c1|t| = {c1 * np.linalg.norm(t):.2g}")
    assert ok


def test_c9_flexibility(record):
    rng = np.random.default_rng(9)
    Y = normalize(rng.normal(size=(1000, 2)) + 1j * rng.normal(size=(1000, 2)))
    full = flexibility_check(BASIS_VECTORS, Y)
    single = flexibility_check([[0, 1, 0]], [CP1Point.chart(0).hom])
    ok = full and not single
    record(9, ok, f"sl2 basis spans at 1000 points: {full}; single section h at u=0: "
                  f"{'fails' if not single else 'passes'} (expected fails)")
    assert ok


# coefficient vectors of the basis e, h, f
BASIS_VECTORS = np.eye(len(BASIS))
