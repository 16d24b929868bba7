import dataclasses

import numpy as np
import pytest

from arakelian import driver
from arakelian.driver import BudgetError, run, sphere_rotation
from arakelian.maps import RationalMap
from arakelian.mergelyan import rational_approx_cp1
from arakelian.planar_sets import hull, rasterize
from arakelian.scenario import load_scenario
from arakelian.target_cp1 import dist_cp1, estimate_constants, from_chart, normalize, to_chart


@pytest.fixture(scope="module")
def c1():
    return estimate_constants()[1]


def small(scenario_dir, name, *overrides):
    # shipped scenario with key overrides, as on the command line
    return load_scenario(scenario_dir / f"{name}.ini", overrides=list(overrides))


def test_sphere_rotation():
    Y = from_chart(np.array([2.0, 2.1, 1.9 + 0.1j]))
    R = sphere_rotation(Y)
    assert np.allclose(R @ R.conj().T, np.eye(2)) and np.isclose(np.linalg.det(R), 1)
    u = np.abs(to_chart(normalize(np.einsum("ij,nj->ni", R, Y))))
    assert u.max() < 0.1
    with pytest.raises(ValueError, match="no preferred chart"):
        sphere_rotation(from_chart(np.array([0, np.inf])))


def test_fixed_point(scenario_dir, c1):
    # f = z on E: every step keeps f and the final fit is z itself
    sc = small(scenario_dir, "strip_disc", "grid.window_radius=4", "run.steps=2")
    F, rep = run(sc, c1=c1)
    assert rep.passed and rep.final_error < 1e-12
    assert isinstance(F, RationalMap) and F.degree == 1
    assert all(r.retries == 0 and r.deviation < 1e-12 for r in rep.steps)
    assert len(rep.states) == 3 and rep.states[0].i == 0
    assert rep.radii == sorted(rep.radii)


def test_disc_pole_matches_direct_fit(scenario_dir, c1):
    sc = small(scenario_dir, "disc_pole")
    F, rep = run(sc, c1=c1)
    E = rasterize(sc.E, sc.grid)
    _, direct = rational_approx_cp1(sc.f, E, target_error=2.0 ** -(sc.steps + 2) * sc.epsilon)
    assert rep.passed
    assert rep.final_error <= max(2 * direct.sup_error, 1e-14)
    # E is compact and inside the first disc: both steps are plain rational fits
    assert [r.kind for r in rep.steps] == ["mergelyan"] * sc.steps
    H = hull(E)
    p = F.poles()
    p = p[(abs(p.real) < sc.grid.window_radius) & (abs(p.imag) < sc.grid.window_radius)]
    i, j = sc.grid.index_of(p)
    assert not np.any(H.mask[i, j])
    assert np.allclose(F.poles(), 2)


def test_retry_halves_c(scenario_dir, c1, monkeypatch):
    sc = small(scenario_dir, "disc_pole", "run.steps=1")
    real_fit = driver._fit
    calls = []

    def spoiled(f_vals, S, target, sc_, rng):
        R, rep = real_fit(f_vals, S, target, sc_, rng)
        calls.append(target)
        if len(calls) == 1:
            rep = dataclasses.replace(rep, sup_error=1.0)
        return R, rep

    monkeypatch.setattr(driver, "_fit", spoiled)
    _, rep = run(sc, c1=c1)
    r = rep.steps[0]
    assert r.retries == 1
    assert r.c == pytest.approx(rep.steps[0].budget / (4 * c1) / 2)
    assert calls[1] == pytest.approx(calls[0] / 2)


def test_retries_exhausted(scenario_dir, c1, monkeypatch):
    sc = small(scenario_dir, "disc_pole", "run.steps=1", "run.max_retries=2")
    real_fit = driver._fit

    def always_bad(*a):
        R, rep = real_fit(*a)
        return R, dataclasses.replace(rep, sup_error=1.0)

    monkeypatch.setattr(driver, "_fit", always_bad)
    with pytest.raises(BudgetError, match="after 2 retries") as ei:
        run(sc, c1=c1)
    assert ei.value.step == 1


def test_no_final_fit(scenario_dir, c1):
    sc = small(scenario_dir, "disc_pole", "run.steps=1", "run.final_fit=false")
    F, rep = run(sc, c1=c1, keep_states=False)
    assert not isinstance(F, RationalMap) and rep.final_error < sc.epsilon
    assert np.isnan(rep.final_fit_error) and rep.states == []


@pytest.mark.slow
def test_strip_tanh_nontrivial(scenario_dir, c1):
    sc = load_scenario(scenario_dir / "strip_tanh.ini")
    F, rep = run(sc, c1=c1)
    assert rep.passed
    assert all(r.kind == "split" for r in rep.steps)
    for r in rep.steps:
        assert r.deviation < r.budget
        assert r.composition_residual < 1e-8 and r.branch_gap < 1e-8
        hist = np.asarray(r.defect_history)
        assert np.all(hist[1:] <= 0.6 * hist[:-1])
    # the target is not rational, so the approximation is genuinely non-trivial
    assert 1e-6 < rep.final_error < sc.epsilon
    assert rep.final_fit_error < 2.0 ** -(sc.steps + 1) * sc.epsilon
    E = rasterize(sc.E, sc.grid)
    assert rep.final_error == pytest.approx(float(dist_cp1(F.on(E), sc.f.on(E)).max()))


def test_deterministic(scenario_dir, c1):
    sc = small(scenario_dir, "two_strips", "run.steps=1")
    F1, r1 = run(sc, c1=c1)
    assert r1.steps[0].kind == "split" and r1.steps[0].deviation > 0
    F2, r2 = run(sc, c1=c1)
    assert np.array_equal(F1.num, F2.num) and np.array_equal(F1.den, F2.den)
    assert [dataclasses.astuple(a) for a in r1.steps] == [dataclasses.astuple(b) for b in r2.steps]
