"""Command line: ``arakelian {run,check-set,transform,selftest}``.

Exit codes: 0 when every requested check passes, 1 when a check fails,
2 on configuration or input errors.  Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io, plotting
from .cauchy_green import cauchy_transform_grid
from .driver import StepError, run
from .maps import RationalMap
from .planar_sets import (
    Disc,
    NotArakelianError,
    WindowExhaustedError,
    beh_report,
    disc_raster,
    holes,
    hull,
    rasterize,
)
from .scenario import ConfigError, load_scenario
from .selftest import run_selftest
from .target_cp1 import dist_cp1, to_chart

def _scenario(args):
    if args.scenario is None:
        raise ConfigError("--scenario is required")
    return load_scenario(args.scenario, overrides=args.set, seed=args.seed)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _show(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return io.fmt(v)


def _print_table(rows, header) -> None:
    text = [list(header)] + [[_show(v) for v in r] for r in rows]
    widths = [max(len(r[k]) for r in text) for k in range(len(header))]
    for r in text:
        print("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())


# --------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    sc = _scenario(args)
    out = _outdir(args)
    g = sc.grid
    F, rep = run(sc)
    E = rep.E
    io.write_steps(out / "steps.csv", rep.steps)
    for r in rep.steps:
        if r.defect_history:
            io.write_history(out / f"picard_step{r.step}.csv", r.defect_history)
    if isinstance(F, RationalMap):
        io.write_rational(out / "final_map.txt", F)
    else:
        io.write_grid_field(out / "final_map.csv", to_chart(F.on_grid(g)), g)
    err = dist_cp1(F.on_grid(g), rep.f0.values)
    io.write_pgm(out / "error.pgm", np.where(E.mask, err, np.nan), log=True)
    io.write_pgm(out / "E.pgm", E.mask)
    for k, ex in enumerate(rep.exhaustion[:len(rep.steps)], start=1):
        io.write_pgm(out / f"E_{k}.pgm", ex.E.mask)
    rows = [("final_error", rep.final_error, sc.epsilon, rep.final_error < sc.epsilon),
            ("telescoped", rep.telescoped, sc.epsilon, rep.telescoped < sc.epsilon)]
    rows += [(f"deviation_step{r.step}", r.deviation, r.budget, r.deviation < r.budget) for r in rep.steps]
    rows += [(f"branch_gap_step{r.step}", r.branch_gap, 1e-8, r.branch_gap < 1e-8) for r in rep.steps]
    if np.isfinite(rep.final_fit_error):
        rows.append(("final_fit_error", rep.final_fit_error, 2.0 ** -(sc.steps + 1) * sc.epsilon,
                     rep.final_fit_error < 2.0 ** -(sc.steps + 1) * sc.epsilon))
    io.write_residuals(out / "residuals.csv", rows)
    plotting.plot_exhaustion(out / "exhaustion.png", E, rep.exhaustion)
    plotting.plot_error_map(out / "error_map.png", err, E, title="chordal distance between F and f")
    plotting.plot_picard(out / "picard.png", rep.steps)
    plotting.plot_budget(out / "budget.png", rep.steps, sc.epsilon)
    _print_table(rows, ["quantity", "value", "tolerance", "pass"])
    ok = all(r[3] for r in rows)
    print(f"{'PASS' if ok else 'FAIL'} {sc.name}: final error {rep.final_error:.3g}, epsilon {sc.epsilon}")
    return 0 if ok else 1


def disc_of(S) -> Disc | None:
    """The disc (radius to 0.01) whose raster is exactly ``S``, if any."""
    g = S.grid
    z = S.points
    c = complex(round(z.real.mean(), 2), round(z.imag.mean(), 2))
    r0 = round(float(np.sqrt(S.area / np.pi)), 2)
    for k in range(-3, 4):
        d = Disc(c, round(r0 + 0.01 * k, 2))
        if d.radius > 0 and disc_raster(d, g) == S:
            return d
    return None


def cmd_check_set(args) -> int:
    sc = _scenario(args)
    out = _outdir(args) if args.out else None
    g = sc.grid
    E = rasterize(sc.E, g)
    hs = holes(E)
    H = hull(E)
    rows = [("holes", len(hs), "", "")]
    for k, hole in enumerate(hs, start=1):
        rows.append((f"hole_{k}_cells", hole.count, "", ""))
    rows.append(("hull_cells", H.count, "", ""))
    d = disc_of(H)
    rows.append(("hull_is_disc", "no" if d is None else "yes", "", ""))
    if d is not None:
        rows.append(("hull_disc_center", f"{d.center.real:g} {d.center.imag:g}", "", ""))
        rows.append(("hull_disc_radius", f"{d.radius:g}", "", ""))
    arakelian = len(hs) == 0
    beh_ok = True
    if arakelian:
        R = g.window_radius
        for rad in np.linspace(0.25, 0.9, 4) * R:
            rep = beh_report(E, Disc(0, float(rad)))
            rows.append((f"beh_disc_r{rad:.3g}", "pass" if rep.passed else "inconclusive", "", ""))
            beh_ok &= rep.passed
    rows.append(("arakelian", "yes" if arakelian and beh_ok else "no", "", ""))
    _print_table(rows, ["quantity", "value", "", ""])
    if out is not None:
        io.write_components(out / "components.csv", E)
        io.write_pgm(out / "E.pgm", E.mask)
        io.write_pgm(out / "hull.pgm", H.mask)
    return 0 if arakelian and beh_ok else 1


def cmd_transform(args) -> int:
    sc = _scenario(args)
    out = _outdir(args)
    try:
        field = io.read_field(args.field, sc.grid)
    except (OSError, ValueError) as e:
        raise ConfigError(str(e)) from e
    T = cauchy_transform_grid(field)
    io.write_grid_field(out / "transform.csv", T, sc.grid)
    io.write_pgm(out / "support.pgm", field.support.mask)
    print(f"T_K(g) on {sc.grid.n}x{sc.grid.n} cells written to {out / 'transform.csv'}")
    return 0


def cmd_selftest(args) -> int:
    results = run_selftest(args.only or None)
    rows = [(r.name, r.value, r.tolerance, "PASS" if r.passed else "FAIL") for r in results]
    _print_table(rows, ["check", "value", "tolerance", "result"])
    if args.out:
        out = _outdir(args)
        io.write_residuals(out / "selftest.csv", [(r.name, r.value, r.tolerance, r.passed) for r in results])
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arakelian",
                                description="Rational approximation of maps into the Riemann sphere "
                                            "on closed planar sets.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=None):
        sp.add_argument("--scenario", type=Path, required=False, help="scenario INI file")
        sp.add_argument("--out", default=out_default, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario key, e.g. run.epsilon=0.05")

    common(sub.add_parser("run", help="run the induction and write reports"), out_default="out")
    common(sub.add_parser("check-set", help="holes, hull and exhaustion checks for the scenario set"))
    tp = sub.add_parser("transform", help="apply T_K to a CSV field (x, y, re, im)")
    common(tp, out_default="out")
    tp.add_argument("field", type=Path, help="CSV with columns x, y, re, im on grid cell centres")
    st = sub.add_parser("selftest", help="run the property suite")
    st.add_argument("--out", default=None, help="also write selftest.csv here")
    st.add_argument("--only", action="append", default=[], help="run only the named check")
    return p


COMMANDS = {"run": cmd_run, "check-set": cmd_check_set, "transform": cmd_transform, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) and 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (NotArakelianError, WindowExhaustedError) as e:
        print(f"set error: {e}", file=sys.stderr)
        return 1
    except StepError as e:
        print(f"run failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
