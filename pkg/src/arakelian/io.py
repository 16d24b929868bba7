"""Plain-file exports: PGM rasters, CSV tables, rational map text files.

All writers format floats with ``repr``-exact precision and fixed column
order so that identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .cauchy_green import ScalarField
from .maps import RationalMap
from .planar_sets import GridSpec, RasterSet


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


# --------------------------------------------------------------------------
# PGM


def write_pgm(path, data: np.ndarray, vmin: float | None = None, vmax: float | None = None,
              log: bool = False) -> Path:
    """Binary greymap (P5), first image row = top of the window (largest y).

    Booleans map to 0/255; other arrays are scaled linearly (or in log10) to
    ``[vmin, vmax]``.  NaNs become 0.
    """
    a = np.asarray(data)
    if a.dtype == bool:
        img = np.where(a, 255, 0).astype(np.uint8)
        comment = "mask"
    else:
        a = np.asarray(a, dtype=float)
        if log:
            with np.errstate(divide="ignore", invalid="ignore"):
                a = np.where(a > 0, np.log10(a), np.nan)
        fin = a[np.isfinite(a)]
        lo = float(fin.min()) if vmin is None and fin.size else (vmin if vmin is not None else 0.0)
        hi = float(fin.max()) if vmax is None and fin.size else (vmax if vmax is not None else 1.0)
        span = hi - lo if hi > lo else 1.0
        s = np.clip((a - lo) / span, 0, 1)
        img = np.where(np.isfinite(s), np.round(1 + 254 * s), 0).astype(np.uint8)
        comment = f"{'log10 ' if log else ''}range {lo:.6g} {hi:.6g}"
    img = img[::-1]
    rows, cols = img.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n# {comment}\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    """Inverse of ``write_pgm`` (rows back in grid order)."""
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode("ascii"))
        pos = end
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    cols, rows = int(tokens[1]), int(tokens[2])
    pos += 1
    img = np.frombuffer(raw[pos:pos + rows * cols], dtype=np.uint8).reshape(rows, cols)
    return img[::-1].copy()


# --------------------------------------------------------------------------
# tables


def component_rows(S: RasterSet) -> list[tuple]:
    return [(k, area, touches) for k, area, touches in S.component_table()]


def write_components(path, S: RasterSet) -> Path:
    return write_csv(path, ["component_id", "area_cells", "touches_boundary"], component_rows(S))


def write_field(path, field: ScalarField) -> Path:
    z = field.support.points
    v = field.values
    return write_csv(path, ["x", "y", "re", "im"], zip(z.real, z.imag, v.real, v.imag))


def write_grid_field(path, values: np.ndarray, grid: GridSpec, region: RasterSet | None = None) -> Path:
    mask = np.ones(grid.shape, bool) if region is None else region.mask
    z = grid.points[mask]
    v = np.asarray(values)[mask]
    return write_csv(path, ["x", "y", "re", "im"], zip(z.real, z.imag, v.real, v.imag))


def read_field(path, grid: GridSpec) -> ScalarField:
    """Field from an ``x, y, re, im`` CSV; points must be cell centres of ``grid``."""
    header, rows = read_csv(path)
    if [h.strip() for h in header] != ["x", "y", "re", "im"]:
        raise ValueError(f"{path}: expected columns x, y, re, im")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    a = np.array(rows, dtype=float)
    z = a[:, 0] + 1j * a[:, 1]
    R = grid.window_radius
    ok = (np.abs(z.real) < R) & (np.abs(z.imag) < R)
    if not ok.all():
        raise ValueError(f"{path}: {int((~ok).sum())} point(s) outside the window")
    i, j = grid.index_of(z)
    snap = grid.points[i, j]
    if np.abs(snap - z).max() > 1e-6 * grid.spacing:
        raise ValueError(f"{path}: points are not cell centres of the grid (spacing {grid.spacing})")
    mask = np.zeros(grid.shape, bool)
    mask[i, j] = True
    if mask.sum() != len(z):
        raise ValueError(f"{path}: duplicate cells")
    vals = np.zeros(grid.shape, complex)
    vals[i, j] = a[:, 2] + 1j * a[:, 3]
    S = RasterSet(grid, mask)
    return ScalarField(S, vals[mask])


def write_residuals(path, rows) -> Path:
    """Rows ``(quantity, value, tolerance, pass)``."""
    return write_csv(path, ["quantity", "value", "tolerance", "pass"], rows)


def write_history(path, history) -> Path:
    return write_csv(path, ["iteration", "defect"], enumerate(history))


STEP_COLUMNS = ["step", "c", "dist_to_id", "deviation", "budget", "kind", "retries", "fit_error",
                "fit_degree", "delta", "picard_iters", "composition_residual", "branch_gap",
                "glue_min_norm", "cr_residual", "cr_skipped", "K_cells"]


def write_steps(path, records) -> Path:
    return write_csv(path, STEP_COLUMNS, ([getattr(r, k) for k in STEP_COLUMNS] for r in records))


def write_rational(path, R: RationalMap) -> Path:
    path = Path(path)
    path.write_text(R.to_text())
    return path


def read_rational(path) -> RationalMap:
    return RationalMap.from_text(Path(path).read_text())
