"""Canonical 1D and 2D test cases and their error/symmetry reports."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import fv, physics, render
from .boundary import (BoundarySpec, Slip, SolidMask, SupersonicInflow, SupersonicOutflow)
from .errors import AdmissibilityError, ConfigurationError
from .grid import Field, GridSpec, make_uniform_grid, project_fine_to_coarse
from .model import LearnedReconstruction, NetworkParams


@dataclass
class BenchCase:
    name: str
    eq: physics.EquationSet
    ic: Callable  # GridSpec -> primitive (nvars, ny, nx)
    bc: BoundarySpec
    bounds: tuple
    fine: tuple
    coarse: tuple
    t_end: float
    symmetry: str | None = None
    solid: Callable | None = None  # GridSpec -> bool (ny, nx)
    notes: str = ""

    @property
    def ndim(self) -> int:
        return self.eq.ndim

    def grid(self, counts) -> GridSpec:
        return make_uniform_grid(self.ndim, self.bounds, counts if self.ndim == 2 else counts[0])

    def initial(self, grid: GridSpec) -> Field:
        u = self.ic(grid)
        physics.check_primitive(self.eq, u)
        return Field(grid, physics.primitive_to_conserved(self.eq, u))

    def solid_mask(self, grid: GridSpec):
        return None if self.solid is None else SolidMask(self.solid(grid))


def _riemann_table():
    text = resources.files("ldfv").joinpath("assets/riemann2d.json").read_text()
    return json.loads(text)["cases"]


def _quadrants(states):
    def ic(grid):
        X, Y = grid.mesh()
        right, top = X >= 0.5, Y >= 0.5
        q = np.where(right, np.where(top, 1, 4), np.where(top, 2, 3))
        u = np.zeros((4,) + X.shape)
        for k, s in states.items():
            u[:, q == int(k)] = np.asarray(s, dtype=np.float64)[:, None]
        return u
    return ic


def _burgers_sine(grid):
    return np.sin(2.0 * np.pi * grid.x_centers())[None, None, :]


def _burgers_complex(grid):
    x = grid.x_centers()
    u = np.sin(8.0 * np.pi * x)
    u = np.where(((3 / 8 <= x) & (x <= 3.5 / 8)) | ((4 / 8 < x) & (x <= 4.5 / 8)), 3.0, u)
    u = np.where((3.5 / 8 < x) & (x < 4 / 8), 1.0, u)
    u = np.where((4.5 / 8 < x) & (x <= 5 / 8), 2.0, u)
    return u[None, None, :]


def _sod(grid):
    x = grid.x_centers()
    left = x < 0.5
    return np.stack([np.where(left, 1.0, 0.125), np.zeros_like(x), np.where(left, 1.0, 0.1)])[:, None, :]


def _shu_osher(grid):
    # [-5, 5] mapped onto [0, 1]; the shock starts at x = -4
    xs = grid.x_centers()
    x = 10.0 * xs - 5.0
    left = x < -4.0
    rho = np.where(left, 3.857143, 1.0 + 0.2 * np.sin(5.0 * x))
    u = np.where(left, 2.629369, 0.0)
    p = np.where(left, 10.33333, 1.0)
    return np.stack([rho, u, p])[:, None, :]


def _explosion(grid):
    X, Y = grid.mesh()
    inside = np.hypot(X - 0.5, Y - 0.5) <= 0.4
    return np.stack([np.where(inside, 1.0, 0.125), np.zeros_like(X), np.zeros_like(X), np.where(inside, 1.0, 0.1)])


FORWARD_STEP_STATE = (1.4, 3.0, 0.0, 1.0)


def _forward_step_ic(grid):
    X, _ = grid.mesh()
    return np.stack([np.full_like(X, v) for v in FORWARD_STEP_STATE])


def _forward_step_solid(grid):
    X, Y = grid.mesh()
    return (X >= 0.6) & (Y <= 0.2)


def case_registry() -> dict:
    out = {}
    b1, ns = physics.Burgers(), BoundarySpec.periodic()
    out["burgers-sine"] = BenchCase("burgers-sine", b1, _burgers_sine, ns, (0.0, 1.0), (1024,), (32,), 0.39)
    out["burgers-complex"] = BenchCase("burgers-complex", b1, _burgers_complex, ns, (0.0, 1.0), (1024,), (256,), 0.39)
    e1 = physics.Euler1D()
    tr1 = BoundarySpec.uniform(SupersonicOutflow())
    out["sod"] = BenchCase("sod", e1, _sod, tr1, (0.0, 1.0), (1024,), (128,), 0.156)
    out["shu-osher"] = BenchCase("shu-osher", e1, _shu_osher, tr1, (0.0, 1.0), (4096,), (1024,), 0.156,
                                 notes="domain [-5, 5] rescaled to [0, 1]; time not rescaled")
    e2 = physics.Euler2D()
    tr2 = BoundarySpec.uniform(SupersonicOutflow(), 2)
    sq = ((0.0, 1.0), (0.0, 1.0))
    for key, c in _riemann_table().items():
        name = f"riemann2d-{key}"
        out[name] = BenchCase(name, e2, _quadrants(c["states"]), tr2, sq, (512, 512), (128, 128), c["t_end"],
                              symmetry=c["symmetry"])
    out["explosion"] = BenchCase("explosion", e2, _explosion, tr2, sq, (512, 512), (256, 256), 0.25,
                                 symmetry="diagonal")
    fs_bc = BoundarySpec(SupersonicInflow(FORWARD_STEP_STATE), SupersonicOutflow(), Slip(), Slip())
    out["forward-step"] = BenchCase("forward-step", e2, _forward_step_ic, fs_bc, ((0.0, 3.0), (0.0, 1.0)),
                                    (768, 256), (384, 128), 4.0, solid=_forward_step_solid)
    return out


def get_case(name: str) -> BenchCase:
    reg = case_registry()
    if name not in reg:
        raise ConfigurationError(f"unknown case {name!r}; known: {', '.join(sorted(reg))}")
    return reg[name]


def symmetry_defect(u, kind: str) -> float:
    """Max defect of primitive ``(4, n, n)`` data under a declared symmetry.

    ``diagonal``: reflection ``(x, y) -> (y, x)`` with ``u <-> v``;
    ``point``: rotation by 180 degrees about the centre with ``(u, v) -> -(u, v)``.
    """
    u = np.asarray(u, dtype=np.float64)
    if kind == "diagonal":
        img = np.stack([u[0].T, u[2].T, u[1].T, u[3].T])
    elif kind == "point":
        r = u[:, ::-1, ::-1]
        img = np.stack([r[0], -r[1], -r[2], r[3]])
    else:
        raise ConfigurationError(f"unknown symmetry {kind!r}")
    return float(np.max(np.abs(u - img)))


def run_solver(case: BenchCase, grid: GridSpec, cfg: fv.SchemeConfig) -> Field:
    return fv.simulate(case.initial(grid), case.bc, case.eq, cfg, case.t_end, solid=case.solid_mask(grid)).final


def _scaled_counts(counts, scale: int):
    if scale < 1 or any(c % scale for c in counts):
        raise ConfigurationError(f"scale {scale} must divide the grid sizes {counts}")
    return tuple(c // scale for c in counts)


def _errors(eq, sol: Field, ref: Field, mask=None) -> dict:
    u = physics.conserved_to_primitive(eq, sol.data)
    r = physics.conserved_to_primitive(eq, ref.data)
    keep = np.ones(sol.grid.shape, dtype=bool) if mask is None else ~mask
    return {f"l2_{n}": float(np.sqrt(np.mean((u[k][keep] - r[k][keep]) ** 2))) for k, n in enumerate(eq.var_names)}


def run_case(case: BenchCase, params: NetworkParams | None = None, out_dir=None, scale: int = 1,
             cfl: float = 0.4, coarse=None, fine=None) -> dict:
    """Fine classical reference, coarse classical run and optional learned run.

    Errors are L2 (RMS) differences of the primitive variables against the
    fine reference subsampled onto the coarse grid.
    """
    coarse_n = _scaled_counts(tuple(coarse or case.coarse), scale)
    fine_n = _scaled_counts(tuple(fine or case.fine), scale)
    gc, gf = case.grid(coarse_n), case.grid(fine_n)
    if gf.nx % gc.nx:
        raise ConfigurationError("fine grid must be an integer refinement of the coarse grid")
    R = gf.nx // gc.nx
    cfg = fv.SchemeConfig(cfl=cfl)
    report = {"case": case.name, "eq": case.eq.kind, "t_end": case.t_end, "coarse": list(coarse_n),
              "fine": list(fine_n), "R": R, "cfl": cfl, "bc": case.bc.to_json(), "notes": case.notes}
    runs, times = {}, {}
    try:
        t0 = time.perf_counter()
        ref = run_solver(case, gf, cfg)
        times["fine"] = time.perf_counter() - t0
        ref_c = ref if R == 1 else project_fine_to_coarse(ref, R)
        t0 = time.perf_counter()
        runs["classical"] = run_solver(case, gc, cfg)
        times["classical"] = time.perf_counter() - t0
        if params is not None:
            t0 = time.perf_counter()
            runs["learned"] = run_solver(case, gc, fv.SchemeConfig(cfl=cfl, reconstruction=LearnedReconstruction(params)))
            times["learned"] = time.perf_counter() - t0
    except AdmissibilityError as exc:
        report.update({"status": "failed", "error": str(exc), "step": exc.step, "time": exc.time})
        if out_dir is not None:
            _write_report(out_dir, report)
        return report
    mask = None if case.solid is None else case.solid(gc)
    report["status"] = "ok"
    report["runtime_s"] = {k: round(v, 3) for k, v in times.items()}
    report["variants"] = {k: _errors(case.eq, f, ref_c, mask) for k, f in runs.items()}
    report.update(report["variants"]["classical"])
    if "learned" in runs:
        d = {}
        for key, val in report["variants"]["classical"].items():
            lv = report["variants"]["learned"][key]
            d[key] = float("nan") if val == 0 else (val - lv) / val
        report["learned_improvement"] = d
    if case.symmetry and case.ndim == 2:
        report["symmetry"] = case.symmetry
        report["symmetry_defect"] = {
            k: symmetry_defect(physics.conserved_to_primitive(case.eq, f.data), case.symmetry) for k, f in runs.items()}
    if out_dir is not None:
        _write_outputs(out_dir, case, ref_c, runs, mask)
        _write_report(out_dir, report)
    return report


def _write_report(out_dir, report):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _write_outputs(out_dir, case, ref_c, runs, mask):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eq = case.eq
    prims = {"reference": physics.conserved_to_primitive(eq, ref_c.data)}
    prims.update({k: physics.conserved_to_primitive(eq, f.data) for k, f in runs.items()})
    grid = ref_c.grid
    if case.ndim == 1:
        with open(out / "slice.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + [f"{k}_{n}" for k in prims for n in eq.var_names])
            for i, x in enumerate(grid.x_centers()):
                w.writerow([f"{x:.10g}"] + [f"{prims[k][v, 0, i]:.12g}" for k in prims for v in range(eq.nvars)])
        return
    j = grid.ny // 2
    with open(out / "slice_y_mid.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"{k}_{n}" for k in prims for n in eq.var_names])
        for i, x in enumerate(grid.x_centers()):
            w.writerow([f"{x:.10g}"] + [f"{prims[k][v, j, i]:.12g}" for k in prims for v in range(eq.nvars)])
    lo = min(np.min(p[0] if mask is None else p[0][~mask]) for p in prims.values())
    hi = max(np.max(p[0] if mask is None else p[0][~mask]) for p in prims.values())
    for k, p in prims.items():
        rho = p[0] if mask is None else np.where(mask, np.nan, p[0])
        render.write_ppm(out / f"density_{k}.ppm", render.density_map(rho, lo, hi))
        render.write_ppm(out / f"contours_{k}.ppm", render.contour_map(rho, 30, lo, hi))
