"""Command-line driver.

Exit codes: 0 on success, 1 on validation errors (bad flags, configs or
inputs), 2 on runtime or solver errors.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import analysis, bench, data, fv, physics, render, train
from .boundary import BoundarySpec
from .errors import ConfigurationError, LdfvError, ShapeError
from .exact_riemann import cell_average_solution
from .grid import Field, make_uniform_grid
from .model import LearnedReconstruction, init_params, load_checkpoint, save_checkpoint

log = logging.getLogger("ldfv")

_NUM = {"type": "number"}
_INT = {"type": "integer"}
_POS_INT = {"type": "integer", "minimum": 1}
_NUMS = {"type": "array", "items": _NUM}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "grid": {
            "type": "object", "additionalProperties": False,
            "properties": {"bounds": {"type": "array"}, "counts": {"type": "array", "items": _POS_INT}},
        },
        "equation": {
            "type": "object", "additionalProperties": False,
            "properties": {"kind": {"enum": list(physics.KINDS)}, "gamma": {"type": "number", "exclusiveMinimum": 1},
                           "a": _NUM},
        },
        "bc": {"type": "object"},
        "scheme": {
            "type": "object", "additionalProperties": False,
            "properties": {"cfl": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                           "limiter_on": {"type": "boolean"}, "dt_max": {"type": "number", "exclusiveMinimum": 0}},
        },
        "ic": {
            "type": "object", "additionalProperties": False,
            "properties": {"type": {"enum": ["case", "sine", "riemann", "random", "constant"]},
                           "case": {"type": "string"}, "k": _INT, "left": _NUMS, "right": _NUMS,
                           "state": _NUMS, "x0": _NUM, "kind": {"type": "string"}, "seed": _INT},
        },
        "simulate": {
            "type": "object", "additionalProperties": False,
            "properties": {"t_end": {"type": "number", "minimum": 0}, "fixed_dt": {"type": ["number", "null"]},
                           "save_times": _NUMS},
        },
        "converge": {
            "type": "object", "additionalProperties": False,
            "properties": {"grids": {"type": "array", "items": _POS_INT, "minItems": 2},
                           "t_end": {"type": "number", "exclusiveMinimum": 0}, "norm": {"enum": ["l1", "l2"]},
                           "var": {"type": ["integer", "null"]}, "reference": {"enum": ["fine", "exact"]},
                           "dt_rule": {"enum": ["cfl", "h2"]}},
        },
        "dataset": {
            "type": "object", "additionalProperties": False,
            "properties": {"eq": {"enum": list(data.EQ_TAGS)}, "nx": _POS_INT, "R": {"type": "integer", "minimum": 2},
                           "n_ic": _POS_INT, "n_steps": _POS_INT, "bc": {"enum": list(data.BC_TAGS)},
                           "seed": {"type": "integer", "minimum": 0}, "cfl": _NUM, "gamma": _NUM,
                           "mixture": {"type": ["object", "null"]}, "max_redraws": _INT},
        },
        "model": {
            "type": "object", "additionalProperties": False,
            "properties": {"hidden": _POS_INT, "n_blocks": _POS_INT, "seed": {"type": "integer", "minimum": 0}},
        },
        "train": {
            "type": "object", "additionalProperties": False,
            "properties": {k: ({"type": "integer"} if isinstance(v, int) else _NUM)
                           for k, v in train.TrainConfig().to_json().items()},
        },
        "bench": {
            "type": "object", "additionalProperties": False,
            "properties": {"scale": _POS_INT, "cfl": _NUM},
        },
    },
}

DEFAULTS = {
    "seed": 0,
    "grid": {"bounds": [0.0, 1.0], "counts": [128]},
    "equation": {"kind": "burgers", "gamma": 1.4, "a": 1.0},
    "bc": {"all": "periodic"},
    "scheme": {"cfl": 0.4, "limiter_on": True, "dt_max": 1e-2},
    "ic": {"type": "sine", "k": 1},
    "simulate": {"t_end": 0.39, "fixed_dt": None, "save_times": []},
    "converge": {"grids": [64, 128, 256], "t_end": 1.0, "norm": "l2", "var": None, "reference": "fine",
                 "dt_rule": "cfl"},
    "dataset": {k: v for k, v in data.DatasetSpec().__dict__.items() if k != "mixture"},
    "model": {"hidden": 32, "n_blocks": 3, "seed": 0},
    "train": train.TrainConfig().to_json(),
    "bench": {"scale": 1, "cfl": 0.4},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "bc":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Schema-validated config with every field resolved."""
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(f"invalid config: {exc.message} at {list(exc.absolute_path)}") from None
    cfg = _merge(DEFAULTS, raw)
    # a seed given at the top level seeds every stage that was not set explicitly
    for sec in ("dataset", "model", "train"):
        if "seed" in raw and "seed" not in raw.get(sec, {}):
            cfg[sec]["seed"] = raw["seed"]
    for key, val in (overrides or {}).items():
        sec, name = key.split(".")
        cfg[sec][name] = val
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def _write_resolved(target: Path, cfg: dict, extra: dict | None = None) -> None:
    doc = dict(cfg)
    if extra:
        doc["run"] = extra
    target.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _beside(out: Path) -> Path:
    return out.with_name(out.name + ".resolved_config.json")


# ---------------------------------------------------------------- builders

def _equation(cfg) -> physics.EquationSet:
    e = cfg["equation"]
    return physics.EquationSet(e["kind"], a=e["a"], gamma=e["gamma"])


def _grid(cfg, ndim):
    g = cfg["grid"]
    if ndim == 2:
        b = g["bounds"]
        bounds = tuple(tuple(v) for v in b) if isinstance(b[0], list) else ((b[0], b[1]), (b[0], b[1]))
        counts = g["counts"] if len(g["counts"]) == 2 else g["counts"] * 2
        return make_uniform_grid(2, bounds, tuple(counts))
    return make_uniform_grid(1, tuple(g["bounds"]), g["counts"][0])


def _scheme(cfg, params=None) -> fv.SchemeConfig:
    s = cfg["scheme"]
    rec = None if params is None else LearnedReconstruction(params, cfg["train"]["wall_width"])
    return fv.SchemeConfig(cfl=s["cfl"], limiter_on=s["limiter_on"], dt_max=s["dt_max"], reconstruction=rec)


def _initial_primitive(cfg, eq, grid):
    ic = cfg["ic"]
    kind = ic["type"]
    if kind == "case":
        return bench.get_case(ic["case"]).ic(grid)
    if kind == "constant":
        st = np.asarray(ic["state"], dtype=np.float64)
        return np.broadcast_to(st.reshape(-1, 1, 1), (eq.nvars,) + grid.shape).copy()
    if kind == "sine":
        s = np.sin(2.0 * np.pi * ic.get("k", 1) * grid.mesh()[0])
        if eq.is_euler:
            # density offset keeps the profile admissible
            rest = [np.ones_like(s)] + ([np.zeros_like(s)] if eq.ndim == 2 else []) + [np.ones_like(s)]
            return np.stack([s + 2.0] + rest)
        return s[None]
    if kind == "riemann":
        left, right = (np.asarray(ic[k], dtype=np.float64) for k in ("left", "right"))
        is_left = grid.mesh()[0] < ic.get("x0", 0.5)
        return np.where(is_left[None], left.reshape(-1, 1, 1), right.reshape(-1, 1, 1))
    if kind == "random":
        rng = data.make_rng(ic.get("seed", cfg["seed"]))
        return data.gen_initial_condition(eq, grid, rng, ic.get("kind", next(iter(data.DEFAULT_MIXTURES[eq.kind]))))
    raise ConfigurationError(f"unknown initial condition type {kind!r}")


def _initial_field(cfg, eq, grid) -> Field:
    u = np.asarray(_initial_primitive(cfg, eq, grid), dtype=np.float64).reshape((eq.nvars,) + grid.shape)
    physics.check_primitive(eq, u)
    return Field(grid, physics.primitive_to_conserved(eq, u))


def _boundary(cfg, eq) -> BoundarySpec:
    bc = BoundarySpec.from_json(cfg["bc"])
    return bc.validate(eq)


# ---------------------------------------------------------------- commands

def cmd_gen_data(args):
    cfg = load_config(args.config, _flag_overrides(args, "dataset", ("seed", "n_ic", "n_steps")))
    spec = data.DatasetSpec(**cfg["dataset"])
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    ds = data.build_dataset(spec)
    data.write_dataset(out, ds)
    _write_resolved(_beside(out), cfg, {"command": "gen-data", "samples": len(ds), "redraws": ds.stats["redraws"]})
    print(f"wrote {len(ds)} samples to {out}")


def cmd_train(args):
    cfg = load_config(args.config, _flag_overrides(args, "train", ("epochs", "seed", "lr")))
    ds = data.read_dataset(args.data, cfg["equation"]["gamma"])
    slip = data.read_dataset(args.slip_data, cfg["equation"]["gamma"]) if args.slip_data else None
    tcfg = train.TrainConfig(**cfg["train"])
    m = cfg["model"]
    if args.init:
        params0 = load_checkpoint(args.init)
    else:
        params0 = init_params(ds.eq.nvars, ds.grid.ndim, seed=m["seed"], hidden=m["hidden"], n_blocks=m["n_blocks"])
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    params, metrics = train.fit(ds, params0, tcfg, slip_dataset=slip, metrics_path=out / "metrics.csv",
                                checkpoint_dir=out / "epochs" if tcfg.checkpoint_every else None)
    meta = {"train": tcfg.to_json(), "dataset": ds.header(), "epochs_run": len(metrics)}
    save_checkpoint(out, params, meta)
    _write_resolved(out / "resolved_config.json", cfg, {"command": "train", "data": str(args.data),
                                                        "slip_data": args.slip_data})
    last = metrics[-1] if metrics else {}
    print(f"trained {len(metrics)} epochs; final val_loss {last.get('val_loss', float('nan')):.6e}")


def cmd_simulate(args):
    cfg = load_config(args.config, _flag_overrides(args, "simulate", ("t_end",)))
    eq = _equation(cfg)
    grid = _grid(cfg, eq.ndim)
    bc = _boundary(cfg, eq)
    params = load_checkpoint(args.ckpt) if args.ckpt else None
    scheme = _scheme(cfg, params)
    state0 = _initial_field(cfg, eq, grid)
    s = cfg["simulate"]
    traj = fv.simulate(state0, bc, eq, scheme, s["t_end"], fixed_dt=s["fixed_dt"], save_times=s["save_times"])
    out = Path(args.output)
    fv.write_trajectory(traj, out)
    u = physics.conserved_to_primitive(eq, traj.final.data)
    if eq.ndim == 1:
        with open(out / "final.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + list(eq.var_names))
            for i, x in enumerate(grid.x_centers()):
                w.writerow([f"{x:.10g}"] + [f"{u[v, 0, i]:.12g}" for v in range(eq.nvars)])
    else:
        render.write_ppm(out / "final_density.ppm", render.density_map(u[0]))
        render.write_ppm(out / "final_contours.ppm", render.contour_map(u[0], 30))
    _write_resolved(out / "resolved_config.json", cfg, {"command": "simulate", "ckpt": args.ckpt,
                                                        "steps": traj.steps[-1]})
    print(f"{traj.steps[-1]} steps to t = {traj.times[-1]:.6g}; snapshots in {out}")


def cmd_bench(args):
    cfg = load_config(args.config, _flag_overrides(args, "bench", ("scale", "cfl")))
    reg = bench.case_registry()
    names = sorted(reg) if args.case == "all" else [args.case]
    for n in names:
        if n not in reg:
            raise ConfigurationError(f"unknown case {n!r}; known: all, {', '.join(sorted(reg))}")
    params = load_checkpoint(args.ckpt) if args.ckpt else None
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    failed = []
    for n in names:
        case = reg[n]
        p = params if params is not None and params.nvars == case.eq.nvars and params.ndim == case.ndim else None
        if params is not None and p is None:
            log.warning("checkpoint does not fit %s; running classical only", n)
        target = out / n if len(names) > 1 else out
        rep = bench.run_case(case, p, target, scale=cfg["bench"]["scale"], cfl=cfg["bench"]["cfl"])
        _write_resolved(target / "resolved_config.json", cfg, {"command": "bench", "case": n, "ckpt": args.ckpt})
        if rep["status"] != "ok":
            failed.append(n)
        errs = {k: f"{v:.4e}" for k, v in rep.items() if k.startswith("l2_")}
        print(f"{n}: {rep['status']} {errs}")
    if failed:
        raise LdfvError(f"cases failed: {', '.join(failed)}")


def _parse_alpha(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"--alpha expects three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3:
        raise ConfigurationError("--alpha expects three values")
    return analysis.LinearizedStencil(tuple(vals))


def cmd_vonneumann(args):
    if (args.alpha is None) == (args.ckpt is None):
        raise ConfigurationError("give exactly one of --alpha or --ckpt")
    if not args.co > 0:
        raise ConfigurationError("--co must be positive")
    if args.alpha is not None:
        st = _parse_alpha(args.alpha)
    else:
        params = load_checkpoint(args.ckpt)
        if params.ndim != 1:
            raise ConfigurationError("linearization needs a 1D checkpoint")
        eq = physics.Burgers() if params.nvars == 1 else physics.Euler1D()
        base = [float(v) for v in args.base.split(",")] if args.base else ([1.0] if params.nvars == 1 else [1.0, 1.0, 1.0])
        st = analysis.linearize_network(params, base, eq)
    table = analysis.dissipation_dispersion_table(st, args.co, args.n_theta)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "abs_S", "arg_S", "exact_phase"])
        for row in table:
            w.writerow([f"{v:.16g}" for v in row])
    if args.svg:
        render.write_svg_plot(args.svg, {"|S|": (table[:, 0], table[:, 1])}, "theta", "|S|", "dissipation")
        base = Path(args.svg)
        render.write_svg_plot(base.with_name(base.stem + "_phase" + base.suffix),
                              {"arg S": (table[:, 0], table[:, 2]), "exact": (table[:, 0], table[:, 3])},
                              "theta", "phase", "dispersion")
    run = {"command": "vonneumann", "alpha": list(st.alpha), "co": args.co, "n_theta": args.n_theta, "ckpt": args.ckpt}
    _write_resolved(_beside(out), load_config(None), run)
    print(f"alpha = ({', '.join(f'{a:.6g}' for a in st.alpha)}); max |S| = {table[:, 1].max():.15g}")


def cmd_converge(args):
    cfg = load_config(args.config)
    eq = _equation(cfg)
    if eq.ndim != 1:
        raise ConfigurationError("convergence studies run on 1D equation sets")
    bc = _boundary(cfg, eq)
    c = cfg["converge"]
    params = load_checkpoint(args.ckpt) if args.ckpt else None
    variants = {"classical": _scheme(cfg)}
    if params is not None:
        variants["learned"] = _scheme(cfg, params)
    bounds = tuple(cfg["grid"]["bounds"])
    ic = lambda g: _initial_field(cfg, eq, g).data  # noqa: E731
    reference = None
    if c["reference"] == "exact":
        reference = _exact_reference(cfg, eq)
    dt_rule = None
    if c["dt_rule"] == "h2":
        g0 = make_uniform_grid(1, bounds, min(c["grids"]))
        state0 = _initial_field(cfg, eq, g0)
        dt0 = fv.cfl_dt(state0, eq, variants["classical"])
        dt_rule = lambda g: dt0 * (g.dx / g0.dx) ** 2  # noqa: E731
    rows = analysis.convergence_study(eq, ic, bc, c["grids"], c["t_end"], variants, reference, bounds,
                                      c["norm"], c["var"], dt_rule)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "n_cells", "error", "eoc"])
        for r in rows:
            w.writerow([r[0], r[1], f"{r[2]:.12g}", "" if np.isnan(r[3]) else f"{r[3]:.6g}"])
    _write_resolved(_beside(out), cfg, {"command": "converge", "ckpt": args.ckpt})
    for v in variants:
        print(f"{v}: overall EOC {analysis.overall_eoc(rows, v):.4f}")


def _exact_reference(cfg, eq):
    ic = cfg["ic"]
    if eq.kind == "advection" and ic["type"] == "sine":
        return lambda g, t: analysis.sine_cell_averages(g, shift=eq.a * t, k=ic.get("k", 1))
    if eq.kind == "euler1d" and (ic["type"] == "riemann" or ic.get("case") == "sod"):
        left = ic.get("left", [1.0, 0.0, 1.0])
        right = ic.get("right", [0.125, 0.0, 0.1])
        x0 = ic.get("x0", 0.5)

        def ref(g, t):
            edges = g.x0 + np.arange(g.nx + 1) * g.dx
            return cell_average_solution(left, right, edges, t, x0, eq.gamma)
        return ref
    raise ConfigurationError("an exact reference exists only for advected sines and 1D Riemann problems")


def cmd_dataset(args):
    if args.action != "inspect":
        raise ConfigurationError(f"unknown dataset action {args.action!r}")
    print(data.header_json(args.file))


def _flag_overrides(args, section, names):
    out = {}
    for n in names:
        v = getattr(args, n, None)
        if v is not None:
            out[f"{section}.{n}"] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ldfv", description="Learned-discretization finite-volume solver.")
    p.add_argument("--threads", type=int, default=None, help="thread cap (default LDFV_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="generate a training dataset")
    g.add_argument("config")
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--n-ic", dest="n_ic", type=int)
    g.add_argument("--n-steps", dest="n_steps", type=int)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a network on a dataset")
    t.add_argument("config")
    t.add_argument("--data", required=True)
    t.add_argument("--slip-data")
    t.add_argument("--init", help="checkpoint to start from")
    t.add_argument("-o", "--output", required=True)
    t.add_argument("--epochs", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--lr", type=float)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("simulate", help="run the solver from a config")
    s.add_argument("config")
    s.add_argument("--ckpt")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--t-end", dest="t_end", type=float)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="run a registered test case")
    b.add_argument("case")
    b.add_argument("--ckpt")
    b.add_argument("--config")
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--scale", type=int, help="divide the registered grid sizes by this factor")
    b.add_argument("--cfl", type=float)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("vonneumann", help="amplification factor table")
    v.add_argument("--alpha")
    v.add_argument("--ckpt")
    v.add_argument("--base", help="primitive base state for --ckpt linearization")
    v.add_argument("--co", type=float, required=True)
    v.add_argument("--n-theta", dest="n_theta", type=int, default=512)
    v.add_argument("--svg")
    v.add_argument("-o", "--output", required=True)
    v.set_defaults(func=cmd_vonneumann)

    c = sub.add_parser("converge", help="grid convergence study")
    c.add_argument("config")
    c.add_argument("--ckpt")
    c.add_argument("-o", "--output", required=True)
    c.set_defaults(func=cmd_converge)

    d = sub.add_parser("dataset", help="dataset utilities")
    d.add_argument("action", choices=["inspect"])
    d.add_argument("file")
    d.set_defaults(func=cmd_dataset)
    return p


def _threads(arg) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("LDFV_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError:
            raise ConfigurationError(f"LDFV_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise ConfigurationError("thread count must be >= 1")
    return n


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        n = _threads(args.threads)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        with threadpool_limits(limits=n):
            args.func(args)
    except (ConfigurationError, ShapeError, FileNotFoundError, jsonschema.ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (LdfvError, FloatingPointError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
