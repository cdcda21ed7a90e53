"""Random initial conditions and the training-pair dataset container.

Each initial condition gets its own counter-based random stream spawned from
the master seed, so a dataset is reproducible regardless of generation
order.  Trajectories are run with the classical solver on the fine grid at
a fixed step and every snapshot is subsampled onto the coarse grid.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fv, physics
from .boundary import BoundarySpec, Slip
from .errors import AdmissibilityError, ConfigurationError, ShapeError
from .grid import FORMAT_VERSION, MAGIC, Field, GridSpec, _HEADER, make_uniform_grid

EQ_TAGS = {"advection": 0, "burgers": 1, "euler1d": 2, "euler2d": 3}
BC_TAGS = {"periodic": 0, "slip": 1}
_DS_HEADER = struct.Struct("<QIIIQII")

DEFAULT_MIXTURES = {
    "advection": {"sines": 1.0},
    "burgers": {"sines": 1.0},
    "euler1d": {"f1": 0.6, "f2": 0.2, "f3": 0.2},
    "euler2d": {"f1": 0.375, "f2": 0.375, "f3": 0.25},
}


def rect(x, x0, x1):
    """Indicator of the closed interval ``[x0, x1]``."""
    if x0 > x1:
        raise ConfigurationError("rect needs x0 <= x1")
    x = np.asarray(x, dtype=np.float64)
    return ((x >= x0) & (x <= x1)).astype(np.float64)


def make_rng(seed, index: int | None = None, n: int | None = None) -> np.random.Generator:
    """Philox generator for the master seed, or for child ``index`` of ``n``."""
    ss = np.random.SeedSequence(seed)
    if index is not None:
        ss = ss.spawn(n)[index]
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------- 1D scalar

def burgers_profile(x, a, l, phi):
    """``(1 - Rect(0.15, 0.35)/2) * sum_i a_i sin(2 pi l_i x + phi_i) / 3``."""
    x = np.asarray(x, dtype=np.float64)
    s = np.zeros_like(x)
    for ai, li, pi in zip(a, l, phi):
        s = s + ai * np.sin(2.0 * np.pi * li * x + pi) / 3.0
    return (1.0 - 0.5 * rect(x, 0.15, 0.35)) * s


def gen_burgers_ic(rng, x, n_modes: int = 20):
    a = rng.uniform(-0.5, 0.5, n_modes)
    phi = rng.uniform(0.0, 2.0 * np.pi, n_modes)
    l = rng.integers(4, n_modes, size=n_modes, endpoint=True)
    return burgers_profile(x, a, l, phi)[None, :]


# ---------------------------------------------------------------- Euler 1D

def euler1d_f1(x, phi, h):
    s = lambda k: np.sin(2.0 * np.pi * x + phi[k] * np.pi)  # noqa: E731
    return np.stack([s(0) + 1.2 + h[0], s(1) + 1.0 + h[1], s(2) + 1.0 + h[2]])


def euler1d_f2(x, a, h, x0):
    r = rect(x, x0, 1.0)
    return np.stack([(a[0] - 0.5) * r + h[0] + 0.7, a[1] * r, -(a[2] - 0.5) * r + 2.0 * h[2] + 0.7])


def euler1d_f3(x, a, h, x0, x1):
    r = rect(x, min(x0, x1), max(x0, x1))
    return np.stack([a[0] * r + h[0] + 0.1, a[1] * r + h[1], a[2] * r + h[2]])


def gen_euler1d_ic(rng, x, kind: str):
    if kind == "f1":
        return euler1d_f1(x, rng.uniform(size=3), rng.uniform(size=3))
    if kind == "f2":
        return euler1d_f2(x, rng.uniform(size=3), rng.uniform(size=3), rng.uniform())
    if kind == "f3":
        a, h = rng.uniform(size=3), rng.uniform(size=3)
        while True:
            x0, x1 = rng.uniform(size=2)
            if 0.2 <= abs(x0 - x1) <= 0.8:
                return euler1d_f3(x, a, h, x0, x1)
    raise ConfigurationError(f"unknown Euler 1D initial condition {kind!r}")


# ---------------------------------------------------------------- Euler 2D

def quadrant_circle(X, Y, p):
    """Circle of radius 0.125 around the centre, then the four quadrants."""
    p = np.asarray(p, dtype=np.float64)
    out = np.where(X < 0.5, np.where(Y < 0.5, p[1], p[3]), np.where(Y < 0.5, p[2], p[4]))
    inside = np.hypot(X - 0.5, Y - 0.5) <= 0.125
    return np.where(inside, p[0], out)


def diamond(X, Y, p):
    """``p[0]`` inside the L1 ball of radius 0.2 around the centre, else ``p[1]``."""
    p = np.asarray(p, dtype=np.float64)
    return np.where(np.abs(X - 0.5) + np.abs(Y - 0.5) <= 0.2, p[0], p[1])


def euler2d_f1(X, Y, a, phi):
    sx = lambda k: np.sin(4.0 * np.pi * X + phi[k] * np.pi)  # noqa: E731
    sy = lambda k: np.sin(4.0 * np.pi * Y + phi[k] * np.pi)  # noqa: E731
    rho = a[0] * sx(0) + a[1] * sy(1) + 2.0
    u = 2.0 * (a[2] - 0.5) * sx(2) + 2.0 * (a[3] - 0.5) * sy(3)
    v = 2.0 * (a[4] - 0.5) * sx(4) + 2.0 * (a[5] - 0.5) * sy(5)
    # the same amplitude a[6] multiplies both pressure modes
    p = a[6] * sx(6) + a[6] * sy(7) + 2.0
    return np.stack([rho, u, v, p])


def euler2d_f2(X, Y, p):
    return np.stack([quadrant_circle(X, Y, 0.5 * p[0] + 0.5), quadrant_circle(X, Y, 2.0 * (p[1] - 1.0)),
                     quadrant_circle(X, Y, 2.0 * (p[2] - 1.0)), quadrant_circle(X, Y, 0.8 * p[3] + 0.2)])


def euler2d_f3(X, Y, p):
    return np.stack([diamond(X, Y, p[0] + 0.5), diamond(X, Y, 2.0 * (p[1] - 1.0)),
                     diamond(X, Y, 2.0 * (p[2] - 1.0)), diamond(X, Y, p[3] + 0.5)])


def gen_euler2d_ic(rng, X, Y, kind: str):
    if kind == "f1":
        return euler2d_f1(X, Y, rng.uniform(size=7), rng.uniform(size=8))
    if kind == "f2":
        return euler2d_f2(X, Y, rng.uniform(size=(4, 5)))
    if kind == "f3":
        return euler2d_f3(X, Y, rng.uniform(size=(4, 2)))
    raise ConfigurationError(f"unknown Euler 2D initial condition {kind!r}")


def make_equation(kind: str, gamma: float = 1.4, a: float = 1.0) -> physics.EquationSet:
    return physics.EquationSet(kind, a=a, gamma=gamma)


def gen_initial_condition(eq: physics.EquationSet, grid: GridSpec, rng, kind: str):
    """Primitive initial state ``(nvars, ny, nx)``."""
    if eq.kind in ("burgers", "advection"):
        return gen_burgers_ic(rng, grid.x_centers())[:, None, :]
    if eq.kind == "euler1d":
        return gen_euler1d_ic(rng, grid.x_centers(), kind)[:, None, :]
    X, Y = grid.mesh()
    return gen_euler2d_ic(rng, X, Y, kind)


def mixture_counts(weights: dict, n_ic: int) -> dict:
    """Largest-remainder allocation of ``n_ic`` draws over the mixture."""
    names = list(weights)
    w = np.array([weights[k] for k in names], dtype=np.float64)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ConfigurationError("mixture weights must be non-negative and sum to 1")
    exact = w * n_ic
    counts = np.floor(exact).astype(int)
    rem = n_ic - counts.sum()
    order = sorted(range(len(names)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:rem]:
        counts[i] += 1
    return {k: int(c) for k, c in zip(names, counts)}


# ---------------------------------------------------------------- dataset

@dataclass
class DatasetSpec:
    eq: str = "burgers"
    nx: int = 256
    R: int = 2
    n_ic: int = 5
    n_steps: int = 2000
    bc: str = "periodic"
    seed: int = 0
    cfl: float = 0.4
    gamma: float = 1.4
    mixture: dict | None = None
    max_redraws: int = 100

    def __post_init__(self):
        if self.eq not in EQ_TAGS:
            raise ConfigurationError(f"unknown equation {self.eq!r}")
        if self.bc not in BC_TAGS:
            raise ConfigurationError(f"dataset bc must be one of {sorted(BC_TAGS)}")
        if self.n_ic < 1 or self.n_steps < 1:
            raise ConfigurationError("n_ic and n_steps must be >= 1")
        if self.R < 2 or self.nx % self.R:
            raise ConfigurationError(f"R={self.R} must be >= 2 and divide nx={self.nx}")
        if self.mixture is None:
            self.mixture = dict(DEFAULT_MIXTURES[self.eq])
        mixture_counts(self.mixture, self.n_ic)

    def equation(self) -> physics.EquationSet:
        return make_equation(self.eq, self.gamma)

    def fine_grid(self) -> GridSpec:
        if self.eq == "euler2d":
            return make_uniform_grid(2, ((0.0, 1.0), (0.0, 1.0)), (self.nx, self.nx))
        return make_uniform_grid(1, (0.0, 1.0), self.nx)

    def boundary(self) -> BoundarySpec:
        ndim = 2 if self.eq == "euler2d" else 1
        return BoundarySpec.periodic(ndim) if self.bc == "periodic" else BoundarySpec.uniform(Slip(), ndim)


@dataclass
class Dataset:
    eq: physics.EquationSet
    grid: GridSpec
    bc_name: str
    R: int
    seed: int
    n_ic: int
    n_steps: int
    inputs: np.ndarray
    targets: np.ndarray
    dts: np.ndarray
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.n_ic * self.n_steps
        shape = (n, self.eq.nvars) + self.grid.shape
        if self.inputs.shape != shape or self.targets.shape != shape or self.dts.shape != (n,):
            raise ShapeError(f"dataset arrays do not match {shape}")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def bc(self) -> BoundarySpec:
        ndim = self.grid.ndim
        return BoundarySpec.periodic(ndim) if self.bc_name == "periodic" else BoundarySpec.uniform(Slip(), ndim)

    @property
    def ic_index(self) -> np.ndarray:
        return np.arange(len(self)) // self.n_steps

    def header(self) -> dict:
        return {
            "magic": MAGIC.decode(), "version": FORMAT_VERSION, "ndim": self.grid.ndim, "nvars": self.eq.nvars,
            "nx": self.grid.nx, "ny": self.grid.ny, "dx": self.grid.dx, "dy": self.grid.dy,
            "samples": len(self), "R": self.R, "eq": self.eq.kind, "bc": self.bc_name, "seed": self.seed,
            "n_ic": self.n_ic, "n_steps": self.n_steps,
        }

    def to_bytes(self) -> bytes:
        g = self.grid
        parts = [
            _HEADER.pack(MAGIC, FORMAT_VERSION, g.ndim, self.eq.nvars, g.nx, g.ny, g.dx, g.dy),
            _DS_HEADER.pack(len(self), self.R, EQ_TAGS[self.eq.kind], BC_TAGS[self.bc_name], self.seed,
                            self.n_ic, self.n_steps),
        ]
        for k in range(len(self)):
            parts.append(struct.pack("<d", self.dts[k]))
            parts.append(np.ascontiguousarray(self.inputs[k], dtype="<f8").tobytes())
            parts.append(np.ascontiguousarray(self.targets[k], dtype="<f8").tobytes())
        return b"".join(parts)


def _parse_headers(buf: bytes):
    if len(buf) < _HEADER.size + _DS_HEADER.size:
        raise ShapeError("dataset file is truncated")
    magic, version, ndim, nvars, nx, ny, dx, dy = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC or version != FORMAT_VERSION:
        raise ShapeError("not a dataset file of a supported version")
    count, R, eq_tag, bc_tag, seed, n_ic, n_steps = _DS_HEADER.unpack_from(buf, _HEADER.size)
    eq_kind = {v: k for k, v in EQ_TAGS.items()}.get(eq_tag)
    bc_name = {v: k for k, v in BC_TAGS.items()}.get(bc_tag)
    if eq_kind is None or bc_name is None:
        raise ShapeError("unknown equation or boundary tag in dataset header")
    head = {"magic": magic.decode(), "version": version, "ndim": ndim, "nvars": nvars, "nx": nx, "ny": ny,
            "dx": dx, "dy": dy, "samples": count, "R": R, "eq": eq_kind, "bc": bc_name, "seed": seed,
            "n_ic": n_ic, "n_steps": n_steps}
    return head, _HEADER.size + _DS_HEADER.size


def inspect_dataset(path) -> dict:
    with open(path, "rb") as fh:
        buf = fh.read(_HEADER.size + _DS_HEADER.size)
    return _parse_headers(buf)[0]


def dataset_from_bytes(buf: bytes, gamma: float = 1.4) -> Dataset:
    head, off = _parse_headers(buf)
    ndim, nvars, nx, ny = head["ndim"], head["nvars"], head["nx"], head["ny"]
    grid = GridSpec(ndim, nx, ny, 0.0, nx * head["dx"], 0.0, ny * head["dy"] if ndim == 2 else 1.0)
    n = head["samples"]
    per = nvars * ny * nx
    rec = np.dtype([("dt", "<f8"), ("inp", "<f8", (per,)), ("tgt", "<f8", (per,))])
    if len(buf) - off != n * rec.itemsize:
        raise ShapeError(f"dataset payload has {len(buf) - off} bytes, expected {n * rec.itemsize}")
    arr = np.frombuffer(buf, dtype=rec, count=n, offset=off)
    shape = (n, nvars, ny, nx)
    eq = make_equation(head["eq"], gamma)
    return Dataset(eq, grid, head["bc"], head["R"], head["seed"], head["n_ic"], head["n_steps"],
                   arr["inp"].reshape(shape).astype(np.float64), arr["tgt"].reshape(shape).astype(np.float64),
                   arr["dt"].astype(np.float64))


def write_dataset(path, ds: Dataset) -> None:
    Path(path).write_bytes(ds.to_bytes())


def read_dataset(path, gamma: float = 1.4) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes(), gamma)


def _trajectory(w0, grid, bc, eq, scheme, dt, n_steps):
    """Fixed-step fine trajectory ``(n_steps + 1, nvars, ny, nx)``; raises
    :class:`AdmissibilityError` when the state degenerates or the Courant
    number exceeds one."""
    out = np.empty((n_steps + 1,) + w0.shape)
    out[0] = w0
    w = w0
    for k in range(n_steps):
        f = Field(grid, w)
        if dt > fv.cfl_dt(f, eq, scheme) / scheme.cfl:
            raise AdmissibilityError("fixed step exceeds the stability bound", step=k)
        w = fv.step_array(w, grid, bc, eq, scheme, dt)
        out[k + 1] = w
    return out


def build_dataset(spec: DatasetSpec) -> Dataset:
    """Generate ``n_ic * n_steps`` coarse training pairs."""
    eq = spec.equation()
    fine = spec.fine_grid()
    coarse = fine.coarsen(spec.R)
    bc = spec.boundary()
    scheme = fv.SchemeConfig(cfl=spec.cfl)
    counts = mixture_counts(spec.mixture, spec.n_ic)
    kinds = [k for k, c in counts.items() for _ in range(c)]
    kinds = [kinds[i] for i in make_rng(spec.seed, spec.n_ic, spec.n_ic + 1).permutation(spec.n_ic)]
    off = spec.R // 2
    n = spec.n_ic * spec.n_steps
    shape = (eq.nvars,) + coarse.shape
    inputs = np.empty((n,) + shape)
    targets = np.empty((n,) + shape)
    dts = np.empty(n)
    redraws = 0
    for i, kind in enumerate(kinds):
        rng = make_rng(spec.seed, i, spec.n_ic + 1)
        for attempt in range(spec.max_redraws + 1):
            u0 = gen_initial_condition(eq, fine, rng, kind)
            if not physics.admissible_mask(eq, u0).all():
                redraws += 1
                continue
            w0 = physics.primitive_to_conserved(eq, u0)
            dt = fv.cfl_dt(Field(fine, w0), eq, scheme)
            try:
                traj = _trajectory(w0, fine, bc, eq, scheme, dt, spec.n_steps)
            except AdmissibilityError:
                redraws += 1
                continue
            break
        else:
            raise ConfigurationError(f"initial condition {i} failed after {spec.max_redraws} redraws")
        sub = traj[:, :, off::spec.R, off::spec.R] if fine.ndim == 2 else traj[:, :, :, off::spec.R]
        sl = slice(i * spec.n_steps, (i + 1) * spec.n_steps)
        inputs[sl] = sub[:-1]
        targets[sl] = sub[1:]
        dts[sl] = dt
    stats = {"redraws": redraws, "kinds": kinds}
    return Dataset(eq, coarse, spec.bc, spec.R, spec.seed, spec.n_ic, spec.n_steps, inputs, targets, dts, stats)


def header_json(path) -> str:
    return json.dumps(inspect_dataset(path), indent=2, sort_keys=True)
