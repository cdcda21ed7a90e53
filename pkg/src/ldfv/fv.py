"""Second-order MUSCL finite-volume scheme with a Rusanov flux.

Reconstruction runs on primitive variables, dimension by dimension, and the
2D update is unsplit.  Slopes are *undivided* increments: the classical
scheme uses the forward difference ``u[i+1] - u[i]`` where the learned
scheme uses ``alpha . (u[i-1], u[i], u[i+1])``, so the stencil
``(0, -1, 1)`` reproduces the classical scheme exactly.

The limited slope uses the division-free van Albada form

    phi_i * dp = (dm*dp + eps) * (dm + dp) / (dm**2 + dp**2 + 2*eps)

with ``dm``/``dp`` the backward/forward increments, which equals
``van_albada(dm/dp) * dp`` away from zero denominators and stays smooth at
``dp = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import autodiff as ad
from . import physics
from .boundary import BoundarySpec, Periodic, SolidMask, pad_primitive
from .errors import AdmissibilityError, ConfigurationError, ShapeError
from .grid import Field, GridSpec, read_field, write_field
from .physics import EquationSet

ALPHA_BASE = (0.0, -1.0, 1.0)


@dataclass
class SchemeConfig:
    cfl: float = 0.4
    limiter_on: bool = True
    reconstruction: Any = None
    eps_ratio: float = 1e-14
    dt_max: float = 1e-2

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigurationError(f"cfl must be in (0, 1], got {self.cfl}")
        if not self.eps_ratio > 0:
            raise ConfigurationError("eps_ratio must be positive")

    @property
    def learned(self) -> bool:
        return self.reconstruction is not None


@dataclass(frozen=True)
class InterfaceStates:
    left: Any
    right: Any


def van_albada(r):
    r = np.asarray(r, dtype=np.float64)
    return (r * r + r) / (r * r + 1.0)


def limited_slope(dm, dp, eps: float = 1e-14):
    """``van_albada(dm/dp) * dp`` in its smooth division-free form."""
    return (dm * dp + eps) * (dm + dp) / (dm * dm + dp * dp + 2.0 * eps)


def _s(axis: int, sl):
    return (Ellipsis, sl) if axis == 0 else (Ellipsis, sl, slice(None))


def _traces(u, d, d0: int, g: int, n: int, axis: int, limiter_on: bool, eps: float):
    """Interface traces from padded ``u`` and per-cell increments ``d``.

    ``d[k]`` belongs to padded cell ``k + d0``.  Returns primitive traces at
    the ``n + 1`` faces bounding the interior cells.
    """
    dm = d[_s(axis, slice(g - 2 - d0, g + n - d0))]
    dp = d[_s(axis, slice(g - 1 - d0, g + n + 1 - d0))]
    s = limited_slope(dm, dp, eps) if limiter_on else dp
    uL = u[_s(axis, slice(g - 1, g + n))] + 0.5 * s[_s(axis, slice(0, n + 1))]
    uR = u[_s(axis, slice(g, g + n + 1))] - 0.5 * s[_s(axis, slice(1, n + 2))]
    return InterfaceStates(uL, uR)


def muscl_reconstruct_classical(u_pad, g: int = 2, axis: int = 0, limiter_on: bool = True, eps: float = 1e-14):
    """Traces from padded primitive lines along ``axis`` (needs ``g >= 2``)."""
    if g < 2:
        raise ConfigurationError("classical MUSCL needs two ghost layers")
    u_pad = u_pad if ad.is_var(u_pad) else np.asarray(u_pad, dtype=np.float64)
    n = u_pad.shape[-1 - axis] - 2 * g
    d = u_pad[_s(axis, slice(1, None))] - u_pad[_s(axis, slice(None, -1))]
    return _traces(u_pad, d, 0, g, n, axis, limiter_on, eps)


def muscl_reconstruct_learned(u_pad, dhat_pad, g: int = 2, axis: int = 0, limiter_on: bool = True, eps: float = 1e-14):
    """Traces using learned increments given on the same padded cells as ``u_pad``."""
    if tuple(dhat_pad.shape) != tuple(np.shape(u_pad)):
        raise ShapeError(f"increment shape {dhat_pad.shape} does not match {np.shape(u_pad)}")
    n = u_pad.shape[-1 - axis] - 2 * g
    return _traces(u_pad, dhat_pad, 0, g, n, axis, limiter_on, eps)


def stencil_increment(u_pad, alpha_pad, axis: int = 0):
    """``alpha[0]*u[i-1] + alpha[1]*u[i] + alpha[2]*u[i+1]`` for padded cells
    ``1 .. N-2`` along ``axis``.  ``alpha_pad`` is ``(3, *u_pad.shape)``."""
    um = u_pad[_s(axis, slice(0, -2))]
    u0 = u_pad[_s(axis, slice(1, -1))]
    up = u_pad[_s(axis, slice(2, None))]
    a_m = alpha_pad[0][_s(axis, slice(1, -1))]
    a_0 = alpha_pad[1][_s(axis, slice(1, -1))]
    a_p = alpha_pad[2][_s(axis, slice(1, -1))]
    return a_m * um + a_0 * u0 + a_p * up


def _rusanov_prim(eq: EquationSet, uL, uR, axis: int):
    wL = physics.primitive_to_conserved(eq, uL, check=False)
    wR = physics.primitive_to_conserved(eq, uR, check=False)
    fL = physics.flux_primitive(eq, uL, wL, axis)
    fR = physics.flux_primitive(eq, uR, wR, axis)
    speed = ad.maximum(physics.wave_speed_primitive(eq, uL, axis), physics.wave_speed_primitive(eq, uR, axis))
    return 0.5 * (fL + fR) - 0.5 * speed * (wR - wL)


def rusanov_flux(eq: EquationSet, wL, wR, axis: int = 0):
    """Local Lax-Friedrichs flux between conserved states ``wL`` and ``wR``."""
    uL = physics.conserved_to_primitive(eq, wL)
    uR = physics.conserved_to_primitive(eq, wR)
    return _rusanov_prim(eq, uL, uR, axis)


def _pad_alpha(alpha, bc: BoundarySpec, g: int, axis: int):
    """Extend interior stencil coefficients ``(3, nvars, ..., ny, nx)`` by
    ``g`` cells along ``axis``: wrapped for periodic sides, the base stencil
    elsewhere."""
    lo, hi = (bc.left, bc.right) if axis == 0 else (bc.bottom, bc.top)
    n = alpha.shape[-1 - axis]
    ax = alpha.ndim - 1 - axis
    if isinstance(lo, Periodic):
        left = alpha[_s(axis, slice(n - g, n))]
        right = alpha[_s(axis, slice(0, g))]
    else:
        shape = list(alpha.shape)
        shape[ax] = g
        base = np.broadcast_to(np.asarray(ALPHA_BASE).reshape((3,) + (1,) * (alpha.ndim - 1)), shape)
        left = right = np.array(base)
    return ad.concatenate([left, alpha, right], axis=ax)


def _check_traces(eq, tr: InterfaceStates):
    for side in (tr.left, tr.right):
        physics.check_primitive(eq, side)


def step_array(w, grid: GridSpec, bc: BoundarySpec, eq: EquationSet, cfg: SchemeConfig, dt: float,
               coeffs=None, solid: SolidMask | None = None, check: bool = True):
    """One explicit Euler step on conserved data ``(nvars, *batch, ny, nx)``.

    ``coeffs`` holds total stencil coefficients ``(ndim, 3, nvars, *batch,
    ny, nx)`` (numpy or Var); ``None`` selects the classical forward
    difference.  Returns the new conserved array (a Var when ``coeffs`` is).
    """
    ndim = grid.ndim
    u = physics.conserved_to_primitive(eq, w, check=check)
    g = 2 if coeffs is None else 3
    up = pad_primitive(ad.value(u), bc, g, eq, ndim)
    widths = (grid.dx, grid.dy)
    total = None
    ny, nx = grid.ny, grid.nx
    for axis in range(ndim):
        src = solid.fill(up, axis, g, eq) if solid is not None else up
        if ndim == 2:
            # keep interior lines in the transverse direction
            lines = src[..., g:g + ny, :] if axis == 0 else src[..., :, g:g + nx]
        else:
            lines = src
        n = nx if axis == 0 else ny
        if coeffs is None:
            d = lines[_s(axis, slice(1, None))] - lines[_s(axis, slice(None, -1))]
            tr = _traces(lines, d, 0, g, n, axis, cfg.limiter_on, cfg.eps_ratio)
        else:
            alpha = _pad_alpha(coeffs[axis], bc, g, axis)
            d = stencil_increment(lines, alpha, axis)
            tr = _traces(lines, d, 1, g, n, axis, cfg.limiter_on, cfg.eps_ratio)
        if check:
            _check_traces(eq, tr)
        F = _rusanov_prim(eq, tr.left, tr.right, axis)
        diff = F[_s(axis, slice(1, None))] - F[_s(axis, slice(None, -1))]
        term = (dt / widths[axis]) * diff
        total = term if total is None else total + term
    w_new = w - total
    if solid is not None:
        w_new = ad.where(solid.mask, w, w_new)
    if check:
        physics.conserved_to_primitive(eq, w_new, check=True)
    return w_new


def _coeffs_for(cfg: SchemeConfig, w, grid, bc, eq, solid=None):
    if cfg.reconstruction is None:
        return None
    u = physics.conserved_to_primitive(eq, w)
    return cfg.reconstruction.coefficients(u, grid, bc, eq, solid=solid)


def step(state: Field, bc: BoundarySpec, eq: EquationSet, cfg: SchemeConfig, dt: float,
         solid: SolidMask | None = None) -> Field:
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    coeffs = _coeffs_for(cfg, state.data, state.grid, bc, eq, solid)
    w_new = step_array(state.data, state.grid, bc, eq, cfg, dt, coeffs=coeffs, solid=solid)
    return Field(state.grid, w_new)


def cfl_dt(state: Field, eq: EquationSet, cfg: SchemeConfig) -> float:
    grid = state.grid
    u = physics.conserved_to_primitive(eq, state.data)
    sx = float(np.max(physics.wave_speed_primitive(eq, u, 0)))
    if grid.ndim == 1:
        rate = sx / grid.dx
    else:
        sy = float(np.max(physics.wave_speed_primitive(eq, u, 1)))
        rate = sx / grid.dx + sy / grid.dy
    if rate <= 0:
        return cfg.dt_max
    return cfg.cfl / rate


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    fields: list = field(default_factory=list)

    @property
    def final(self) -> Field:
        return self.fields[-1]

    def _record(self, t, n, f):
        self.times.append(t)
        self.steps.append(n)
        self.fields.append(f)


def simulate(state0: Field, bc: BoundarySpec, eq: EquationSet, cfg: SchemeConfig, t_end: float,
             fixed_dt: float | None = None, save_times=None, solid: SolidMask | None = None,
             max_steps: int | None = None, callback: Callable | None = None) -> Trajectory:
    """Integrate to ``t_end``, landing exactly on ``t_end`` and on every
    requested ``save_times`` entry.  The initial and final states are always
    recorded."""
    if t_end < 0:
        raise ConfigurationError("t_end must be non-negative")
    bc.validate(eq)
    traj = Trajectory()
    traj._record(0.0, 0, state0)
    targets = sorted(t for t in (save_times or []) if 0.0 < t < t_end) + [t_end]
    tol = 1e-12 * max(t_end, 1.0)
    t, n, state = 0.0, 0, state0
    for target in targets:
        while t < target - tol:
            if max_steps is not None and n >= max_steps:
                return traj
            dt = fixed_dt if fixed_dt is not None else cfl_dt(state, eq, cfg)
            dt = min(dt, target - t)
            try:
                state = step(state, bc, eq, cfg, dt, solid=solid)
            except AdmissibilityError as exc:
                raise exc.with_step(n, t) from None
            t = target if abs(target - (t + dt)) <= tol else t + dt
            n += 1
            if callback is not None:
                callback(n, t, state)
        if target > 0.0:
            traj._record(t, n, state)
    return traj


def run_steps(state0: Field, bc: BoundarySpec, eq: EquationSet, cfg: SchemeConfig, dt: float, n_steps: int,
              solid: SolidMask | None = None) -> list:
    """``n_steps`` fixed-size steps; returns all ``n_steps + 1`` states."""
    out = [state0]
    state = state0
    for n in range(n_steps):
        try:
            state = step(state, bc, eq, cfg, dt, solid=solid)
        except AdmissibilityError as exc:
            raise exc.with_step(n, n * dt) from None
        out.append(state)
    return out


def total_mass(field_: Field) -> np.ndarray:
    """Compensated per-variable sum of cell averages."""
    return np.array([math.fsum(v.ravel()) for v in field_.data])


def write_trajectory(traj: Trajectory, out_dir, prefix: str = "snapshot") -> dict:
    """Write each snapshot as a Field file plus an ``index.json`` sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, f in enumerate(traj.fields):
        name = f"{prefix}_{k:05d}.ldfv"
        write_field(out / name, f)
        files.append(name)
    index = {"times": [float(t) for t in traj.times], "steps": [int(n) for n in traj.steps], "files": files}
    (out / "index.json").write_text(json.dumps(index, indent=2) + "\n")
    return index


def read_trajectory(out_dir) -> Trajectory:
    out = Path(out_dir)
    index = json.loads((out / "index.json").read_text())
    traj = Trajectory()
    for t, n, name in zip(index["times"], index["steps"], index["files"]):
        traj._record(t, n, read_field(out / name))
    return traj
