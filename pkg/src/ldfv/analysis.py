"""Linear stability of stencil schemes and grid-convergence studies.

The amplification factor is that of one explicit step of the upwind MUSCL
scheme for ``u_t + a u_x = 0`` with the limiter frozen to one and the
undivided increment ``alpha[-1] u[j-1] + alpha[0] u[j] + alpha[1] u[j+1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fv, physics
from .boundary import BoundarySpec, pad_primitive
from .errors import ConfigurationError
from .grid import Field, GridSpec, l1_error, l2_error, make_uniform_grid, project_fine_to_coarse
from .model import LearnedReconstruction, NetworkParams


@dataclass(frozen=True)
class LinearizedStencil:
    alpha: tuple
    base: tuple = ()

    def __post_init__(self):
        a = tuple(float(v) for v in self.alpha)
        if len(a) != 3:
            raise ConfigurationError("stencil needs three coefficients")
        if abs(math.fsum(a)) > 1e-10:
            raise ConfigurationError(f"stencil coefficients must sum to zero, got {math.fsum(a)}")
        object.__setattr__(self, "alpha", a)


def _alpha_of(st):
    return st.alpha if isinstance(st, LinearizedStencil) else tuple(float(v) for v in st)


def amplification_factor(st, Co, theta):
    """Complex one-step multiplier of Fourier mode ``theta``."""
    am, _, ap = _alpha_of(st)
    theta = np.asarray(theta, dtype=np.float64)
    e = np.exp(-1j * theta)
    return 1.0 - Co * (1.0 - e) * (1.0 + 0.5 * (am * (e - 1.0) + ap * (np.conj(e) - 1.0)))


def dissipation_dispersion_table(st, Co, n_theta: int = 512) -> np.ndarray:
    """Rows ``(theta, |S|, arg S, -Co*theta)`` on a uniform sweep of ``[0, pi]``."""
    if n_theta < 2:
        raise ConfigurationError("n_theta must be >= 2")
    theta = np.linspace(0.0, np.pi, n_theta)
    S = amplification_factor(st, Co, theta)
    return np.stack([theta, np.abs(S), np.angle(S), -Co * theta], axis=1)


class FixedStencil:
    """Reconstruction plug-in applying one constant stencil everywhere."""

    def __init__(self, alpha):
        self.alpha = np.asarray(_alpha_of(alpha), dtype=np.float64)

    def coefficients(self, u, grid, bc, eq, solid=None):
        shape = (grid.ndim, 3) + tuple(np.shape(u))
        return np.broadcast_to(self.alpha.reshape((1, 3) + (1,) * np.ndim(u)), shape).copy()


def empirical_amplification(alpha, Co: float, n: int = 64, seed: int = 0):
    """Measured ``(theta_k, |S_k|)`` for modes ``k = 1 .. n/2`` from one step
    of linear advection with a frozen limiter on a periodic grid."""
    eq = physics.LinearAdvection(1.0)
    grid = make_uniform_grid(1, (0.0, 1.0), n)
    u0 = np.random.default_rng(seed).standard_normal(n)
    cfg = fv.SchemeConfig(cfl=min(Co, 1.0), limiter_on=False, reconstruction=FixedStencil(alpha))
    out = fv.step(Field(grid, u0), BoundarySpec.periodic(), eq, cfg, Co * grid.dx)
    k = np.arange(1, n // 2 + 1)
    ratio = np.fft.fft(out.data[0, 0])[k] / np.fft.fft(u0)[k]
    return 2.0 * np.pi * k / n, ratio


def _increments(params, u, bc, eq, grid, var):
    recon = LearnedReconstruction(params)
    alpha = recon.coefficients(u, grid, bc, eq)[0]
    up = pad_primitive(u, bc, 1, eq, 1)
    a_pad = fv._pad_alpha(alpha, bc, 1, 0)
    return fv.stencil_increment(up, a_pad, 0)[var, 0]


def linearize_network(params: NetworkParams, base, eq, n: int = 16, var: int = 0, rel_delta: float = 1e-4):
    """Effective stencil of the learned increment operator around a constant state.

    ``base`` is a primitive state vector (or a constant Field).  A cell is
    perturbed by ``+-delta`` and the centred response of the increments at
    that cell and its neighbours gives the stencil; the mean is removed so
    the weights sum to zero exactly.
    """
    if isinstance(base, Field):
        d = base.data
        if np.ptp(d, axis=(1, 2)).max() > 0:
            raise ConfigurationError("linearization needs a constant base field")
        base = physics.conserved_to_primitive(eq, d[:, 0, 0])
    base = np.asarray(base, dtype=np.float64).reshape(-1)
    if base.shape != (eq.nvars,):
        raise ConfigurationError(f"base state needs {eq.nvars} primitive values")
    physics.check_primitive(eq, base)
    if eq.ndim != 1:
        raise ConfigurationError("linearization is implemented for 1D equation sets")
    grid = make_uniform_grid(1, (0.0, 1.0), n)
    bc = BoundarySpec.periodic()
    scale = max(abs(base[var]), 1.0)
    delta = rel_delta * scale
    m = n // 2
    u = np.broadcast_to(base.reshape(-1, 1, 1), (eq.nvars, 1, n)).copy()
    resp = []
    for sgn in (1.0, -1.0):
        up = u.copy()
        up[var, 0, m] += sgn * delta
        resp.append(_increments(params, up, bc, eq, grid, var))
    R = (resp[0] - resp[1]) / (2.0 * delta)
    a = np.array([R[m + 1], R[m], R[m - 1]])
    a = a - a.mean()
    return LinearizedStencil(tuple(a), tuple(base))


def convergence_study(eq, ic, bc: BoundarySpec, grids, t_end: float, variants=None, reference=None,
                      bounds=(0.0, 1.0), norm: str = "l2", var: int | None = None, dt_rule=None):
    """Errors and EOCs over a ladder of 1D grids.

    ``ic(grid)`` returns conserved data.  ``reference`` is either ``None``
    (the finest classical run, projected) or ``reference(grid, t)``
    returning conserved data.  ``var`` restricts the error to one variable.
    ``dt_rule(grid)`` fixes the step size per grid (for example ``dt ~ h**2``
    to isolate the spatial order); by default steps follow the CFL bound.
    Returns rows ``(variant, n_cells, error, eoc)``.
    """
    grids = sorted(int(g) for g in grids)
    if len(grids) < 2:
        raise ConfigurationError("need at least two grids")
    variants = variants or {"classical": fv.SchemeConfig()}
    err_fn = {"l2": l2_error, "l1": l1_error}[norm]
    ref_field = None
    if reference is None:
        gf = make_uniform_grid(1, bounds, grids[-1])
        ref_field = fv.simulate(Field(gf, ic(gf)), bc, eq, fv.SchemeConfig(), t_end,
                                fixed_dt=None if dt_rule is None else dt_rule(gf)).final
    rows = []
    for name, cfg in variants.items():
        prev = None
        for n in grids:
            g = make_uniform_grid(1, bounds, n)
            sol = fv.simulate(Field(g, ic(g)), bc, eq, cfg, t_end,
                              fixed_dt=None if dt_rule is None else dt_rule(g)).final
            if reference is None:
                R = grids[-1] // n
                ref = ref_field.data if R == 1 else project_fine_to_coarse(ref_field, R).data
            else:
                ref = np.asarray(reference(g, t_end), dtype=np.float64).reshape(sol.data.shape)
            a, b = (sol.data, ref) if var is None else (sol.data[var], ref[var])
            e = err_fn(a, b)
            eoc = float("nan") if prev is None or e == 0 else math.log2(prev[1] / e) / math.log2(n / prev[0])
            rows.append((name, n, e, eoc))
            prev = (n, e)
    return rows


def overall_eoc(rows, variant: str = "classical") -> float:
    pts = [(n, e) for v, n, e, _ in rows if v == variant]
    (n0, e0), (n1, e1) = pts[0], pts[-1]
    return math.log2(e0 / e1) / math.log2(n1 / n0)


def sine_cell_averages(grid: GridSpec, shift: float = 0.0, k: int = 1):
    """Cell averages of ``sin(2 pi k (x - shift))``."""
    edges = grid.x0 + np.arange(grid.nx + 1) * grid.dx
    w = 2.0 * np.pi * k
    return (-np.cos(w * (edges[1:] - shift)) + np.cos(w * (edges[:-1] - shift))) / (w * grid.dx)
