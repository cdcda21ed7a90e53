"""Exact solution of the 1D Euler Riemann problem for an ideal gas.

Newton iteration on the star-region pressure followed by self-similar
sampling of the wave fan.  Used as an independent reference for shock-tube
tests and convergence studies.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError


def _pressure_function(p, rho, pk, ck, gamma):
    """Velocity jump across a left/right wave and its derivative in ``p``."""
    if p > pk:
        A = 2.0 / ((gamma + 1.0) * rho)
        B = (gamma - 1.0) / (gamma + 1.0) * pk
        sq = np.sqrt(A / (p + B))
        f = (p - pk) * sq
        df = sq * (1.0 - 0.5 * (p - pk) / (B + p))
    else:
        pr = p / pk
        f = 2.0 * ck / (gamma - 1.0) * (pr ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)
        df = 1.0 / (rho * ck) * pr ** (-(gamma + 1.0) / (2.0 * gamma))
    return f, df


def star_state(left, right, gamma: float = 1.4, tol: float = 1e-14, max_iter: int = 200):
    """Star pressure and velocity for primitive states ``(rho, u, p)``."""
    rl, ul, pl = (float(v) for v in left)
    rr, ur, pr = (float(v) for v in right)
    if min(rl, pl, rr, pr) <= 0:
        raise ConfigurationError("Riemann data needs positive density and pressure")
    cl = np.sqrt(gamma * pl / rl)
    cr = np.sqrt(gamma * pr / rr)
    if 2.0 * (cl + cr) / (gamma - 1.0) <= ur - ul:
        raise ConfigurationError("initial data generate a vacuum")
    # two-rarefaction guess, clipped away from zero
    z = (gamma - 1.0) / (2.0 * gamma)
    p = ((cl + cr - 0.5 * (gamma - 1.0) * (ur - ul)) / (cl / pl**z + cr / pr**z)) ** (1.0 / z)
    p = max(p, 1e-12)
    for _ in range(max_iter):
        fl, dl = _pressure_function(p, rl, pl, cl, gamma)
        fr, dr = _pressure_function(p, rr, pr, cr, gamma)
        p_new = p - (fl + fr + ur - ul) / (dl + dr)
        p_new = max(p_new, 1e-14)
        if abs(p_new - p) <= tol * 0.5 * (p_new + p):
            p = p_new
            break
        p = p_new
    fl, _ = _pressure_function(p, rl, pl, cl, gamma)
    fr, _ = _pressure_function(p, rr, pr, cr, gamma)
    u = 0.5 * (ul + ur) + 0.5 * (fr - fl)
    return p, u


def sample(left, right, xi, gamma: float = 1.4):
    """Primitive solution ``(3, len(xi))`` at similarity coordinates ``xi = x/t``."""
    rl, ul, pl = (float(v) for v in left)
    rr, ur, pr = (float(v) for v in right)
    ps, us = star_state(left, right, gamma)
    cl = np.sqrt(gamma * pl / rl)
    cr = np.sqrt(gamma * pr / rr)
    gm, gp = gamma - 1.0, gamma + 1.0
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    out = np.empty((3, xi.size))
    for k, s in enumerate(xi):
        if s <= us:
            if ps > pl:
                sl = ul - cl * np.sqrt(gp / (2 * gamma) * ps / pl + gm / (2 * gamma))
                if s <= sl:
                    out[:, k] = (rl, ul, pl)
                else:
                    rho = rl * (ps / pl + gm / gp) / (gm / gp * ps / pl + 1.0)
                    out[:, k] = (rho, us, ps)
            else:
                cs = cl * (ps / pl) ** (gm / (2 * gamma))
                if s <= ul - cl:
                    out[:, k] = (rl, ul, pl)
                elif s >= us - cs:
                    out[:, k] = (rl * (ps / pl) ** (1.0 / gamma), us, ps)
                else:
                    c = 2.0 / gp * (cl + 0.5 * gm * (ul - s))
                    u = 2.0 / gp * (cl + 0.5 * gm * ul + s)
                    rho = rl * (c / cl) ** (2.0 / gm)
                    out[:, k] = (rho, u, pl * (c / cl) ** (2 * gamma / gm))
        else:
            if ps > pr:
                sr = ur + cr * np.sqrt(gp / (2 * gamma) * ps / pr + gm / (2 * gamma))
                if s >= sr:
                    out[:, k] = (rr, ur, pr)
                else:
                    rho = rr * (ps / pr + gm / gp) / (gm / gp * ps / pr + 1.0)
                    out[:, k] = (rho, us, ps)
            else:
                cs = cr * (ps / pr) ** (gm / (2 * gamma))
                if s >= ur + cr:
                    out[:, k] = (rr, ur, pr)
                elif s <= us + cs:
                    out[:, k] = (rr * (ps / pr) ** (1.0 / gamma), us, ps)
                else:
                    c = 2.0 / gp * (cr - 0.5 * gm * (ur - s))
                    u = 2.0 / gp * (-cr + 0.5 * gm * ur + s)
                    rho = rr * (c / cr) ** (2.0 / gm)
                    out[:, k] = (rho, u, pr * (c / cr) ** (2 * gamma / gm))
    return out


def cell_average_solution(left, right, x_edges, t: float, x_interface: float = 0.5,
                          gamma: float = 1.4, n_sub: int = 16):
    """Conserved cell averages of the exact solution by midpoint sub-sampling.

    Returns ``(3, ncells)`` conserved values ``(rho, rho*u, E)``.
    """
    x_edges = np.asarray(x_edges, dtype=np.float64)
    nc = x_edges.size - 1
    frac = (np.arange(n_sub) + 0.5) / n_sub
    xs = x_edges[:-1, None] + frac[None, :] * np.diff(x_edges)[:, None]
    if t <= 0:
        xi_u = np.where(xs.ravel() < x_interface, -np.inf, np.inf)
        prim = np.where(xi_u < 0, np.asarray(left, float)[:, None], np.asarray(right, float)[:, None])
    else:
        prim = sample(left, right, (xs.ravel() - x_interface) / t, gamma)
    rho, u, p = prim
    w = np.stack([rho, rho * u, p / (gamma - 1.0) + 0.5 * rho * u * u])
    return w.reshape(3, nc, n_sub).mean(axis=2)
