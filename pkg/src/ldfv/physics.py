"""PDE definitions: fluxes, state conversions, wave speeds and entropy pairs.

States carry the variable index on axis 0; any trailing axes are cells (and
possibly a batch).  Euler conserved variables are ``(rho, rho*v..., E)`` and
primitive ones ``(rho, v..., p)``; for scalar laws both coincide.

Everything here works on numpy arrays and on :mod:`ldfv.autodiff` Vars.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import AdmissibilityError, ConfigurationError

KINDS = ("advection", "burgers", "euler1d", "euler2d")


@dataclass(frozen=True)
class EquationSet:
    kind: str
    a: float = 1.0
    gamma: float = 1.4
    cv: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown equation kind {self.kind!r}")
        if self.is_euler and not self.gamma > 1.0:
            raise ConfigurationError(f"gamma must exceed 1, got {self.gamma}")

    @property
    def is_euler(self) -> bool:
        return self.kind.startswith("euler")

    @property
    def ndim(self) -> int:
        return 2 if self.kind == "euler2d" else 1

    @property
    def nvars(self) -> int:
        return {"advection": 1, "burgers": 1, "euler1d": 3, "euler2d": 4}[self.kind]

    @property
    def velocity_slots(self) -> tuple[int, ...]:
        """Primitive/conserved indices holding velocity (or momentum) components."""
        if self.kind == "euler1d":
            return (1,)
        if self.kind == "euler2d":
            return (1, 2)
        if self.kind == "burgers":
            return (0,)
        return ()

    @property
    def var_names(self) -> tuple[str, ...]:
        return {
            "advection": ("u",),
            "burgers": ("u",),
            "euler1d": ("density", "velocity", "pressure"),
            "euler2d": ("density", "velocity_x", "velocity_y", "pressure"),
        }[self.kind]


def LinearAdvection(a: float = 1.0) -> EquationSet:
    return EquationSet("advection", a=a)


def Burgers() -> EquationSet:
    return EquationSet("burgers")


def Euler1D(gamma: float = 1.4) -> EquationSet:
    return EquationSet("euler1d", gamma=gamma)


def Euler2D(gamma: float = 1.4) -> EquationSet:
    return EquationSet("euler2d", gamma=gamma)


def _as_state(x):
    if ad.is_var(x):
        return x
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(1) if x.ndim == 0 else x


def _first_bad(mask):
    flat = np.flatnonzero(np.asarray(mask).reshape(-1))
    return int(flat[0]) if flat.size else None


def check_primitive(eq: EquationSet, u) -> None:
    """Raise :class:`AdmissibilityError` unless ``u`` is admissible."""
    uv = ad.value(u)
    if not np.all(np.isfinite(uv)):
        raise AdmissibilityError("non-finite state", cell=_first_bad(~np.isfinite(uv).all(axis=0)))
    if eq.is_euler:
        bad = (uv[0] <= 0) | (uv[-1] <= 0)
        if np.any(bad):
            raise AdmissibilityError("non-positive density or pressure", cell=_first_bad(bad))


def admissible_mask(eq: EquationSet, u, axes=None) -> np.ndarray:
    """Boolean admissibility per cell (reduced with ``all`` over ``axes``)."""
    uv = ad.value(u)
    ok = np.isfinite(uv).all(axis=0)
    if eq.is_euler:
        ok &= (uv[0] > 0) & (uv[-1] > 0)
    if axes is not None:
        ok = ok.all(axis=axes)
    return ok


def primitive_to_conserved(eq: EquationSet, u, check: bool = True):
    u = _as_state(u)
    if not eq.is_euler:
        return u
    if check:
        check_primitive(eq, u)
    rho, p = u[0], u[-1]
    vel = [u[k] for k in eq.velocity_slots]
    ke = vel[0] * vel[0]
    for v in vel[1:]:
        ke = ke + v * v
    energy = p * (1.0 / (eq.gamma - 1.0)) + 0.5 * rho * ke
    return ad.stack([rho] + [rho * v for v in vel] + [energy], axis=0)


def conserved_to_primitive(eq: EquationSet, w, check: bool = True):
    w = _as_state(w)
    if not eq.is_euler:
        return w
    wv = ad.value(w)
    if check:
        if not np.all(np.isfinite(wv)):
            raise AdmissibilityError("non-finite state", cell=_first_bad(~np.isfinite(wv).all(axis=0)))
        if np.any(wv[0] <= 0):
            raise AdmissibilityError("non-positive density", cell=_first_bad(wv[0] <= 0))
    rho, energy = w[0], w[-1]
    vel = [w[k] / rho for k in eq.velocity_slots]
    ke = vel[0] * w[eq.velocity_slots[0]]
    for k, v in zip(eq.velocity_slots[1:], vel[1:]):
        ke = ke + v * w[k]
    p = (eq.gamma - 1.0) * (energy - 0.5 * ke)
    if check and np.any(ad.value(p) <= 0):
        raise AdmissibilityError("non-positive internal energy", cell=_first_bad(ad.value(p) <= 0))
    return ad.stack([rho] + vel + [p], axis=0)


def sound_speed(eq: EquationSet, u):
    return ad.sqrt(eq.gamma * u[-1] / u[0])


def flux_primitive(eq: EquationSet, u, w, axis: int):
    """Physical flux along ``axis`` (0 = x, 1 = y) from matching primitive and
    conserved states.

    The momentum flux is formed as ``(rho * v_n) * v_k`` in both directions so
    that swapping x and y permutes the result exactly.
    """
    if eq.kind == "advection":
        return eq.a * u
    if eq.kind == "burgers":
        return 0.5 * u * u
    vn_slot = eq.velocity_slots[axis]
    rho, p = u[0], u[-1]
    vn = u[vn_slot]
    mass = rho * vn
    comps = [mass]
    for k in eq.velocity_slots:
        m = mass * u[k]
        comps.append(m + p if k == vn_slot else m)
    comps.append((w[-1] + p) * vn)
    return ad.stack(comps, axis=0)


def flux(eq: EquationSet, w, axis: int = 0):
    w = _as_state(w)
    u = conserved_to_primitive(eq, w)
    return flux_primitive(eq, u, w, axis)


def wave_speed_primitive(eq: EquationSet, u, axis: int = 0):
    """Spectral radius of the flux Jacobian along ``axis``, per cell."""
    if eq.kind == "advection":
        return abs(eq.a) + 0.0 * u[0]
    if eq.kind == "burgers":
        return ad.abs(u[0])
    return ad.abs(u[eq.velocity_slots[axis]]) + sound_speed(eq, u)


def max_wave_speed(eq: EquationSet, w, axis: int = 0):
    w = _as_state(w)
    u = conserved_to_primitive(eq, w)
    return wave_speed_primitive(eq, u, axis)


def entropy_primitive(eq: EquationSet, u):
    if not eq.is_euler:
        return 0.5 * u[0] * u[0]
    rho, p = u[0], u[-1]
    s = eq.cv * (ad.log(p) - eq.gamma * ad.log(rho))
    return -1.0 * (rho * s)


def entropy_flux_primitive(eq: EquationSet, u, axis: int = 0):
    if eq.kind == "burgers":
        return u[0] * u[0] * u[0] * (1.0 / 3.0)
    if eq.kind == "advection":
        return 0.5 * eq.a * u[0] * u[0]
    return entropy_primitive(eq, u) * u[eq.velocity_slots[axis]]


def entropy(eq: EquationSet, w):
    """Convex entropy: ``w**2/2`` for scalars, ``-rho*s`` for Euler."""
    return entropy_primitive(eq, conserved_to_primitive(eq, _as_state(w)))


def entropy_flux(eq: EquationSet, w, axis: int = 0):
    return entropy_flux_primitive(eq, conserved_to_primitive(eq, _as_state(w)), axis)
