"""Ghost-cell padding for every supported boundary condition.

Padding works on primitive arrays shaped ``(nvars, *batch, ny, nx)``.  In 1D
only the last axis is padded.  In 2D the x direction is padded first and the
y direction is then padded over the already extended array, which fixes the
corner ghost values.

Sides and outward normals: ``left`` (-x), ``right`` (+x), ``bottom`` (-y),
``top`` (+y).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import physics
from .errors import ConfigurationError
from .grid import Field
from .physics import EquationSet


@dataclass(frozen=True)
class Periodic:
    tag = "periodic"


@dataclass(frozen=True)
class SupersonicInflow:
    """Dirichlet freestream; ``state`` is the primitive freestream tuple."""

    state: tuple
    tag = "supersonic_inflow"


@dataclass(frozen=True)
class SupersonicOutflow:
    tag = "supersonic_outflow"


@dataclass(frozen=True)
class SubsonicInflow:
    state: tuple
    tag = "subsonic_inflow"


@dataclass(frozen=True)
class SubsonicOutflow:
    p_exit: float
    tag = "subsonic_outflow"


@dataclass(frozen=True)
class Slip:
    tag = "slip"


Condition = Union[Periodic, SupersonicInflow, SupersonicOutflow, SubsonicInflow, SubsonicOutflow, Slip]
_BY_TAG = {c.tag: c for c in (Periodic, SupersonicInflow, SupersonicOutflow, SubsonicInflow, SubsonicOutflow, Slip)}
SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class BoundarySpec:
    left: Condition
    right: Condition
    bottom: Condition | None = None
    top: Condition | None = None

    @classmethod
    def uniform(cls, cond: Condition, ndim: int = 1) -> "BoundarySpec":
        return cls(cond, cond, cond, cond) if ndim == 2 else cls(cond, cond)

    @classmethod
    def periodic(cls, ndim: int = 1) -> "BoundarySpec":
        return cls.uniform(Periodic(), ndim)

    def sides(self, ndim: int):
        names = SIDES[: 2 * ndim]
        return [(n, getattr(self, n)) for n in names]

    def has(self, kind) -> bool:
        return any(isinstance(c, kind) for c in (self.left, self.right, self.bottom, self.top))

    def validate(self, eq: EquationSet) -> "BoundarySpec":
        ndim = eq.ndim
        if ndim == 2 and (self.bottom is None or self.top is None):
            raise ConfigurationError("2D boundary spec needs bottom and top conditions")
        pairs = [(self.left, self.right)] + ([(self.bottom, self.top)] if ndim == 2 else [])
        for a, b in pairs:
            if isinstance(a, Periodic) != isinstance(b, Periodic):
                raise ConfigurationError("periodic conditions must be paired on opposite sides")
        for name, c in self.sides(ndim):
            if isinstance(c, (SupersonicInflow, SubsonicInflow, SubsonicOutflow)) and not eq.is_euler:
                raise ConfigurationError(f"{c.tag} on {name} requires an Euler equation set")
            if isinstance(c, (SupersonicInflow, SubsonicInflow)):
                u = np.asarray(c.state, dtype=np.float64)
                if u.shape != (eq.nvars,):
                    raise ConfigurationError(f"{c.tag} state needs {eq.nvars} primitive values")
                physics.check_primitive(eq, u)
            if isinstance(c, SubsonicOutflow) and not c.p_exit > 0:
                raise ConfigurationError("p_exit must be positive")
        return self

    def to_json(self) -> dict:
        out = {}
        for name in SIDES:
            c = getattr(self, name)
            if c is None:
                continue
            d = {"type": c.tag}
            if hasattr(c, "state"):
                d["state"] = [float(v) for v in c.state]
            if hasattr(c, "p_exit"):
                d["p_exit"] = float(c.p_exit)
            out[name] = d
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "BoundarySpec":
        def parse(d):
            if d is None:
                return None
            if isinstance(d, str):
                d = {"type": d}
            kind = _BY_TAG.get(d.get("type"))
            if kind is None:
                raise ConfigurationError(f"unknown boundary type {d.get('type')!r}")
            if kind in (SupersonicInflow, SubsonicInflow):
                return kind(tuple(float(v) for v in d["state"]))
            if kind is SubsonicOutflow:
                return kind(float(d["p_exit"]))
            return kind()

        if "all" in obj:
            c = parse(obj["all"])
            return cls(c, c, c, c)
        return cls(*(parse(obj.get(n)) for n in SIDES))


def _normal_sign(side: str) -> float:
    return -1.0 if side in ("left", "bottom") else 1.0


def _take(u, axis: int, idx):
    """Index spatial axis ``axis`` (0 = x = last, 1 = y = second to last)."""
    if axis == 0:
        return u[..., idx]
    return u[..., idx, :]


def _boundary_state(eq, cond, u_in, axis, sign):
    """Ghost primitive layer for non-periodic conditions.  ``u_in`` is the
    interior layer adjacent to the boundary (spatial axis removed)."""
    if isinstance(cond, SupersonicOutflow):
        return u_in.copy()
    if isinstance(cond, SupersonicInflow):
        return np.broadcast_to(np.asarray(cond.state, dtype=np.float64).reshape((-1,) + (1,) * (u_in.ndim - 1)), u_in.shape).copy()
    if isinstance(cond, Slip):
        out = u_in.copy()
        slots = eq.velocity_slots
        if slots:
            k = slots[axis] if len(slots) > axis else slots[0]
            out[k] = -out[k]
        return out
    vslot = eq.velocity_slots[axis]
    rho0 = u_in[0]
    c0 = np.sqrt(eq.gamma * u_in[-1] / u_in[0])
    out = u_in.copy()
    if isinstance(cond, SubsonicInflow):
        inf = np.asarray(cond.state, dtype=np.float64).reshape((-1,) + (1,) * (u_in.ndim - 1))
        inf = np.broadcast_to(inf, u_in.shape)
        p_inf, rho_inf = inf[-1], inf[0]
        vn_diff = sign * (inf[vslot] - u_in[vslot])
        p_b = 0.5 * (p_inf + u_in[-1] - rho0 * c0 * vn_diff)
        out[...] = inf
        out[0] = rho_inf + (p_b - p_inf) / c0**2
        out[vslot] = inf[vslot] - sign * (p_inf - p_b) / (rho0 * c0)
        out[-1] = p_b
        return out
    if isinstance(cond, SubsonicOutflow):
        p_b = np.full_like(u_in[-1], cond.p_exit)
        out[0] = u_in[0] + (p_b - u_in[-1]) / c0**2
        out[vslot] = u_in[vslot] - sign * (u_in[-1] - p_b) / (rho0 * c0)
        out[-1] = p_b
        return out
    raise ConfigurationError(f"unsupported boundary condition {cond!r}")


def _pad_axis(u, eq, lo, hi, g, axis):
    n = u.shape[-1 - axis]
    if g > n:
        raise ConfigurationError(f"{g} ghost layers exceed {n} cells")
    if isinstance(lo, Periodic):
        left = _take(u, axis, slice(n - g, n))
        right = _take(u, axis, slice(0, g))
    else:
        left = np.stack([_ghost_layer(u, eq, lo, axis, -1.0, k) for k in reversed(range(g))], axis=-1 - axis)
        right = np.stack([_ghost_layer(u, eq, hi, axis, 1.0, k) for k in range(g)], axis=-1 - axis)
    return np.concatenate([left, u, right], axis=-1 - axis)


def _ghost_layer(u, eq, cond, axis, sign, k):
    n = u.shape[-1 - axis]
    if isinstance(cond, Slip):
        src = k if sign < 0 else n - 1 - k
    else:
        src = 0 if sign < 0 else n - 1
    return _boundary_state(eq, cond, np.asarray(_take(u, axis, src)), axis, sign)


def pad_primitive(u, bc: BoundarySpec, g: int, eq: EquationSet, ndim: int | None = None):
    """Return ``u`` extended by ``g`` ghost layers on every active side."""
    if g < 1:
        raise ConfigurationError("need at least one ghost layer")
    ndim = eq.ndim if ndim is None else ndim
    u = np.asarray(u, dtype=np.float64)
    out = _pad_axis(u, eq, bc.left, bc.right, g, axis=0)
    if ndim == 2:
        out = _pad_axis(out, eq, bc.bottom, bc.top, g, axis=1)
    return out


@dataclass(frozen=True)
class PaddedField:
    """Primitive interior plus ``g`` ghost layers per active side."""

    data: np.ndarray
    g: int
    ndim: int

    @property
    def interior(self) -> np.ndarray:
        g = self.g
        if self.ndim == 1:
            return self.data[..., g:-g]
        return self.data[..., g:-g, g:-g]


def pad(field_: Field, bc: BoundarySpec, g: int, eq: EquationSet) -> PaddedField:
    """Pad a conserved :class:`Field`; the result holds primitive variables."""
    bc.validate(eq)
    u = physics.conserved_to_primitive(eq, field_.data)
    return PaddedField(pad_primitive(u, bc, g, eq, field_.grid.ndim), g, field_.grid.ndim)


def mirror_interface_state(eq: EquationSet, w_interior, n):
    """Slip mirror of a conserved Euler state across a wall with unit normal ``n``."""
    if not eq.is_euler:
        raise ConfigurationError("mirror state is defined for Euler states")
    n = np.atleast_1d(np.asarray(n, dtype=np.float64))
    if n.shape != (eq.ndim,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ConfigurationError(f"normal must be a unit {eq.ndim}-vector, got {n}")
    w = np.asarray(w_interior, dtype=np.float64)
    mom = np.stack([w[k] for k in eq.velocity_slots])
    mn = np.tensordot(n, mom, axes=(0, 0))
    mom = mom - 2.0 * n.reshape((-1,) + (1,) * (mom.ndim - 1)) * mn
    out = w.copy()
    for i, k in enumerate(eq.velocity_slots):
        out[k] = mom[i]
    return out


@dataclass
class SolidMask:
    """Solid cells inside the domain whose faces act as slip walls.

    ``mask`` is ``(ny, nx)`` boolean (True = solid).  For each direction the
    solid cells next to fluid are overwritten with layered mirror images of
    the neighbouring fluid cells before reconstruction along that direction.
    """

    mask: np.ndarray
    _pairs: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise ConfigurationError("solid mask must be 2D (ny, nx)")

    def _index_pairs(self, axis, g):
        key = (axis, g)
        if key in self._pairs:
            return self._pairs[key]
        m = self.mask if axis == 0 else self.mask.T
        rows, tgt_i, src_i = [], [], []
        ny, nx = m.shape
        for j in range(ny):
            line = m[j]
            for i in range(nx):
                if not line[i]:
                    continue
                # fluid on the low side of a solid run
                if i > 0 and not line[i - 1]:
                    for k in range(g):
                        if i + k < nx and line[i + k] and i - 1 - k >= 0 and not line[i - 1 - k]:
                            rows.append(j); tgt_i.append(i + k); src_i.append(i - 1 - k)
                # fluid on the high side of a solid run
                if i < nx - 1 and not line[i + 1]:
                    for k in range(g):
                        if i - k >= 0 and line[i - k] and i + 1 + k < nx and not line[i + 1 + k]:
                            rows.append(j); tgt_i.append(i - k); src_i.append(i + 1 + k)
        pairs = (np.array(rows, dtype=int), np.array(tgt_i, dtype=int), np.array(src_i, dtype=int))
        self._pairs[key] = pairs
        return pairs

    def near(self, width: int) -> np.ndarray:
        """Fluid cells within ``width`` cells (Chebyshev) of a solid cell."""
        out = np.zeros_like(self.mask)
        ny, nx = self.mask.shape
        for dj in range(-width, width + 1):
            for di in range(-width, width + 1):
                shifted = np.zeros_like(self.mask)
                ys = slice(max(dj, 0), ny + min(dj, 0)); yd = slice(max(-dj, 0), ny + min(-dj, 0))
                xs = slice(max(di, 0), nx + min(di, 0)); xd = slice(max(-di, 0), nx + min(-di, 0))
                shifted[yd, xd] = self.mask[ys, xs]
                out |= shifted
        return out & ~self.mask

    def fill(self, u_pad: np.ndarray, axis: int, g: int, eq: EquationSet) -> np.ndarray:
        """Copy of the padded primitive array with solid cells mirrored along ``axis``."""
        rows, tgt, src = self._index_pairs(axis, g)
        if rows.size == 0:
            return u_pad
        out = np.array(u_pad, copy=True)
        vslot = eq.velocity_slots[axis]
        if axis == 0:
            vals = out[..., rows + g, src + g]
            vals[vslot] = -vals[vslot]
            out[..., rows + g, tgt + g] = vals
        else:
            vals = out[..., src + g, rows + g]
            vals[vslot] = -vals[vslot]
            out[..., tgt + g, rows + g] = vals
        return out
