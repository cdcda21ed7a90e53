"""Uniform Cartesian meshes, cell-averaged fields, coarse-graining and norms.

Field data is always stored as ``(nvars, ny, nx)`` float64 with ``ny == 1``
in 1D, so x is the last axis and y the one before it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ShapeError

MAGIC = b"LDFV"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIdd")


@dataclass(frozen=True)
class GridSpec:
    ndim: int
    nx: int
    ny: int
    x0: float
    x1: float
    y0: float = 0.0
    y1: float = 1.0

    @property
    def dx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def dy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def x_centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return self.y0 + (np.arange(self.ny) + 0.5) * self.dy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates broadcast to ``(ny, nx)``."""
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="xy")

    def coarsen(self, R: int) -> "GridSpec":
        if self.nx % R or (self.ndim == 2 and self.ny % R):
            raise ShapeError(f"grid {self.ny}x{self.nx} not divisible by R={R}")
        ny = self.ny // R if self.ndim == 2 else 1
        return GridSpec(self.ndim, self.nx // R, ny, self.x0, self.x1, self.y0, self.y1)

    def refine(self, R: int) -> "GridSpec":
        ny = self.ny * R if self.ndim == 2 else 1
        return GridSpec(self.ndim, self.nx * R, ny, self.x0, self.x1, self.y0, self.y1)


def make_uniform_grid(ndim, bounds, counts) -> GridSpec:
    """Build a uniform grid.

    ``bounds`` is ``(x0, x1)`` in 1D or ``((x0, x1), (y0, y1))`` in 2D and
    ``counts`` is ``nx`` or ``(nx, ny)``.
    """
    if ndim not in (1, 2):
        raise ConfigurationError(f"ndim must be 1 or 2, got {ndim}")
    if ndim == 1:
        if np.ndim(counts) > 0:
            (counts,) = counts
        if np.ndim(bounds[0]) > 0:
            (bounds,) = bounds
        (x0, x1), (y0, y1) = bounds, (0.0, 1.0)
        nx, ny = int(counts), 1
    else:
        (x0, x1), (y0, y1) = bounds
        nx, ny = (int(c) for c in counts)
    for n in (nx, ny) if ndim == 2 else (nx,):
        if n < 4:
            raise ConfigurationError(f"need at least 4 cells per dimension, got {n}")
    if not x1 > x0 or not y1 > y0:
        raise ConfigurationError(f"inverted or empty bounds {bounds}")
    return GridSpec(ndim, nx, ny, float(x0), float(x1), float(y0), float(y1))


class Field:
    """Immutable cell-averaged field on a :class:`GridSpec`."""

    __slots__ = ("grid", "data")

    def __init__(self, grid: GridSpec, data):
        data = np.array(data, dtype=np.float64)
        if data.ndim == 1 and grid.ndim == 1:
            data = data[None, None, :]
        elif data.ndim == 2 and grid.ndim == 1:
            data = data[:, None, :]
        if data.ndim != 3 or data.shape[1:] != grid.shape:
            raise ShapeError(f"data shape {data.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(data)):
            raise ShapeError("field contains non-finite values")
        data.setflags(write=False)
        self.grid = grid
        self.data = data

    @property
    def nvars(self) -> int:
        return self.data.shape[0]

    def __repr__(self):
        return f"Field(nvars={self.nvars}, grid={self.grid})"

    def with_data(self, data) -> "Field":
        return Field(self.grid, data)


def project_fine_to_coarse(fine: Field, R: int) -> Field:
    """Keep every R-th fine cell, the one nearest each coarse cell center."""
    if R < 2:
        raise ConfigurationError(f"R must be >= 2, got {R}")
    coarse = fine.grid.coarsen(R)
    off = R // 2
    if fine.grid.ndim == 1:
        data = fine.data[:, :, off::R]
    else:
        data = fine.data[:, off::R, off::R]
    return Field(coarse, data)


def _diff(a, b):
    a = a.data if isinstance(a, Field) else np.asarray(a, dtype=np.float64)
    b = b.data if isinstance(b, Field) else np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return a - b


def l2_error(a, b) -> float:
    d = _diff(a, b)
    return float(np.sqrt(np.mean(d * d)))


def l1_error(a, b) -> float:
    return float(np.mean(np.abs(_diff(a, b))))


def linf_error(a, b) -> float:
    return float(np.max(np.abs(_diff(a, b))))


def total_variation_array(arr, ndim: int, ad=np, periodic: bool = False):
    """TV summed over variables and active dimensions.

    ``arr`` has spatial axes last; the sum runs over every axis so the result
    is a scalar.  ``periodic`` adds the wrap-around jump(s).  ``ad`` selects
    the array namespace (numpy or the tape).
    """
    tv = ad.sum(ad.abs(arr[..., 1:] - arr[..., :-1]))
    if periodic:
        tv = tv + ad.sum(ad.abs(arr[..., :1] - arr[..., -1:]))
    if ndim == 2:
        tv = tv + ad.sum(ad.abs(arr[..., 1:, :] - arr[..., :-1, :]))
        if periodic:
            tv = tv + ad.sum(ad.abs(arr[..., :1, :] - arr[..., -1:, :]))
    return tv


def total_variation(u, periodic: bool = False) -> float:
    if isinstance(u, Field):
        return float(total_variation_array(u.data, u.grid.ndim, periodic=periodic))
    u = np.asarray(u, dtype=np.float64)
    return float(total_variation_array(u, u.ndim if u.ndim <= 2 else 2, periodic=periodic))


def _header(grid: GridSpec, nvars: int) -> bytes:
    return _HEADER.pack(MAGIC, FORMAT_VERSION, grid.ndim, nvars, grid.nx, grid.ny, grid.dx, grid.dy)


def _parse_header(buf: bytes, offset: int = 0):
    magic, version, ndim, nvars, nx, ny, dx, dy = _HEADER.unpack_from(buf, offset)
    if magic != MAGIC:
        raise ShapeError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ShapeError(f"unsupported format version {version}")
    grid = GridSpec(ndim, nx, ny, 0.0, nx * dx, 0.0, ny * dy if ndim == 2 else 1.0)
    return grid, nvars, offset + _HEADER.size


def field_to_bytes(field: Field) -> bytes:
    return _header(field.grid, field.nvars) + field.data.astype("<f8").tobytes(order="C")


def field_from_bytes(buf: bytes, grid: GridSpec | None = None) -> Field:
    """Decode a snapshot.  Bounds are not stored; pass ``grid`` to restore them."""
    g, nvars, off = _parse_header(buf)
    n = nvars * g.ny * g.nx
    data = np.frombuffer(buf, dtype="<f8", count=n, offset=off).reshape(nvars, g.ny, g.nx)
    if grid is not None:
        if grid.shape != g.shape:
            raise ShapeError("grid does not match snapshot header")
        g = grid
    return Field(g, data)


def write_field(path, field: Field) -> None:
    Path(path).write_bytes(field_to_bytes(field))


def read_field(path, grid: GridSpec | None = None) -> Field:
    return field_from_bytes(Path(path).read_bytes(), grid)
