"""Convolutional network producing per-cell stencil coefficients.

Pipeline: min-max normalization of the primitive variables, ghost padding,
three 3-wide convolutions (SELU after the first two) and a fixed zero-sum
linear map from 4 raw channels to the 3 stencil weights of every
(direction, variable) pair.

The network output ``alpha_ML`` is added to the base forward-difference
stencil ``(0, -1, 1)``, so zero output reproduces the classical scheme.

Layouts
    primitive input   ``(nvars, *batch, ny, nx)``
    raw output        ``4 * nvars * ndim`` channels, channel ``(d*nvars + v)*4 + r``
    coefficients      ``(ndim, 3, nvars, *batch, ny, nx)``
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import physics
from .boundary import BoundarySpec, Periodic, Slip, SolidMask, pad_primitive
from .errors import ConfigurationError, ShapeError
from .fv import ALPHA_BASE, stencil_increment
from .grid import Field

# columns (-1,1,0), (0,-1,1), (-1,0,1), (1,-2,1), halved
CONSTRAINT = 0.5 * np.array([
    [-1.0, 0.0, -1.0, 1.0],
    [1.0, -1.0, 0.0, -2.0],
    [0.0, 1.0, 1.0, 1.0],
])
NORM_EPS = 1e-13
CHECKPOINT_VERSION = 1


@dataclass
class NetworkParams:
    """Convolution weights and biases, blocks in evaluation order.

    1D weights are ``(out, in, 3)``, 2D weights ``(out, in, 3, 3)``.
    """

    nvars: int
    ndim: int
    weights: list
    biases: list
    hidden: int = 32
    kernel: int = 3
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ConfigurationError("weights and biases must pair up")
        chans = self.channels
        for b, (w, bias) in enumerate(zip(self.weights, self.biases)):
            expect = (chans[b + 1], chans[b]) + (self.kernel,) * self.ndim
            if tuple(np.shape(w)) != expect:
                raise ConfigurationError(f"block {b} weight shape {np.shape(w)} != {expect}")
            if tuple(np.shape(bias)) != (chans[b + 1],):
                raise ConfigurationError(f"block {b} bias shape {np.shape(bias)} != {(chans[b + 1],)}")

    @property
    def n_blocks(self) -> int:
        return len(self.weights)

    @property
    def out_channels(self) -> int:
        return 4 * self.nvars * self.ndim

    @property
    def channels(self) -> list:
        return [self.nvars] + [self.hidden] * (len(self.weights) - 1) + [self.out_channels]

    def arrays(self) -> list:
        """Flat list ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_arrays(self, arrays) -> "NetworkParams":
        arrays = list(arrays)
        return NetworkParams(self.nvars, self.ndim, [np.array(a, dtype=np.float64) for a in arrays[0::2]],
                             [np.array(a, dtype=np.float64) for a in arrays[1::2]],
                             self.hidden, self.kernel, dict(self.meta))

    def size(self) -> int:
        return int(sum(np.size(a) for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def _truncated_normal(rng, shape, std):
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while np.any(bad):
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def init_params(nvars: int, ndim: int, seed: int = 0, hidden: int = 32, n_blocks: int = 3,
                kernel: int = 3, zero_last: bool = True) -> NetworkParams:
    """Truncated-normal weights scaled by ``1/sqrt(fan_in)``, zero biases and,
    by default, an all-zero final block."""
    if ndim not in (1, 2) or nvars < 1 or n_blocks < 1 or kernel != 3:
        raise ConfigurationError("unsupported network configuration")
    rng = np.random.default_rng(seed)
    chans = [nvars] + [hidden] * (n_blocks - 1) + [4 * nvars * ndim]
    weights, biases = [], []
    for b in range(n_blocks):
        shape = (chans[b + 1], chans[b]) + (kernel,) * ndim
        fan_in = chans[b] * kernel**ndim
        w = _truncated_normal(rng, shape, 1.0 / np.sqrt(fan_in))
        if zero_last and b == n_blocks - 1:
            w = np.zeros(shape)
        weights.append(w)
        biases.append(np.zeros(chans[b + 1]))
    return NetworkParams(nvars, ndim, weights, biases, hidden, kernel, {"seed": int(seed)})


def fixed_stencil_params(nvars: int, ndim: int, alpha_total, hidden: int = 32, n_blocks: int = 3) -> NetworkParams:
    """Network whose output is the constant stencil ``alpha_total`` everywhere
    (zero weights, final bias chosen so the constraint yields the target)."""
    alpha_total = np.asarray(alpha_total, dtype=np.float64)
    if alpha_total.shape != (3,) or abs(alpha_total.sum()) > 1e-13:
        raise ConfigurationError("stencil must be three weights summing to zero")
    target = alpha_total - np.asarray(ALPHA_BASE)
    # the first two constraint columns span the zero-sum plane
    raw = np.array([-2.0 * target[0], 2.0 * target[2], 0.0, 0.0])
    p = init_params(nvars, ndim, 0, hidden, n_blocks)
    weights = [np.zeros_like(w) for w in p.weights]
    biases = [np.zeros_like(b) for b in p.biases]
    biases[-1] = np.tile(raw, nvars * ndim)
    return NetworkParams(nvars, ndim, weights, biases, hidden, p.kernel)


def _default_eq(nvars):
    return {3: physics.Euler1D(), 4: physics.Euler2D()}.get(nvars, physics.Burgers())


def normalize(u):
    """Per-variable (and per-sample) min-max map of ``u`` onto ``[-1, 1]``.

    Statistics run over the spatial axes; variables with a range below
    ``1e-13`` map to zero.  Returns the normalized array.
    """
    u = u.data if isinstance(u, Field) else np.asarray(u, dtype=np.float64)
    lo, scale = _norm_stats(u)
    return _apply_norm(u, lo, scale)


def _norm_stats(u):
    lo = u.min(axis=(-2, -1), keepdims=True)
    hi = u.max(axis=(-2, -1), keepdims=True)
    rng_ = hi - lo
    flat = rng_ < NORM_EPS
    scale = np.where(flat, 0.0, 2.0 / np.where(flat, 1.0, rng_))
    return lo, scale


def _apply_norm(u, lo, scale):
    return np.where(scale == 0.0, 0.0, (u - lo) * scale - 1.0)


def _feature_pad(x, bc: BoundarySpec, ndim: int):
    """One ghost layer for hidden features: wrap for periodic sides, edge
    replication otherwise."""
    if isinstance(bc.left, Periodic):
        x = ad.concatenate([x[..., -1:], x, x[..., :1]], axis=-1)
    else:
        x = ad.concatenate([x[..., :1], x, x[..., -1:]], axis=-1)
    if ndim == 2:
        if isinstance(bc.bottom, Periodic):
            x = ad.concatenate([x[..., -1:, :], x, x[..., :1, :]], axis=-2)
        else:
            x = ad.concatenate([x[..., :1, :], x, x[..., -1:, :]], axis=-2)
    return x


def _conv_weight(w, ndim):
    if ndim == 1:
        shape = tuple(w.shape)
        return ad.reshape(w, (shape[0], shape[1], 1, shape[2]))
    return w


def forward(params, u, bc: BoundarySpec, eq=None, arrays=None):
    """``alpha_ML`` coefficients ``(ndim, 3, nvars, *batch, ny, nx)``.

    ``u`` is a primitive array (or Field).  ``eq`` fixes how slip ghosts are
    built and defaults to Burgers/Euler by variable count.  ``arrays``
    optionally overrides the parameter arrays, e.g. with tape Vars for
    differentiation.
    """
    u = u.data if isinstance(u, Field) else np.asarray(u, dtype=np.float64)
    ndim, nvars = params.ndim, params.nvars
    if u.shape[0] != nvars:
        raise ConfigurationError(f"network expects {nvars} variables, got {u.shape[0]}")
    if ndim == 1 and u.shape[-2] != 1:
        raise ConfigurationError("1D network needs ny == 1")
    if eq is None:
        eq = _default_eq(nvars)
    lo, scale = _norm_stats(u)
    # ghost cells come from the physical padding, scaled with interior stats
    x = _apply_norm(pad_primitive(u, bc, 1, eq, ndim), lo, scale)
    arrs = params.arrays() if arrays is None else list(arrays)
    n_blocks = len(arrs) // 2
    for b in range(n_blocks):
        w, bias = arrs[2 * b], arrs[2 * b + 1]
        x = ad.conv(x, _conv_weight(w, ndim), bias)
        if b < n_blocks - 1:
            x = ad.selu(x)
            x = _feature_pad(x, bc, ndim)
    rest = tuple(x.shape[1:])
    raw = ad.reshape(x, (ndim, nvars, 4) + rest)
    r = [raw[:, :, k] for k in range(4)]
    B = CONSTRAINT
    alphas = []
    for row in range(3):
        acc = None
        for k in range(4):
            if B[row, k] == 0.0:
                continue
            term = B[row, k] * r[k]
            acc = term if acc is None else acc + term
        alphas.append(acc)
    return ad.stack(alphas, axis=1)


def constrain(raw):
    """Map raw 4-vectors (last axis) to zero-sum 3-vectors."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1] != 4:
        raise ShapeError("raw coefficients need 4 entries on the last axis")
    return raw @ CONSTRAINT.T


def learned_increment(u_pad, coeffs, axis: int = 0):
    """``alpha[-1]*u[i-1] + alpha[0]*u[i] + alpha[1]*u[i+1]`` along ``axis``.

    ``coeffs`` is ``(3, *u_pad.shape)`` (total stencil on the padded cells);
    the result covers cells ``1 .. N-2`` of the padded line.
    """
    if tuple(np.shape(coeffs))[1:] != tuple(np.shape(u_pad)) or np.shape(coeffs)[0] != 3:
        raise ShapeError(f"coefficients {np.shape(coeffs)} do not match data {np.shape(u_pad)}")
    return stencil_increment(u_pad, coeffs, axis)


def wall_mask(shape, bc: BoundarySpec, width: int, ndim: int, solid: SolidMask | None = None) -> np.ndarray:
    """Cells (``(ny, nx)`` bool) whose ML contribution is removed."""
    if width < 1:
        raise ConfigurationError("wall width must be >= 1")
    ny, nx = shape
    m = np.zeros((ny, nx), dtype=bool)
    if isinstance(bc.left, Slip):
        m[:, :width] = True
    if isinstance(bc.right, Slip):
        m[:, nx - width:] = True
    if ndim == 2:
        if isinstance(bc.bottom, Slip):
            m[:width, :] = True
        if isinstance(bc.top, Slip):
            m[ny - width:, :] = True
    if solid is not None:
        m |= solid.near(width) | solid.mask
    return m


def zero_wall_coeffs(coeffs, bc: BoundarySpec, width: int = 1, solid: SolidMask | None = None):
    """Zero ``alpha_ML`` in the ``width`` cells next to slip walls."""
    ndim = np.shape(coeffs)[0]
    shape = tuple(np.shape(coeffs)[-2:])
    m = wall_mask(shape, bc, width, ndim, solid)
    if not m.any():
        return coeffs
    return ad.where(m, 0.0, coeffs)


def total_coeffs(alpha_ml):
    base = np.asarray(ALPHA_BASE).reshape((1, 3) + (1,) * (np.ndim(ad.value(alpha_ml)) - 2))
    return base + alpha_ml


@dataclass
class LearnedReconstruction:
    """Reconstruction plug-in for :class:`ldfv.fv.SchemeConfig`."""

    params: NetworkParams
    wall_width: int = 1

    def coefficients(self, u, grid, bc, eq, solid=None):
        if self.params.ndim != grid.ndim or self.params.nvars != eq.nvars:
            raise ConfigurationError("checkpoint does not match the equation set or dimension")
        a = forward(self.params, u, bc, eq)
        a = zero_wall_coeffs(a, bc, self.wall_width, solid)
        return total_coeffs(a)


def save_checkpoint(path, params: NetworkParams, metadata: dict | None = None) -> Path:
    """Write ``manifest.json`` and ``params.bin`` into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "ldfv-checkpoint",
        "version": CHECKPOINT_VERSION,
        "architecture": {
            "nvars": params.nvars,
            "ndim": params.ndim,
            "n_blocks": params.n_blocks,
            "hidden": params.hidden,
            "kernel": params.kernel,
            "activation": "selu",
            "constraint": CONSTRAINT.tolist(),
            "alpha_base": list(ALPHA_BASE),
        },
        "channels": params.channels,
        "param_shapes": [list(np.shape(a)) for a in params.arrays()],
        "seed": params.meta.get("seed"),
        "metadata": metadata or {},
    }
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.arrays())
    (path / "params.bin").write_bytes(blob)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_checkpoint(path) -> NetworkParams:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
        blob = (path / "params.bin").read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read checkpoint {path}: {exc}") from None
    if manifest.get("format") != "ldfv-checkpoint" or manifest.get("version") != CHECKPOINT_VERSION:
        raise ConfigurationError("unrecognized checkpoint manifest")
    arch = manifest["architecture"]
    shapes = [tuple(s) for s in manifest["param_shapes"]]
    total = sum(int(np.prod(s)) for s in shapes)
    if len(blob) != 8 * total:
        raise ConfigurationError(f"parameter blob holds {len(blob) // 8} values, expected {total}")
    flat = np.frombuffer(blob, dtype="<f8")
    arrays, off = [], 0
    for s in shapes:
        n = int(np.prod(s))
        arrays.append(flat[off:off + n].reshape(s).astype(np.float64))
        off += n
    meta = {"seed": manifest.get("seed"), **manifest.get("metadata", {})}
    return NetworkParams(arch["nvars"], arch["ndim"], arrays[0::2], arrays[1::2],
                         arch["hidden"], arch["kernel"], meta)
