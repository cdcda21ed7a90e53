"""Losses, gradients and the optimisation loop for the coefficient network.

A training sample is a pair of coarse conserved states one time step apart
plus that step's ``dt``.  The loss runs one learned solver step from the
input and compares the prediction with the target in primitive variables;
penalties for entropy production, total-variation growth and the L1 weight
norm are added on top.  Gradients come from :mod:`ldfv.autodiff`.

Batches carry the sample axis directly after the variable axis, i.e.
``(nvars, B, ny, nx)``; every loss term is evaluated per sample and then
averaged over the batch.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import fv, physics
from .boundary import BoundarySpec, Periodic, Slip, pad_primitive
from .errors import AdmissibilityError, ConfigurationError, LdfvError, ShapeError
from .model import NetworkParams, forward, save_checkpoint, total_coeffs, zero_wall_coeffs

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "phase", "train_loss", "val_loss", "skipped_samples", "wall_time_s")


class TrainingAborted(LdfvError, RuntimeError):
    pass


@dataclass
class TrainConfig:
    lambda2: float = 1.0
    lambda_ent: float = 1e-4
    lambda_tvd: float = 1e-4
    lambda_reg: float = 1e-4
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 10
    slip_epochs: int = 0
    wall_width: int = 1
    R: int = 2
    seed: int = 0
    cfl: float = 0.4
    max_skip_fraction: float = 0.1
    checkpoint_every: int = 0

    def __post_init__(self):
        for name in ("lambda2", "lambda_ent", "lambda_tvd", "lambda_reg", "lr"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.R < 2:
            raise ConfigurationError("R must be >= 2")
        if self.batch_size < 1 or self.epochs < 0 or self.slip_epochs < 0:
            raise ConfigurationError("batch_size >= 1 and non-negative epoch counts required")
        if self.wall_width < 1:
            raise ConfigurationError("wall_width must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, arrays) -> "AdamState":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays])


def adam_update(arrays, grads, state: AdamState, lr: float):
    """One bias-corrected Adam step; returns ``(new_arrays, new_state)``."""
    if len(arrays) != len(grads) or len(arrays) != len(state.m):
        raise ConfigurationError("parameter, gradient and moment lists differ in length")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        if np.shape(p) != np.shape(g):
            raise ConfigurationError(f"gradient shape {np.shape(g)} != parameter shape {np.shape(p)}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        mhat = m / (1.0 - b1**t)
        vhat = v / (1.0 - b2**t)
        new_p.append(p - lr * mhat / (np.sqrt(vhat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(new_m, new_v, t, b1, b2, state.eps)


# ---------------------------------------------------------------- losses

def _sample_axes(x):
    """Reduction axes for per-sample statistics of ``(nvars, B, ny, nx)``."""
    return (0,) + tuple(range(2, np.ndim(ad.value(x))))


def loss_data(pred, target, lambda2: float = 1.0, per_sample: bool = False):
    """``mean|e| + lambda2 * sqrt(mean e**2)``.

    With ``per_sample`` the statistics run over all axes except axis 1 and a
    vector of per-sample losses is returned.
    """
    if tuple(np.shape(ad.value(pred))) != tuple(np.shape(target)):
        raise ShapeError(f"prediction {np.shape(ad.value(pred))} vs target {np.shape(target)}")
    err = pred - target
    axes = _sample_axes(err) if per_sample else None
    return ad.mean(ad.abs(err), axis=axes) + lambda2 * ad.sqrt(ad.mean(err * err, axis=axes))


def _periodic_axes(bc: BoundarySpec, ndim: int):
    out = [isinstance(bc.left, Periodic)]
    if ndim == 2:
        out.append(isinstance(bc.bottom, Periodic))
    return out


def tv_per_sample(u, ndim: int, periodic=(False, False)):
    """Total variation of ``(nvars, B, ny, nx)`` data, one value per sample."""
    axes = _sample_axes(u)
    tv = ad.sum(ad.abs(u[..., 1:] - u[..., :-1]), axis=axes)
    if periodic[0]:
        tv = tv + ad.sum(ad.abs(u[..., :1] - u[..., -1:]), axis=axes)
    if ndim == 2:
        tv = tv + ad.sum(ad.abs(u[..., 1:, :] - u[..., :-1, :]), axis=axes)
        if periodic[1]:
            tv = tv + ad.sum(ad.abs(u[..., :1, :] - u[..., -1:, :]), axis=axes)
    return tv


def loss_tvd(u_t, u_next, ndim: int = 1, periodic=(False, False)):
    """``max(0, TV(u_next) - TV(u_t))`` per sample."""
    return ad.relu(tv_per_sample(u_next, ndim, periodic) - tv_per_sample(u_t, ndim, periodic))


def entropy_residual(eq, u_t, u_next, dt, widths, bc: BoundarySpec):
    """Discrete entropy production ``K_j`` per cell.

    ``h**d * (eta(u_next) - eta(u_t)) + dt * h**(d-1) * sum_dir (q_j - q_{j-1})``
    with the entropy flux ``q`` taken at time ``t`` and its ghost value from
    the boundary padding.  ``h`` is the (uniform) cell size.
    """
    ndim = eq.ndim
    h = widths[0]
    eta_next = physics.entropy_primitive(eq, u_next)
    eta_t = physics.entropy_primitive(eq, u_t)
    up = pad_primitive(ad.value(u_t), bc, 1, eq, ndim)
    div = 0.0
    for axis in range(ndim):
        if ndim == 2:
            lines = up[..., 1:-1, :] if axis == 0 else up[..., :, 1:-1]
        else:
            lines = up
        q = physics.entropy_flux_primitive(eq, lines, axis)
        dq = q[fv._s(axis, slice(1, -1))] - q[fv._s(axis, slice(0, -2))]
        div = div + dq
    dt = np.asarray(dt, dtype=np.float64)
    return h**ndim * (eta_next - eta_t) + (dt * h ** (ndim - 1)) * div


def loss_entropy(eq, u_t, u_next, dt, widths, bc: BoundarySpec, per_sample: bool = True):
    """``sum_j max(0, K_j)**2``; per sample by default (batch axis 0 of ``K``)."""
    K = ad.relu(entropy_residual(eq, u_t, u_next, dt, widths, bc))
    sq = K * K
    if not per_sample:
        return ad.sum(sq)
    kv = ad.value(K)
    return ad.sum(sq, axis=tuple(range(1, kv.ndim)))


def loss_reg(arrays):
    """L1 norm of every weight and bias."""
    total = None
    for a in arrays:
        term = ad.sum(ad.abs(a))
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------- one step

@dataclass
class Problem:
    """Everything a batch needs besides the states themselves."""

    eq: physics.EquationSet
    grid: object
    bc: BoundarySpec
    scheme: fv.SchemeConfig = field(default_factory=fv.SchemeConfig)
    zero_walls: bool = False
    wall_width: int = 1


def predict(arrays, params: NetworkParams, w_in, dt, prob: Problem):
    """Learned one-step prediction of conserved states ``(nvars, B, ny, nx)``."""
    u_in = physics.conserved_to_primitive(prob.eq, w_in, check=False)
    alpha = forward(params, u_in, prob.bc, prob.eq, arrays=arrays)
    if prob.zero_walls:
        alpha = zero_wall_coeffs(alpha, prob.bc, prob.wall_width)
    coeffs = total_coeffs(alpha)
    dt = np.asarray(dt, dtype=np.float64).reshape((-1,) + (1,) * (np.ndim(w_in) - 2))
    with np.errstate(all="ignore"):
        return fv.step_array(w_in, prob.grid, prob.bc, prob.eq, prob.scheme, dt, coeffs=coeffs, check=False)


def sample_losses(arrays, params, w_in, w_target, dt, prob: Problem, cfg: TrainConfig):
    """Per-sample ``(data_loss, penalty_loss, predicted_conserved)``."""
    w_next = predict(arrays, params, w_in, dt, prob)
    with np.errstate(all="ignore"):
        u_next = physics.conserved_to_primitive(prob.eq, w_next, check=False)
    u_t = physics.conserved_to_primitive(prob.eq, w_in, check=False)
    u_ref = physics.conserved_to_primitive(prob.eq, w_target, check=False)
    data = loss_data(u_next, u_ref, cfg.lambda2, per_sample=True)
    pen = 0.0
    ndim = prob.grid.ndim
    if cfg.lambda_tvd > 0:
        pen = pen + cfg.lambda_tvd * loss_tvd(u_t, u_next, ndim, _periodic_axes(prob.bc, ndim))
    if cfg.lambda_ent > 0:
        widths = (prob.grid.dx, prob.grid.dy)
        dtb = np.asarray(dt, dtype=np.float64).reshape((-1,) + (1,) * (np.ndim(w_in) - 2))
        with np.errstate(all="ignore"):
            pen = pen + cfg.lambda_ent * loss_entropy(prob.eq, u_t, u_next, dtb, widths, prob.bc)
    return data, pen, w_next


def _admissible_samples(eq, w_next) -> np.ndarray:
    wv = ad.value(w_next)
    with np.errstate(all="ignore"):
        u = physics.conserved_to_primitive(eq, wv, check=False)
    ok = physics.admissible_mask(eq, u) & np.isfinite(wv).all(axis=0)
    return ok.reshape(ok.shape[0], -1).all(axis=1)


def loss_total(params: NetworkParams, w_in, w_target, dt, prob: Problem, cfg: TrainConfig, arrays=None):
    """Batch loss recorded on a fresh tape.

    Returns ``(loss_var, tape, leaves, info)``; ``info`` holds the data loss
    and the indices of skipped (inadmissible) samples.  Raises
    :class:`AdmissibilityError` if no sample in the batch is admissible.
    """
    tape = ad.Tape()
    base = params.arrays() if arrays is None else arrays
    leaves = [tape.var(a) for a in base]
    data, pen, w_next = sample_losses(leaves, params, w_in, w_target, dt, prob, cfg)
    ok = _admissible_samples(prob.eq, w_next)
    skipped = np.flatnonzero(~ok)
    if skipped.size:
        if not ok.any():
            raise AdmissibilityError("every sample in the batch left the admissible set")
        keep = np.flatnonzero(ok)
        return _loss_on_subset(params, base, w_in, w_target, dt, prob, cfg, keep, skipped)
    per = data + pen if not isinstance(pen, float) else data
    loss = ad.mean(per)
    if cfg.lambda_reg > 0:
        loss = loss + cfg.lambda_reg * loss_reg(leaves)
    info = {"data": float(np.mean(ad.value(data))), "skipped": skipped}
    return loss, tape, leaves, info


def _loss_on_subset(params, base, w_in, w_target, dt, prob, cfg, keep, skipped):
    dt = np.broadcast_to(np.asarray(dt, dtype=np.float64), (w_in.shape[1],))
    loss, tape, leaves, info = loss_total(params, w_in[:, keep], w_target[:, keep], dt[keep], prob, cfg, base)
    info["skipped"] = skipped
    return loss, tape, leaves, info


def backward(tape: ad.Tape, loss, leaves):
    """Reverse-mode gradient of ``loss`` with respect to ``leaves``."""
    return tape.gradient(loss, leaves)


def value_and_grad(params, w_in, w_target, dt, prob, cfg, arrays=None):
    loss, tape, leaves, info = loss_total(params, w_in, w_target, dt, prob, cfg, arrays)
    return float(ad.value(loss)), backward(tape, loss, leaves), info


def data_loss_value(params, w_in, w_target, dt, prob, cfg, chunk: int = 256) -> float:
    """Mean per-sample data loss (no tape), evaluated in chunks."""
    n = w_in.shape[1]
    if n == 0:
        return float("nan")
    dt = np.broadcast_to(np.asarray(dt, dtype=np.float64), (n,))
    total = 0.0
    for lo in range(0, n, chunk):
        sl = slice(lo, min(n, lo + chunk))
        w_next = predict(params.arrays(), params, w_in[:, sl], dt[sl], prob)
        u_next = physics.conserved_to_primitive(prob.eq, w_next, check=False)
        u_ref = physics.conserved_to_primitive(prob.eq, w_target[:, sl], check=False)
        total += float(np.sum(loss_data(u_next, u_ref, cfg.lambda2, per_sample=True)))
    return total / n


# ---------------------------------------------------------------- fitting

def split_indices(dataset):
    """Train/validation sample indices; the last ``max(1, round(0.1 n_ic))``
    initial conditions are held out (none when there is a single IC)."""
    n_ic = dataset.n_ic
    n_val = max(1, round(0.1 * n_ic)) if n_ic > 1 else 0
    ic = dataset.ic_index
    val = np.flatnonzero(ic >= n_ic - n_val)
    train = np.flatnonzero(ic < n_ic - n_val)
    return train, val


def _batch(dataset, idx):
    return (np.moveaxis(dataset.inputs[idx], 0, 1), np.moveaxis(dataset.targets[idx], 0, 1), dataset.dts[idx])


def _run_phase(dataset, params, cfg, epochs, phase, zero_walls, adam, metrics, writer, t0, ckpt_dir, epoch0):
    if dataset is None or len(dataset) == 0:
        raise ConfigurationError(f"{phase} phase has no samples")
    if dataset.eq.nvars != params.nvars or dataset.grid.ndim != params.ndim:
        raise ConfigurationError(f"network does not match the {phase} dataset equation set")
    # inference zeroes the wall cells whenever a slip wall is present, so training does too
    zero_walls = zero_walls or dataset.bc.has(Slip)
    prob = Problem(dataset.eq, dataset.grid, dataset.bc, fv.SchemeConfig(cfl=cfg.cfl), zero_walls, cfg.wall_width)
    train_idx, val_idx = split_indices(dataset)
    if train_idx.size == 0:
        train_idx = val_idx
    arrays = params.arrays()
    for e in range(epochs):
        rng = np.random.default_rng([cfg.seed, 0 if phase == "periodic" else 1, e])
        order = train_idx[rng.permutation(train_idx.size)]
        losses, weights, skipped = [], [], 0
        for lo in range(0, order.size, cfg.batch_size):
            idx = np.sort(order[lo:lo + cfg.batch_size])
            w_in, w_t, dt = _batch(dataset, idx)
            try:
                val, grads, info = value_and_grad(params, w_in, w_t, dt, prob, cfg, arrays)
            except AdmissibilityError:
                skipped += idx.size
                continue
            skipped += info["skipped"].size
            if skipped > cfg.max_skip_fraction * order.size:
                raise TrainingAborted(f"{skipped} of {order.size} samples inadmissible in {phase} epoch {e}")
            arrays, adam = adam_update(arrays, grads, adam, cfg.lr)
            losses.append(val)
            weights.append(idx.size - info["skipped"].size)
        if skipped > cfg.max_skip_fraction * order.size:
            raise TrainingAborted(f"{skipped} of {order.size} samples inadmissible in {phase} epoch {e}")
        params = params.with_arrays(arrays)
        train_loss = float(np.average(losses, weights=weights)) if losses else float("nan")
        if val_idx.size:
            w_in, w_t, dt = _batch(dataset, val_idx)
            val_loss = data_loss_value(params, w_in, w_t, dt, prob, cfg)
        else:
            val_loss = float("nan")
        row = {"epoch": epoch0 + e, "phase": phase, "train_loss": train_loss, "val_loss": val_loss,
               "skipped_samples": skipped, "wall_time_s": round(time.perf_counter() - t0, 3)}
        metrics.append(row)
        log.info("epoch %d (%s): train %.6e val %.6e skipped %d", row["epoch"], phase, train_loss, val_loss, skipped)
        if writer is not None:
            writer.writerow(row)
        if ckpt_dir is not None and cfg.checkpoint_every and (epoch0 + e + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(Path(ckpt_dir) / f"epoch_{epoch0 + e + 1:04d}", params, {"epoch": epoch0 + e + 1})
    return params, adam


def fit(dataset, params0: NetworkParams, cfg: TrainConfig, slip_dataset=None, metrics_path=None,
        checkpoint_dir=None):
    """Periodic pre-training followed by optional slip-wall fine-tuning.

    The slip phase zeroes the network contribution in the ``wall_width``
    cells next to slip walls.  Returns ``(params, metrics)`` where metrics is
    a list of per-epoch rows.
    """
    if dataset is None or len(dataset) == 0:
        raise ConfigurationError("empty dataset")
    metrics: list = []
    t0 = time.perf_counter()
    params = params0
    adam = AdamState.zeros_like(params.arrays())
    fh = writer = None
    if metrics_path is not None:
        fh = open(metrics_path, "w", newline="")
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        writer.writeheader()
    try:
        if cfg.epochs:
            params, adam = _run_phase(dataset, params, cfg, cfg.epochs, "periodic", False, adam, metrics, writer,
                                      t0, checkpoint_dir, 0)
        if cfg.slip_epochs:
            if slip_dataset is None:
                raise ConfigurationError("slip fine-tuning requested without a slip dataset")
            params, adam = _run_phase(slip_dataset, params, cfg, cfg.slip_epochs, "slip", True, adam, metrics,
                                      writer, t0, checkpoint_dir, cfg.epochs)
    finally:
        if fh is not None:
            fh.close()
    return params, metrics
