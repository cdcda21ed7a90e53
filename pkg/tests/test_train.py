import csv

import numpy as np
import pytest

from ldfv import autodiff as ad
from ldfv import fv, physics, train
from ldfv.boundary import BoundarySpec, Slip
from ldfv.data import DatasetSpec, build_dataset
from ldfv.errors import ConfigurationError, ShapeError
from ldfv.grid import make_uniform_grid
from ldfv.model import init_params

B = physics.Burgers()


def test_loss_data_examples():
    assert train.loss_data(np.zeros(4), np.zeros(4)) == 0.0
    assert train.loss_data(np.full(4, 2.0), np.zeros(4)) == pytest.approx(4.0)
    assert train.loss_data(np.array([0.0, 2.0]), np.zeros(2)) == pytest.approx(1 + np.sqrt(2))
    with pytest.raises(ShapeError):
        train.loss_data(np.zeros(3), np.zeros(4))


def test_loss_tvd_examples():
    u_t = np.array([0.0, 1.0, 0.0])[None, None, None, :]  # TV 2
    up = np.array([0.0, 1.25, 0.0])[None, None, None, :]  # TV 2.5
    assert train.loss_tvd(u_t, up)[0] == pytest.approx(0.5)
    assert train.loss_tvd(up, u_t)[0] == 0.0
    assert train.loss_tvd(u_t, u_t)[0] == 0.0


def test_loss_entropy_examples():
    bc = BoundarySpec.periodic()
    u = np.full((1, 1, 1, 8), 0.7)
    assert train.loss_entropy(B, u, u, 0.01, (0.125, 1.0), bc)[0] == 0.0
    # smaller |u| everywhere with uniform flux: entropy drops, no penalty
    assert train.loss_entropy(B, u, 0.5 * u, 0.01, (0.125, 1.0), bc)[0] == 0.0
    # one-cell violation K = 0.1: h * (eta_next - eta_t) = 0.1 with constant flux
    h = 0.125
    up = u.copy()
    up[..., 3] = np.sqrt(0.7**2 + 2 * 0.1 / h)
    assert train.loss_entropy(B, u, up, 0.01, (h, 1.0), bc)[0] == pytest.approx(0.01)


def test_loss_reg_examples():
    assert train.loss_reg([np.zeros(3)]) == 0.0
    assert train.loss_reg([np.array([-3.0])]) == 3.0
    w = [np.array([1.0, -2.0]), np.array([[0.5]])]
    assert train.loss_reg([2 * a for a in w]) == 2 * train.loss_reg(w)


def test_adam_examples():
    st = train.AdamState.zeros_like([np.zeros(2)])
    p, st2 = train.adam_update([np.ones(2)], [np.zeros(2)], st, 1e-2)
    np.testing.assert_array_equal(p[0], 1.0)
    st = train.AdamState.zeros_like([np.zeros(2)])
    p1, st = train.adam_update([np.zeros(2)], [np.ones(2)], st, 0.1)
    np.testing.assert_allclose(p1[0], -0.1 / (1 + 1e-8))
    p2, st = train.adam_update(p1, [np.ones(2)], st, 0.1)
    assert np.all(np.abs(p2[0] - p1[0]) <= 0.1 + 1e-15)


def _small_problem(nx=16):
    g = make_uniform_grid(1, (0, 1), nx)
    return train.Problem(B, g, BoundarySpec.periodic())


def _random_batch(nx=16, n=3, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1, 1, size=(1, n, 1, nx))
    return w


def test_reduction_loss_is_regularization_only():
    prob = _small_problem()
    w_in = _random_batch()
    dt = 0.01
    target = fv.step_array(w_in, prob.grid, prob.bc, B, prob.scheme, dt)
    p = init_params(1, 1, seed=0)
    # the discrete entropy residual of an exact classical step is not sign-definite, so only
    # the data and TVD terms are guaranteed to vanish here
    cfg = train.TrainConfig(lambda_reg=1e-3, lambda_ent=0.0)
    loss, *_ = train.loss_total(p, w_in, target, dt, prob, cfg)
    assert float(ad.value(loss)) == pytest.approx(1e-3 * train.loss_reg(p.arrays()), rel=1e-12, abs=1e-15)


def test_all_penalties_zero_gives_data_loss():
    prob = _small_problem()
    w_in = _random_batch()
    p = init_params(1, 1, seed=1, zero_last=False)
    cfg = train.TrainConfig(lambda_ent=0, lambda_tvd=0, lambda_reg=0)
    target = _random_batch(seed=1)
    loss, _, _, info = train.loss_total(p, w_in, target, 0.01, prob, cfg)
    assert float(ad.value(loss)) == pytest.approx(info["data"], rel=1e-14)


def test_composed_gradient_euler_fd():
    rng = np.random.default_rng(3)
    eq = physics.Euler1D()
    g = make_uniform_grid(1, (0, 1), 12)
    prob = train.Problem(eq, g, BoundarySpec.uniform(Slip()), zero_walls=True)
    u = np.stack([rng.uniform(1, 2, (2, 1, 12)), 0.2 * rng.normal(size=(2, 1, 12)), rng.uniform(1, 2, (2, 1, 12))])
    w_in = physics.primitive_to_conserved(eq, u)
    w_t = w_in * (1 + 0.01 * rng.normal(size=w_in.shape))
    p = init_params(3, 1, seed=2, zero_last=False, hidden=6)
    p = p.with_arrays([a * 0.3 for a in p.arrays()])
    cfg = train.TrainConfig(lambda_ent=1e-2, lambda_tvd=1e-2, lambda_reg=1e-3)
    dt = 0.005
    _, grads, _ = train.value_and_grad(p, w_in, w_t, dt, prob, cfg)
    arrays = p.arrays()

    def f(arrs):
        loss, *_ = train.loss_total(p, w_in, w_t, dt, prob, cfg, arrs)
        return float(ad.value(loss))

    worst = 0.0
    for k in range(10):
        d = [rng.normal(size=a.shape) for a in arrays]
        h = 1e-6
        fd = (f([a + h * v for a, v in zip(arrays, d)]) - f([a - h * v for a, v in zip(arrays, d)])) / (2 * h)
        an = sum(float(np.sum(gr * v)) for gr, v in zip(grads, d))
        worst = max(worst, abs(fd - an) / max(abs(fd), 1e-8))
    assert worst < 1e-5


def test_predictions_conserve_mass():
    prob = _small_problem()
    w_in = _random_batch(n=4)
    p = init_params(1, 1, seed=5, zero_last=False)
    w_next = train.predict(p.arrays(), p, w_in, 0.01, prob)
    np.testing.assert_allclose(w_next.sum(axis=(0, 2, 3)), w_in.sum(axis=(0, 2, 3)), rtol=0, atol=1e-12)


def _tiny_dataset(n_ic=3, n_steps=6, seed=0, bc="periodic", eq="burgers", nx=32):
    return build_dataset(DatasetSpec(eq=eq, nx=nx, n_ic=n_ic, n_steps=n_steps, seed=seed, bc=bc))


def test_split_holds_out_last_ic():
    ds = _tiny_dataset(n_ic=3)
    tr, val = train.split_indices(ds)
    assert set(ds.ic_index[val]) == {2}
    assert set(ds.ic_index[tr]) == {0, 1}
    tr1, val1 = train.split_indices(_tiny_dataset(n_ic=1))
    assert val1.size == 0 and tr1.size == 6


def test_fit_zero_epochs_and_zero_lr(tmp_path):
    ds = _tiny_dataset()
    p0 = init_params(1, 1, seed=0, zero_last=False)
    p, metrics = train.fit(ds, p0, train.TrainConfig(epochs=0))
    assert metrics == [] and p is p0
    cfg = train.TrainConfig(epochs=1, lr=0.0, lambda_ent=0, lambda_tvd=0, lambda_reg=0, batch_size=4)
    p, metrics = train.fit(ds, p0, cfg, metrics_path=tmp_path / "m.csv")
    for a, b in zip(p.arrays(), p0.arrays()):
        np.testing.assert_array_equal(a, b)
    prob = train.Problem(ds.eq, ds.grid, ds.bc)
    _, val = train.split_indices(ds)
    w_in, w_t, dt = train._batch(ds, val)
    base = train.data_loss_value(p0, w_in, w_t, dt, prob, cfg)
    assert metrics[0]["val_loss"] == pytest.approx(base, rel=1e-12)
    rows = list(csv.DictReader(open(tmp_path / "m.csv")))
    assert list(rows[0]) == list(train.METRIC_COLUMNS)


def test_fit_is_deterministic():
    ds = _tiny_dataset()
    cfg = train.TrainConfig(epochs=2, batch_size=4, seed=3)
    p0 = init_params(1, 1, seed=0)
    a, _ = train.fit(ds, p0, cfg)
    b, _ = train.fit(ds, p0, cfg)
    for x, y in zip(a.arrays(), b.arrays()):
        np.testing.assert_array_equal(x, y)


def test_pure_regularization_contracts():
    p = init_params(1, 1, seed=0, zero_last=False)
    arrays = p.arrays()
    state = train.AdamState.zeros_like(arrays)
    norms = [train.loss_reg(arrays)]
    for _ in range(5):
        tape = ad.Tape()
        leaves = [tape.var(a) for a in arrays]
        grads = tape.gradient(train.loss_reg(leaves), leaves)
        arrays, state = train.adam_update(arrays, grads, state, 1e-4)
        norms.append(train.loss_reg(arrays))
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_slip_phase_requires_dataset():
    ds = _tiny_dataset()
    with pytest.raises(ConfigurationError):
        train.fit(ds, init_params(1, 1), train.TrainConfig(epochs=0, slip_epochs=1))


def test_slip_phase_runs_with_zeroed_walls():
    ds = _tiny_dataset()
    slip = _tiny_dataset(bc="slip", eq="euler1d", n_ic=2, n_steps=3)
    with pytest.raises(ConfigurationError):
        train.fit(ds, init_params(1, 1), train.TrainConfig(epochs=0, slip_epochs=1), slip_dataset=slip)
    burgers_slip = _tiny_dataset(bc="slip", n_ic=2, n_steps=3)
    p, metrics = train.fit(ds, init_params(1, 1), train.TrainConfig(epochs=1, slip_epochs=1, batch_size=4),
                           slip_dataset=burgers_slip)
    assert [m["phase"] for m in metrics] == ["periodic", "slip"]


def test_config_validation():
    with pytest.raises(ConfigurationError):
        train.TrainConfig(lambda_tvd=-1)
    with pytest.raises(ConfigurationError):
        train.TrainConfig(R=1)
