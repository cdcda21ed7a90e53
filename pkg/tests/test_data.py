import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldfv import data, physics
from ldfv.errors import ConfigurationError, ShapeError


def test_mixture_counts_examples():
    assert data.mixture_counts({"a": 0.5, "b": 0.5}, 5) == {"a": 3, "b": 2}
    assert data.mixture_counts({"a": 1.0}, 4) == {"a": 4}
    with pytest.raises(ConfigurationError):
        data.mixture_counts({"a": 0.7, "b": 0.7}, 4)


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=5), st.integers(0, 200))
def test_mixture_counts_total(ws, n):
    w = np.array(ws) / np.sum(ws)
    weights = {f"k{i}": float(v) for i, v in enumerate(w)}
    counts = data.mixture_counts(weights, n)
    assert sum(counts.values()) == n
    for k, c in counts.items():
        assert abs(c - weights[k] * n) < 1.0 + 1e-9


def test_make_rng_streams_independent():
    a = data.make_rng(0, 0, 3).random(4)
    b = data.make_rng(0, 1, 3).random(4)
    c = data.make_rng(0, 0, 3).random(4)
    np.testing.assert_array_equal(a, c)
    assert not np.allclose(a, b)


def test_burgers_ic_is_bounded():
    rng = data.make_rng(1)
    x = (np.arange(64) + 0.5) / 64
    u = data.gen_burgers_ic(rng, x)
    assert u.shape == (1, 64) and np.all(np.isfinite(u))


@pytest.mark.parametrize("kind", list(data.DEFAULT_MIXTURES["euler1d"]))
def test_euler1d_ics_admissible_or_redrawn(kind):
    eq = physics.Euler1D()
    spec = data.DatasetSpec(eq="euler1d", nx=32, n_ic=1, n_steps=2, seed=2, mixture={kind: 1.0})
    ds = data.build_dataset(spec)
    assert physics.admissible_mask(eq, physics.conserved_to_primitive(eq, ds.inputs[0])).all()


def _spec(**kw):
    base = dict(eq="burgers", nx=32, n_ic=3, n_steps=4, seed=5)
    base.update(kw)
    return data.DatasetSpec(**base)


def test_dataset_shapes_and_pairs():
    ds = data.build_dataset(_spec())
    assert len(ds) == 12
    assert ds.inputs.shape == (12, 1, 1, 16)
    assert ds.grid.nx == 16 and ds.grid.dx == pytest.approx(1 / 16)
    # consecutive samples of one IC chain: target k equals input k + 1
    np.testing.assert_array_equal(ds.targets[0], ds.inputs[1])
    np.testing.assert_array_equal(ds.ic_index, np.repeat([0, 1, 2], 4))
    assert np.all(ds.dts > 0)
    assert np.all(np.isfinite(ds.targets))


def test_dataset_is_deterministic_and_roundtrips(tmp_path):
    a = data.build_dataset(_spec())
    b = data.build_dataset(_spec())
    assert a.to_bytes() == b.to_bytes()
    c = data.build_dataset(_spec(seed=6))
    assert a.to_bytes() != c.to_bytes()
    p = tmp_path / "d.ldfvds"
    data.write_dataset(p, a)
    r = data.read_dataset(p)
    np.testing.assert_array_equal(r.inputs, a.inputs)
    np.testing.assert_array_equal(r.targets, a.targets)
    np.testing.assert_array_equal(r.dts, a.dts)
    assert r.to_bytes() == a.to_bytes()


def test_header_fields(tmp_path):
    ds = data.build_dataset(_spec(bc="slip"))
    p = tmp_path / "d.ldfvds"
    data.write_dataset(p, ds)
    h = data.inspect_dataset(p)
    assert h["samples"] == 12 and h["R"] == 2 and h["eq"] == "burgers" and h["bc"] == "slip"
    assert (h["n_ic"], h["n_steps"], h["seed"], h["nx"]) == (3, 4, 5, 16)
    assert h == ds.header()


def test_corrupt_dataset_rejected(tmp_path):
    ds = data.build_dataset(_spec())
    buf = ds.to_bytes()
    with pytest.raises(ShapeError):
        data.dataset_from_bytes(buf[:-3])
    with pytest.raises(ShapeError):
        data.dataset_from_bytes(b"XXXX" + buf[4:])
    with pytest.raises(ShapeError):
        data.dataset_from_bytes(buf[:10])


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        data.DatasetSpec(eq="navier")
    with pytest.raises(ConfigurationError):
        data.DatasetSpec(nx=33)
    with pytest.raises(ConfigurationError):
        data.DatasetSpec(n_ic=0)
    with pytest.raises(ConfigurationError):
        data.DatasetSpec(bc="wall")


def test_euler2d_dataset_small():
    ds = data.build_dataset(data.DatasetSpec(eq="euler2d", nx=16, n_ic=1, n_steps=2, seed=0))
    assert ds.inputs.shape == (2, 4, 8, 8)
    eq = physics.Euler2D()
    assert physics.admissible_mask(eq, physics.conserved_to_primitive(eq, ds.targets[-1])).all()
