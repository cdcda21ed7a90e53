import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ldfv.errors import ConfigurationError, ShapeError
from ldfv.grid import (Field, field_from_bytes, field_to_bytes, l1_error, l2_error, linf_error,
                       make_uniform_grid, project_fine_to_coarse, read_field, total_variation, write_field)


def test_uniform_grid_1d():
    g = make_uniform_grid(1, (0.0, 1.0), 8)
    assert g.dx == 0.125
    assert g.shape == (1, 8)
    np.testing.assert_allclose(g.x_centers(), (np.arange(8) + 0.5) / 8)


def test_uniform_grid_2d_mesh():
    g = make_uniform_grid(2, ((0.0, 3.0), (0.0, 1.0)), (12, 4))
    X, Y = g.mesh()
    assert X.shape == (4, 12)
    assert g.dx == g.dy == 0.25
    assert X[0, 1] - X[0, 0] == pytest.approx(0.25)


@pytest.mark.parametrize("args", [(3, (0, 1), 8), (1, (1, 0), 8), (1, (0, 1), 3)])
def test_bad_grids(args):
    with pytest.raises(ConfigurationError):
        make_uniform_grid(*args)


def test_field_shape_and_finite():
    g = make_uniform_grid(1, (0, 1), 8)
    assert Field(g, np.zeros(8)).data.shape == (1, 1, 8)
    with pytest.raises(ShapeError):
        Field(g, np.zeros(7))
    with pytest.raises(ShapeError):
        Field(g, np.full(8, np.nan))


def test_field_is_read_only():
    f = Field(make_uniform_grid(1, (0, 1), 8), np.zeros(8))
    with pytest.raises(ValueError):
        f.data[0, 0, 0] = 1.0


def test_projection_takes_nodal_values():
    g = make_uniform_grid(1, (0, 1), 8)
    f = Field(g, np.arange(8.0))
    c = project_fine_to_coarse(f, 2)
    assert c.grid.nx == 4
    np.testing.assert_array_equal(c.data[0, 0], [1, 3, 5, 7])
    g2 = make_uniform_grid(2, ((0, 1), (0, 1)), (8, 8))
    f2 = Field(g2, np.arange(64.0).reshape(1, 8, 8))
    assert project_fine_to_coarse(f2, 4).data.shape == (1, 2, 2)


def test_projection_rejects_bad_ratio():
    f = Field(make_uniform_grid(1, (0, 1), 9), np.zeros(9))
    with pytest.raises(ShapeError):
        project_fine_to_coarse(f, 2)
    with pytest.raises(ConfigurationError):
        project_fine_to_coarse(f, 1)


def test_norms():
    a, b = np.array([0.0, 2.0]), np.zeros(2)
    assert l1_error(a, b) == 1.0
    assert l2_error(a, b) == pytest.approx(np.sqrt(2.0))
    assert linf_error(a, b) == 2.0
    with pytest.raises(ShapeError):
        l2_error(np.zeros(3), np.zeros(2))


def test_total_variation():
    assert total_variation(np.array([0.0, 1.0, 0.0, 2.0])) == 4.0
    assert total_variation(np.array([0.0, 1.0, 0.0, 2.0]), periodic=True) == 6.0


@given(hnp.arrays(np.float64, st.integers(4, 32), elements=st.floats(-1e3, 1e3)))
def test_field_roundtrip(tmp_path_factory, arr):
    g = make_uniform_grid(1, (0.0, 2.0), arr.size)
    f = Field(g, arr)
    back = field_from_bytes(field_to_bytes(f))
    assert back.grid == g
    np.testing.assert_array_equal(back.data, f.data)


def test_field_file_roundtrip(tmp_path):
    g = make_uniform_grid(2, ((0, 1), (0, 2)), (4, 8))
    f = Field(g, np.random.default_rng(0).random((4, 8, 4)))
    write_field(tmp_path / "f.ldfv", f)
    back = read_field(tmp_path / "f.ldfv")
    np.testing.assert_array_equal(back.data, f.data)
    assert back.grid.dx == g.dx and back.grid.dy == g.dy


def test_field_header_checked():
    f = Field(make_uniform_grid(1, (0, 1), 4), np.zeros(4))
    raw = bytearray(field_to_bytes(f))
    raw[:4] = b"XXXX"
    with pytest.raises(Exception):
        field_from_bytes(bytes(raw))
