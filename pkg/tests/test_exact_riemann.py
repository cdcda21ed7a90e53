import numpy as np
import pytest

from ldfv.errors import ConfigurationError
from ldfv.exact_riemann import cell_average_solution, sample, star_state

SOD_L, SOD_R = (1.0, 0.0, 1.0), (0.125, 0.0, 0.1)


def test_sod_star_state():
    p, u = star_state(SOD_L, SOD_R)
    assert p == pytest.approx(0.30313, abs=1e-5)
    assert u == pytest.approx(0.92745, abs=1e-5)


def test_symmetric_collision_has_zero_velocity():
    p, u = star_state((1.0, 1.0, 1.0), (1.0, -1.0, 1.0))
    assert u == pytest.approx(0.0, abs=1e-13)
    assert p > 1.0


def test_sample_far_field_and_plateau():
    xi = np.array([-10.0, 10.0, 0.5])
    out = sample(SOD_L, SOD_R, xi)
    np.testing.assert_allclose(out[:, 0], SOD_L)
    np.testing.assert_allclose(out[:, 1], SOD_R)
    # contact / shock region between u* and the shock speed
    p, u = star_state(SOD_L, SOD_R)
    np.testing.assert_allclose(out[1:, 2], [u, p], rtol=1e-10)


def test_trivial_problem_is_constant():
    edges = np.linspace(0, 1, 9)
    w = cell_average_solution((1.0, 0.3, 2.0), (1.0, 0.3, 2.0), edges, 0.2)
    np.testing.assert_allclose(w[0], 1.0)
    np.testing.assert_allclose(w[1], 0.3)


def test_mass_is_conserved_in_closed_window():
    edges = np.linspace(0, 1, 401)
    w0 = cell_average_solution(SOD_L, SOD_R, edges, 0.0, n_sub=64)
    w1 = cell_average_solution(SOD_L, SOD_R, edges, 0.15, n_sub=64)
    # waves stay inside the window, so total mass and energy do not change
    np.testing.assert_allclose(w1[0].mean(), w0[0].mean(), rtol=1e-4)
    np.testing.assert_allclose(w1[2].mean(), w0[2].mean(), rtol=1e-4)


def test_invalid_data():
    with pytest.raises(ConfigurationError):
        star_state((1.0, 0.0, -1.0), SOD_R)
    with pytest.raises(ConfigurationError):
        star_state((1.0, -20.0, 1.0), (1.0, 20.0, 1.0))
