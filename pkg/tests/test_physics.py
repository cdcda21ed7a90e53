import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldfv import physics
from ldfv.errors import AdmissibilityError, ConfigurationError

pos = st.floats(0.05, 10.0)
vel = st.floats(-5.0, 5.0)


def test_kinds_and_shapes():
    assert physics.Burgers().nvars == 1
    assert physics.Euler1D().nvars == 3
    e2 = physics.Euler2D()
    assert (e2.nvars, e2.ndim, e2.velocity_slots) == (4, 2, (1, 2))
    with pytest.raises(ConfigurationError):
        physics.EquationSet("maxwell")
    with pytest.raises(ConfigurationError):
        physics.Euler1D(gamma=1.0)


@given(pos, vel, pos)
def test_euler1d_roundtrip(rho, u, p):
    eq = physics.Euler1D()
    prim = np.array([rho, u, p])
    w = physics.primitive_to_conserved(eq, prim)
    np.testing.assert_allclose(physics.conserved_to_primitive(eq, w), prim, rtol=1e-12, atol=1e-12)


@given(pos, vel, vel, pos)
def test_euler2d_roundtrip(rho, u, v, p):
    eq = physics.Euler2D()
    prim = np.array([rho, u, v, p])
    w = physics.primitive_to_conserved(eq, prim)
    np.testing.assert_allclose(physics.conserved_to_primitive(eq, w), prim, rtol=1e-11, atol=1e-11)


def test_energy_value():
    w = physics.primitive_to_conserved(physics.Euler1D(), np.array([1.0, 2.0, 0.4]))
    np.testing.assert_allclose(w, [1.0, 2.0, 0.4 / 0.4 + 2.0])


def test_inadmissible_states():
    eq = physics.Euler1D()
    with pytest.raises(AdmissibilityError):
        physics.primitive_to_conserved(eq, np.array([-1.0, 0.0, 1.0]))
    with pytest.raises(AdmissibilityError):
        physics.conserved_to_primitive(eq, np.array([1.0, 0.0, -1.0]))
    assert not physics.admissible_mask(eq, np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 0.0]])).all()


def test_fluxes():
    assert physics.flux(physics.Burgers(), np.array([2.0]))[0] == 2.0
    assert physics.flux(physics.LinearAdvection(3.0), np.array([2.0]))[0] == 6.0
    eq = physics.Euler1D()
    f = physics.flux(eq, physics.primitive_to_conserved(eq, np.array([1.0, 0.0, 1.0])))
    np.testing.assert_allclose(f, [0.0, 1.0, 0.0])


def test_2d_flux_swap_symmetry():
    eq = physics.Euler2D()
    u = np.array([1.3, 0.4, -0.7, 2.1])
    uswap = np.array([1.3, -0.7, 0.4, 2.1])
    fx = physics.flux(eq, physics.primitive_to_conserved(eq, u), 0)
    gy = physics.flux(eq, physics.primitive_to_conserved(eq, uswap), 1)
    np.testing.assert_array_equal(fx[[0, 2, 1, 3]], gy)


def test_wave_speeds():
    eq = physics.Euler1D()
    w = physics.primitive_to_conserved(eq, np.array([1.4, 3.0, 1.0]))
    assert physics.max_wave_speed(eq, w)[()] == pytest.approx(4.0)
    assert float(physics.max_wave_speed(physics.Burgers(), np.array([-2.0]))) == 2.0


def test_entropy_pair():
    eq = physics.Burgers()
    assert physics.entropy(eq, np.array([2.0]))[()] == 2.0
    assert physics.entropy_flux(eq, np.array([3.0]))[()] == pytest.approx(9.0)
    e = physics.Euler1D()
    w = physics.primitive_to_conserved(e, np.array([1.0, 2.0, 1.0]))
    assert physics.entropy(e, w)[()] == pytest.approx(0.0)
