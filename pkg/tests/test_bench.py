import json

import numpy as np
import pytest

from ldfv import bench, physics
from ldfv.boundary import SupersonicInflow
from ldfv.errors import ConfigurationError
from ldfv.model import init_params

EXPECTED = {"burgers-sine", "burgers-complex", "sod", "shu-osher", "riemann2d-3", "riemann2d-4", "riemann2d-6",
            "riemann2d-12", "explosion", "forward-step"}


def test_registry_contents():
    reg = bench.case_registry()
    assert set(reg) == EXPECTED
    for c in reg.values():
        g = c.grid(c.coarse)
        f = c.initial(g)
        assert f.data.shape == (c.eq.nvars,) + g.shape
        c.bc.validate(c.eq)
    with pytest.raises(ConfigurationError):
        bench.get_case("nope")


def test_sod_and_explosion_states():
    sod = bench.get_case("sod")
    u = sod.ic(sod.grid((8,)))
    np.testing.assert_allclose(u[:, 0, 0], (1.0, 0.0, 1.0))
    np.testing.assert_allclose(u[:, 0, -1], (0.125, 0.0, 0.1))
    ex = bench.get_case("explosion")
    u = ex.ic(ex.grid((16, 16)))
    np.testing.assert_allclose(u[:, 8, 8], (1.0, 0.0, 0.0, 1.0))
    np.testing.assert_allclose(u[:, 0, 0], (0.125, 0.0, 0.0, 0.1))
    assert bench.symmetry_defect(u, "diagonal") == 0.0


def test_forward_step_setup():
    fs = bench.get_case("forward-step")
    assert isinstance(fs.bc.left, SupersonicInflow)
    rho, u, v, p = fs.bc.left.state
    c = np.sqrt(1.4 * p / rho)
    assert u / c == pytest.approx(3.0)
    g = fs.grid((30, 10))
    m = fs.solid(g)
    assert m[0, -1] and not m[-1, -1] and not m[0, 0]


def test_riemann_quadrants_and_symmetry():
    c = bench.get_case("riemann2d-12")
    u = c.ic(c.grid((16, 16)))
    assert bench.symmetry_defect(u, c.symmetry) == 0.0
    assert bench.get_case("riemann2d-6").symmetry == "point"
    with pytest.raises(ConfigurationError):
        bench.symmetry_defect(u, "mirror")


def test_symmetry_defect_detects_breaking():
    u = np.ones((4, 6, 6))
    u[1:3] = 0.0
    assert bench.symmetry_defect(u, "point") == 0.0
    u[0, 1, 2] = 2.0
    assert bench.symmetry_defect(u, "point") == 1.0
    assert bench.symmetry_defect(u, "diagonal") == 1.0


def test_same_grid_reference_has_zero_error():
    c = bench.get_case("burgers-sine")
    rep = bench.run_case(c, coarse=(32,), fine=(32,))
    assert rep["status"] == "ok" and rep["R"] == 1
    assert rep["l2_u"] == 0.0


def test_error_drops_with_resolution():
    c = bench.get_case("sod")
    e = [bench.run_case(c, coarse=(n,), fine=(256,))["l2_density"] for n in (32, 64, 128)]
    assert e[0] > e[1] > e[2]


def test_report_and_outputs_1d(tmp_path):
    c = bench.get_case("burgers-sine")
    rep = bench.run_case(c, init_params(1, 1), tmp_path, scale=4)
    assert rep["coarse"] == [8] and rep["fine"] == [256]
    on_disk = json.loads((tmp_path / "report.json").read_text())
    assert on_disk["l2_u"] == pytest.approx(rep["l2_u"])
    # zero network reproduces the classical error
    assert rep["variants"]["learned"]["l2_u"] == pytest.approx(rep["variants"]["classical"]["l2_u"], abs=1e-13)
    header = (tmp_path / "slice.csv").read_text().splitlines()[0].split(",")
    assert header == ["x", "reference_u", "classical_u", "learned_u"]


def test_outputs_2d(tmp_path):
    c = bench.get_case("riemann2d-12")
    rep = bench.run_case(c, out_dir=tmp_path, scale=8)
    assert rep["status"] == "ok" and rep["symmetry_defect"]["classical"] < 1e-10
    for name in ("density_reference.ppm", "density_classical.ppm", "contours_classical.ppm", "slice_y_mid.csv"):
        assert (tmp_path / name).exists()


def test_bad_scale():
    with pytest.raises(ConfigurationError):
        bench.run_case(bench.get_case("sod"), scale=3)


def _vacuum_ic(grid):
    x = grid.x_centers()
    return np.stack([np.ones_like(x), np.where(x < 0.5, -5.0, 5.0), np.full_like(x, 0.01)])[:, None, :]


def test_admissibility_failure_reported(tmp_path):
    sod = bench.get_case("sod")
    c = bench.BenchCase("vacuum", sod.eq, _vacuum_ic, sod.bc, (0.0, 1.0), (64,), (32,), 0.1)
    rep = bench.run_case(c, out_dir=tmp_path, cfl=1.0)
    assert rep["status"] == "failed" and "step" in rep
    assert json.loads((tmp_path / "report.json").read_text())["status"] == "failed"
