import numpy as np

from ldfv import render


def test_colormap_endpoints():
    np.testing.assert_allclose(render.colormap(0.0), render._ANCHORS[0])
    np.testing.assert_allclose(render.colormap(1.0), render._ANCHORS[-1])
    assert render.colormap(np.zeros((3, 5))).shape == (3, 5, 3)


def test_ppm_roundtrip(tmp_path):
    rgb = np.random.default_rng(0).uniform(size=(4, 7, 3))
    render.write_ppm(tmp_path / "a.ppm", rgb)
    back = render.read_ppm(tmp_path / "a.ppm")
    assert back.shape == (4, 7, 3)
    np.testing.assert_array_equal(back, np.round(rgb * 255).astype(np.uint8))


def test_density_map_orientation_and_nan():
    f = np.array([[0.0, 0.0], [1.0, np.nan]])
    img = render.density_map(f)
    # the top image row is the highest y row
    np.testing.assert_allclose(img[0, 0], render._ANCHORS[-1])
    np.testing.assert_allclose(img[1, 0], render._ANCHORS[0])
    assert np.all(np.isfinite(img))


def test_contour_lines_on_band_changes():
    f = np.tile(np.linspace(0, 1, 20), (3, 1))
    img = render.contour_map(f, levels=4)
    dark = img[0, :, 0] == 0.0
    assert 3 <= dark.sum() <= 4
    assert np.all(render.contour_map(np.ones((3, 3)), 5) > 0)


def test_svg_plot(tmp_path):
    p = tmp_path / "p.svg"
    render.write_svg_plot(p, {"a": ([0, 1, 2], [1, 0, 1]), "b": ([0, 2], [3, 3])}, "x", "y", "t")
    text = p.read_text()
    assert text.startswith("<svg") and text.count("<polyline") == 2
