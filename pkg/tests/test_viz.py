import colorsys

import numpy as np
import pytest

from blurflow.viz import ERROR_LOW, render_error_map, render_flow_color


def test_zero_flow_is_uniform_white():
    img = render_flow_color(np.zeros((5, 7, 2)))
    assert img.shape == (5, 7, 3)
    np.testing.assert_allclose(img, 1.0)


def test_antiparallel_vectors_have_opposite_hues():
    w = np.zeros((1, 2, 2))
    w[0, 0] = (1.0, 0.5)
    w[0, 1] = (-1.0, -0.5)
    img = render_flow_color(w)
    h0 = colorsys.rgb_to_hsv(*img[0, 0])[0]
    h1 = colorsys.rgb_to_hsv(*img[0, 1])[0]
    diff = abs(h0 - h1) * 360.0
    assert min(diff, 360.0 - diff) == pytest.approx(180.0, abs=1e-6)


def test_hue_oracle_and_saturation():
    w = np.zeros((1, 3, 2))
    w[0, 0] = (2.0, 0.0)
    w[0, 1] = (0.0, 1.0)
    img = render_flow_color(w)
    # +x is hue 0 (red) at full saturation; +y is hue 90 degrees at half saturation
    np.testing.assert_allclose(img[0, 0], [1.0, 0.0, 0.0], atol=1e-12)
    h, s, v = colorsys.rgb_to_hsv(*img[0, 1])
    assert h == pytest.approx(0.25)
    assert s == pytest.approx(0.5)
    assert v == pytest.approx(1.0)


def test_exact_flow_gives_uniform_low_error_colour():
    rng = np.random.default_rng(0)
    gt = rng.normal(size=(6, 5, 2))
    img = render_error_map(gt, gt)
    np.testing.assert_allclose(img, np.broadcast_to(ERROR_LOW, img.shape))


def test_masked_pixels_are_black_and_max_error_is_red():
    gt = np.zeros((4, 4, 2))
    w = gt.copy()
    w[1, 1] = (3.0, 4.0)
    w[2, 2] = (0.3, 0.4)
    mask = np.ones((4, 4), dtype=bool)
    mask[0, :] = False
    img = render_error_map(w, gt, mask)
    np.testing.assert_array_equal(img[0], 0.0)
    np.testing.assert_allclose(img[1, 1], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(img[2, 2], ERROR_LOW + 0.1 * (np.array([1.0, 0.0, 0.0]) - ERROR_LOW))


def test_shape_validation():
    with pytest.raises(ValueError):
        render_flow_color(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        render_error_map(np.zeros((3, 3, 2)), np.zeros((3, 4, 2)))
