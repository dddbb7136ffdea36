import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from blurflow.automotion import (
    AffineModel, NoConsensusError, RansacParams, _fit_affine, affine_to_motion_angle, correspondences,
    estimate_affine_ransac, estimate_motion_angle,
)


def _affine_flow(m, h=40, w=40):
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    x = xx - (w - 1) / 2
    y = yy - (h - 1) / 2
    u = m[0, 0] * x + m[0, 1] * y + m[0, 2] - x
    v = m[1, 0] * x + m[1, 1] * y + m[1, 2] - y
    return np.stack([u, v], axis=2)


def test_pure_translation():
    flow = np.zeros((20, 24, 2))
    flow[..., 0], flow[..., 1] = 2.0, -1.0
    a = estimate_affine_ransac(flow)
    np.testing.assert_allclose(a.as_array(), [[1, 0, 2], [0, 1, -1]], atol=1e-12)


def test_zero_flow_identity():
    a = estimate_affine_ransac(np.zeros((16, 16, 2)))
    np.testing.assert_allclose(a.as_array(), [[1, 0, 0], [0, 1, 0]], atol=1e-12)


def test_recovers_affine_with_outliers():
    m = np.array([[1.02, 0.03, 1.5], [-0.02, 0.97, -0.8]])
    flow = _affine_flow(m)
    rng = np.random.default_rng(3)
    bad = rng.random(flow.shape[:2]) < 0.3
    flow[bad] = rng.uniform(-10, 10, (bad.sum(), 2))
    a = estimate_affine_ransac(flow, RansacParams(stride=1))
    assert np.abs(a.as_array() - m).max() < 1e-3


def test_outlier_free_equals_least_squares(rng):
    m = np.array([[0.98, 0.01, -0.4], [0.02, 1.01, 0.9]])
    flow = _affine_flow(m, 24, 32) + rng.normal(0, 0.05, (24, 32, 2))
    p = RansacParams(stride=4, inlier_threshold=5.0)
    src, dst = correspondences(flow, 4)
    np.testing.assert_allclose(estimate_affine_ransac(flow, p).as_array(), _fit_affine(src, dst), atol=1e-9)


def test_seed_reproducible(rng):
    flow = rng.normal(0, 1, (30, 30, 2))
    p = RansacParams(seed=11, inlier_threshold=1.0, min_inlier_fraction=0.0)
    assert estimate_affine_ransac(flow, p) == estimate_affine_ransac(flow, p)


def test_no_consensus():
    flow = np.random.default_rng(0).uniform(-50, 50, (30, 30, 2))
    with pytest.raises(NoConsensusError, match="no consensus affine"):
        estimate_affine_ransac(flow, RansacParams(iterations=50, min_inlier_fraction=0.5))


def test_too_few_points():
    with pytest.raises(ValueError):
        estimate_affine_ransac(np.zeros((1, 2, 2)))


@pytest.mark.parametrize("t,theta", [((1, 0), 0.0), ((1, 1), math.pi / 4), ((-1, -1), math.pi / 4), ((0, 0), 0.0),
                                     ((0, -2), math.pi / 2)])
def test_angle_cases(t, theta):
    assert affine_to_motion_angle(AffineModel(tx=t[0], ty=t[1])) == pytest.approx(theta)


@given(tx=st.floats(-10, 10), ty=st.floats(-10, 10), s=st.floats(0.01, 100))
def test_angle_scale_and_sign_invariant(tx, ty, s):
    if math.hypot(tx, ty) < 1e-6:
        return
    a = affine_to_motion_angle(AffineModel(tx=tx, ty=ty))
    for t2 in ((s * tx, s * ty), (-tx, -ty)):
        b = affine_to_motion_angle(AffineModel(tx=t2[0], ty=t2[1]))
        assert min(abs(a - b), math.pi - abs(a - b)) < 1e-9


def test_motion_angle_of_translation_flow():
    flow = np.zeros((16, 16, 2))
    flow[..., 0], flow[..., 1] = 1.0, math.sqrt(3)
    assert estimate_motion_angle(flow) == pytest.approx(math.pi / 3)


def test_affine_model_validation():
    with pytest.raises(ValueError):
        AffineModel(tx=float("nan"))
    with pytest.raises(ValueError):
        RansacParams(iterations=0)
    with pytest.raises(ValueError):
        RansacParams(inlier_threshold=0)


def test_affine_apply():
    a = AffineModel(2, 0, 0, 3, 1, -1)
    np.testing.assert_allclose(a.apply(np.array([[1.0, 1.0]])), [[3.0, 2.0]])
