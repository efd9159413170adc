import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from bearing_slam.errors import NonUnitBearing
from bearing_slam.extension import ExtensionState, constant_transform, virtual_landmark
from bearing_slam.geometry import Pose
from bearing_slam.regressor import build_anchored_regressor, build_feedback_regressor, build_regressor


def test_example_and_invisible():
    s = build_regressor(ExtensionState(np.eye(3), np.array([1.0, 2, 3])), [0, 0, 1])
    assert np.allclose(s.phi, np.diag([1, 1, 0])) and np.allclose(s.q, [1, 2, 0])
    z = build_regressor(ExtensionState(np.eye(3), np.array([1.0, 2, 3])), None)
    assert not z.visible and np.array_equal(z.phi, np.zeros((3, 3))) and np.array_equal(z.q, np.zeros(3))


def test_batched_visibility_mask():
    y = np.array([[0, 0, 1.0], [1, 0, 0], [0, 1, 0]])
    s = build_regressor(ExtensionState(np.eye(3), np.ones(3)), y, np.array([True, False, True]))
    assert np.array_equal(s.phi[1], np.zeros((3, 3))) and np.array_equal(s.q[1], np.zeros(3))
    assert np.allclose(s.phi[2], np.diag([1, 0, 1]))


def test_bearing_norm_band():
    ext = ExtensionState(np.eye(3), np.zeros(3))
    s = build_regressor(ext, [0, 0, 1 + 5e-7])
    assert np.allclose(s.phi, np.diag([1, 1, 0]), atol=1e-15)
    with pytest.raises(NonUnitBearing):
        build_regressor(ext, [0, 0, 1.01])
    # a bad row is ignored when that landmark is invisible
    build_regressor(ext, np.array([[0, 0, 1.0], [0, 0, 3.0]]), np.array([True, False]))


def random_setup(seed):
    rng = np.random.default_rng(seed)
    R0 = Rotation.random(random_state=rng).as_matrix()
    Q0 = Rotation.random(random_state=rng).as_matrix()
    x0, xi0 = rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3)
    anchor, ext0 = Pose(R0, x0), ExtensionState(Q0, xi0)
    # a later pose pair consistent with the same constant transform
    R = Rotation.random(random_state=rng).as_matrix()
    x = rng.uniform(-3, 3, 3)
    cX = constant_transform(anchor, ext0)
    ext = ExtensionState(cX.rotation @ R, cX.translation + cX.rotation @ x)
    l = rng.uniform(-5, 5, 3)
    y = R.T @ (l - x) / np.linalg.norm(l - x)
    return anchor, ext0, ext, R, x, l, y, cX


@given(st.integers(0, 10_000))
@settings(max_examples=60)
def test_regression_consistency(seed):
    anchor, ext0, ext, R, x, l, y, cX = random_setup(seed)
    s = build_regressor(ext, y)
    vl = virtual_landmark(cX, l)
    assert np.abs(s.q - s.phi.T @ vl).max() < 1e-12
    assert np.allclose(s.phi, s.phi.T) and np.allclose(s.phi @ s.phi.T, s.phi, atol=1e-12)
    a = build_anchored_regressor(ext, ext0, anchor, s)
    assert np.abs(a.q - a.phi.T @ l).max() < 1e-11
    assert np.linalg.matrix_rank(a.phi, tol=1e-9) == 2
    f = build_feedback_regressor(ext, R, x, s)
    assert np.abs(f.q - f.phi.T @ l).max() < 1e-11


def test_anchored_at_truth_start():
    anchor, ext0, ext, R, x, l, y, cX = random_setup(5)
    ext0 = ExtensionState(anchor.rotation, anchor.translation)
    ext = ExtensionState(R, x)  # cX = identity
    s = build_regressor(ext, y)
    a = build_anchored_regressor(ext, ext0, anchor, s)
    assert np.abs(a.q - s.phi.T @ l).max() < 1e-12


def test_feedback_equals_anchored_at_start():
    anchor, ext0, _, _, _, l, _, _ = random_setup(9)
    y = anchor.rotation.T @ (l - anchor.translation)
    y /= np.linalg.norm(y)
    s = build_regressor(ext0, y)
    a = build_anchored_regressor(ext0, ext0, anchor, s)
    f = build_feedback_regressor(ext0, anchor.rotation, anchor.translation, s)
    assert np.allclose(a.phi, f.phi, atol=1e-14) and np.allclose(a.q, f.q, atol=1e-12)


def test_invisible_variants_are_zero():
    anchor, ext0, ext, R, x, *_ = random_setup(1)
    s = build_regressor(ext, None)
    for b in (build_anchored_regressor(ext, ext0, anchor, s), build_feedback_regressor(ext, R, x, s)):
        assert not np.any(b.phi) and not np.any(b.q)
