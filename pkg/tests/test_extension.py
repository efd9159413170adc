import numpy as np

from bearing_slam.extension import ExtensionState, constant_transform, extension_step, virtual_landmark
from bearing_slam.geometry import Pose, Twist, rot_z
from bearing_slam.scenario import scenario_pe
from bearing_slam.world import GroundTruthState, step_truth


def test_single_step():
    s = extension_step(ExtensionState(np.eye(3), np.zeros(3)), Twist(np.zeros(3), np.array([1.0, 0, 0])), 1e-3)
    assert np.allclose(s.xi, [1e-3, 0, 0]) and np.array_equal(s.Q, np.eye(3))


def test_reference_first_step():
    sc = scenario_pe()
    s = extension_step(sc.ext0, sc.profile.twist(0.0), sc.dt)
    assert np.allclose(s.Q, rot_z(np.pi / 2 - 4e-4), atol=1e-15)


def test_reprojection_schedule_keeps_rotation():
    s = ExtensionState(np.eye(3), np.zeros(3))
    u = Twist(np.array([0.3, -0.2, 0.9]), np.array([1.0, 0, 0]))
    for _ in range(5000):
        s = extension_step(s, u, 1e-3, n_orth=1000)
    assert s.steps == 5000
    assert np.linalg.norm(s.Q.T @ s.Q - np.eye(3)) < 1e-13


def test_constant_transform_examples():
    sc = scenario_pe()
    x0 = sc.profile.initial_pose
    cX = constant_transform(x0, sc.ext0)
    assert np.allclose(cX.rotation, rot_z(np.pi / 3), atol=1e-15)
    assert np.allclose(cX.translation, np.array([0, 1, 1]) - rot_z(np.pi / 3) @ [1, 1, 2])
    ident = constant_transform(x0, ExtensionState(x0.rotation, x0.translation))
    assert np.allclose(ident.matrix(), np.eye(4), atol=1e-15)


def test_extension_equals_truth_when_initialized_at_truth():
    sc = scenario_pe()
    x0 = sc.profile.initial_pose
    truth, ext = GroundTruthState(x0), ExtensionState(x0.rotation, x0.translation)
    for k in range(3000):
        truth = step_truth(truth, sc.profile, sc.dt, step=k, n_orth=sc.n_orth)
        ext = extension_step(ext, sc.profile.twist(k * sc.dt), sc.dt, sc.n_orth)
    assert np.array_equal(ext.Q, truth.R) and np.array_equal(ext.xi, truth.x)


def test_virtual_landmarks_constant_and_reproduce_bearings(pe_run):
    r = pe_run
    assert np.array_equal(virtual_landmark(Pose.identity(), r.scenario.landmarks.positions), r.scenario.landmarks.positions)
    # the bearing computed from the extension state and vl equals the measured one
    for k in range(0, len(r), 997):
        d = r.vl_true - r.xi[k]
        y = (d / np.linalg.norm(d, axis=1, keepdims=True)) @ r.Q[k]
        assert np.abs(y - r.y[k]).max() < 1e-12
        # vl recomputed from the current pair (vX, X) stays at its initial value
        cQ = r.Q[k] @ r.R[k].T
        vl_k = (r.scenario.landmarks.positions - r.x[k]) @ cQ.T + r.xi[k]
        assert np.abs(vl_k - r.vl_true).max() < 1e-12
