import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from bearing_slam.extension import ExtensionState, constant_transform, virtual_landmark
from bearing_slam.geometry import Pose, Twist, attitude_error, hat
from bearing_slam.harness import replay_localization
from bearing_slam.localization import (LocalizationGains, LocalizationInputs, localization_init, localization_step,
                                       outputs, pose_update, w_vis)
from bearing_slam.mapping import sigma_init
from bearing_slam.regressor import build_regressor
from bearing_slam.scenario import DEFAULT_LANDMARKS


def skew(A):
    return 0.5 * (A - A.T)


def exact_setup(seed=0):
    rng = np.random.default_rng(seed)
    anchor = Pose(Rotation.random(random_state=rng).as_matrix(), rng.uniform(-2, 2, 3))
    ext0 = ExtensionState(Rotation.random(random_state=rng).as_matrix(), rng.uniform(-2, 2, 3))
    cX = constant_transform(anchor, ext0)
    return rng, anchor, ext0, cX, virtual_landmark(cX, DEFAULT_LANDMARKS)


def test_w_vis_zero_at_equilibrium_and_for_two_landmarks():
    _, _, _, cX, vl = exact_setup()
    g = LocalizationGains()
    assert np.allclose(w_vis(vl, DEFAULT_LANDMARKS, cX.rotation, g), 0, atol=1e-12)
    assert np.array_equal(w_vis(vl[:2], DEFAULT_LANDMARKS[:2], np.eye(3), g), np.zeros(3))


@given(st.integers(0, 10_000))
@settings(max_examples=40)
def test_w_vis_hat_identity(seed):
    rng, _, _, cX, vl = exact_setup(seed)
    cQ_hat = Rotation.random(random_state=rng).as_matrix()
    k = rng.uniform(0.5, 2.0, len(vl))
    g = LocalizationGains(k, 1.0)
    r = np.diff(DEFAULT_LANDMARKS, axis=0)
    M = sum(k[i] * cX.rotation @ np.outer(r[i], r[i]) @ cX.rotation.T for i in range(len(r)))
    Qt = cX.rotation @ cQ_hat.T
    # hat(a x b) = b a^T - a b^T, which gives hat(w*) = 2 skew(Qt^T M)
    assert np.allclose(hat(w_vis(vl, DEFAULT_LANDMARKS, cQ_hat, g)), 2 * skew(Qt.T @ M), atol=1e-10)


def test_w_vis_batched_matches_single():
    rng, _, _, _, vl = exact_setup(2)
    cQs = Rotation.random(5, random_state=1).as_matrix()
    g = LocalizationGains()
    batched = w_vis(vl, DEFAULT_LANDMARKS, cQs, g)
    for j in range(5):
        assert np.allclose(batched[j], w_vis(vl, DEFAULT_LANDMARKS, cQs[j], g), atol=1e-14)


def test_equilibrium_step_is_dead_reckoning():
    rng, anchor, ext0, cX, vl = exact_setup(3)
    R = Rotation.random(random_state=rng).as_matrix()
    x = rng.uniform(-1, 1, 3)
    ext = ExtensionState(cX.rotation @ R, cX.translation + cX.rotation @ x)
    v = np.array([0.7, -0.1, 0.2])
    cQ, xn = pose_update(cX.rotation, x, v, ext.Q, ext.xi, vl, DEFAULT_LANDMARKS, np.ones(6, bool),
                         LocalizationGains(), 1e-3)
    assert np.allclose(cQ, cX.rotation, atol=1e-14)
    assert np.allclose(xn, x + 1e-3 * R @ v, atol=1e-14)


def test_localization_step_runs_pose_then_l_bar():
    rng, anchor, ext0, cX, vl = exact_setup(4)
    L = DEFAULT_LANDMARKS
    bar = sigma_init(np.zeros((6, 3)))
    state = localization_init(np.eye(3), ext0.xi, bar)
    y = ((L - anchor.translation) / np.linalg.norm(L - anchor.translation, axis=1, keepdims=True)) @ anchor.rotation
    s = build_regressor(ext0, y)
    u = Twist(np.zeros(3), np.array([1.0, 0, 0]))
    inp = LocalizationInputs(u, ext0, vl, s, anchor, ext0, ext0)
    new = localization_step(state, inp, LocalizationGains(), 1e-3)
    # the pose update saw l_bar = 0, and the l_bar estimators moved afterwards
    cQ, xh = pose_update(np.eye(3), ext0.xi, u.linear, ext0.Q, ext0.xi, vl, np.zeros((6, 3)), np.ones(6, bool),
                         LocalizationGains(), 1e-3)
    assert np.array_equal(new.cQ_hat, cQ) and np.array_equal(new.x_hat, xh)
    assert np.any(new.bar.Phi != 0) and new.steps == 1
    with pytest.raises(ValueError):
        localization_step(state, inp, LocalizationGains(), 1e-3, barl_mode="other")


def test_outputs_identity_chain():
    rng, anchor, ext0, cX, vl = exact_setup(5)
    R = Rotation.random(random_state=rng).as_matrix()
    x = rng.uniform(-1, 1, 3)
    ext = ExtensionState(cX.rotation @ R, cX.translation + cX.rotation @ x)
    st_ = localization_init(cX.rotation, x, sigma_init(np.zeros((6, 3))))
    R_hat, x_hat, l_hat = outputs(st_, ext, vl)
    assert np.allclose(R_hat, R, atol=1e-14) and np.allclose(l_hat, DEFAULT_LANDMARKS, atol=1e-12)
    R_hat, _, _ = outputs(localization_init(np.eye(3), x, sigma_init(np.zeros((6, 3)))), ext, vl)
    assert np.array_equal(R_hat, ext.Q)


def test_gains_validated():
    with pytest.raises(ValueError):
        LocalizationGains(k=0.0)


def test_pe_run_localizes(pe_run):
    r = pe_run
    assert r.att_err[-1] < 0.02 and r.x_err[-1] < 0.05
    assert np.all(r.lbar_err[-1] < 1e-2) and np.all(r.l_err[-1] < 1e-2)
    # cascade: localization is met only once the mapping error is already small
    ok = (r.att_err < 0.02) & (r.x_err < 0.05)
    first = np.argmax(ok)
    assert np.linalg.norm(r.vl_err[first], axis=-1).max() < 10 * 0.05
    Rt = r.cQ_hat
    assert np.abs(np.einsum("kji,kjl->kil", Rt, Rt) - np.eye(3)).max() < 1e-6


def test_l_bar_decays_under_persistent_excitation(pe_run):
    r = pe_run
    e = r.lbar_err
    k0, k1 = r.index(16.0), r.index(20.0)
    assert np.all(e[k1] < e[k0])


def test_replay_reproduces_run(pe_run):
    (att, pos), (A, P) = replay_localization(pe_run, np.eye(3)[None], return_traces=True)
    assert np.allclose(A[:, 0], pe_run.att_err, atol=1e-12)
    assert np.allclose(P[:, 0], pe_run.x_err, atol=1e-12)


def test_attitude_recovers_from_random_start(pe_run):
    cQ0 = Rotation.random(10, random_state=11).as_matrix()
    att, pos = replay_localization(pe_run, cQ0)
    assert np.all(att < 0.02) and np.all(pos < 0.05)
    start = attitude_error(pe_run.R[0], np.swapaxes(cQ0, 1, 2) @ pe_run.Q[0])
    assert start.max() > 0.5
