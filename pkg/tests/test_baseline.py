import numpy as np
import pytest

from bearing_slam.baseline import BodyLandmarkBelief, kf_predict, kf_update
from bearing_slam.errors import NonUnitBearing
from bearing_slam.geometry import Twist


def test_predict_examples():
    b = BodyLandmarkBelief.initial(1, mean=[[2.0, 1.0, 0.5]])
    n = kf_predict(b, Twist(np.zeros(3), np.array([1.0, 0, 0])), 1e-3)
    assert np.allclose(n.mean, [[2.0 - 1e-3, 1.0, 0.5]])
    z = kf_predict(b, Twist.zero(), 1e-3, process_noise=1e-4)
    assert np.array_equal(z.mean, b.mean)
    assert np.allclose(z.covariance, b.covariance + 1e-7 * np.eye(3))


def test_truth_satisfies_propagation(pe_run):
    r = pe_run
    L = r.scenario.landmarks.positions
    dt = r.scenario.dt
    for k in range(0, len(r) - 1, 1500):
        u = Twist(r.omega_meas[k], r.v_meas[k])
        pred = kf_predict(BodyLandmarkBelief(r.kf_truth[k], np.broadcast_to(np.eye(3), (len(L), 3, 3))), u, dt)
        assert np.abs(pred.mean - r.kf_truth[k + 1]).max() < 5 * dt**2 * 10


def test_update_zero_innovation_and_contraction():
    y = np.array([0.0, 0.6, 0.8])
    b = BodyLandmarkBelief(np.array([3 * y]), np.array([np.diag([2.0, 3.0, 5.0])]))
    n = kf_update(b, y[None])
    assert np.allclose(n.mean, b.mean)
    assert np.linalg.eigvalsh(n.covariance[0]).min() <= np.linalg.eigvalsh(b.covariance[0]).min() + 1e-12
    assert np.allclose(n.covariance, np.swapaxes(n.covariance, 1, 2))
    with pytest.raises(NonUnitBearing):
        kf_update(b, 2 * y[None])


def test_stationary_robot_leaves_range_unobservable():
    y = np.array([[0.0, 0.0, 1.0]])
    b = BodyLandmarkBelief.initial(1)
    for _ in range(2000):
        b = kf_predict(b, Twist.zero(), 1e-3)
        b = kf_update(b, y)
    P = b.covariance[0]
    assert P[2, 2] > 10.0  # along the bearing: never contracts, only grows
    assert P[0, 0] < 1e-3 and P[1, 1] < 1e-3


def test_invisible_landmark_skips_update():
    b = BodyLandmarkBelief.initial(2, mean=[[1.0, 0, 0], [0, 1.0, 0]])
    y = np.array([[0.0, 0, 1], [0.0, 0, 1]])
    n = kf_update(b, y, visible=np.array([True, False]))
    assert np.array_equal(n.mean[1], b.mean[1]) and np.array_equal(n.covariance[1], b.covariance[1])
    assert not np.array_equal(n.mean[0], b.mean[0])


def test_converges_under_persistent_excitation(pe_run):
    assert np.all(pe_run.kf_err[-1] < 1e-2)


def test_stalls_after_excitation_stops(ie_noisy_run):
    r = ie_noisy_run
    k = r.index(12.0)
    e = r.kf_err
    assert np.all(e[-1] >= e[k])
    # the stall begins at the stop: the error no longer falls on average afterwards
    late = e[k:]
    assert np.all(late[-1] >= late[: len(late) // 10].mean(axis=0))
