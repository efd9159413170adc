"""Reconstructed robo-centric LTV Kalman filter for body-frame landmarks.

State is the body-frame landmark bl = R^T (l - x) with
d/dt bl = -Omega x bl - v. The bearing gives the linear pseudo-measurement
Pi_y bl = 0. Range is unobservable without relative motion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Twist, projector, rot_exp
from .errors import NonUnitBearing
from .regressor import UNIT_TOL

P0_SCALE = 10.0
PROCESS_NOISE = 1e-4
MEASUREMENT_NOISE = 1e-2


@dataclass(frozen=True)
class BodyLandmarkBelief:
    mean: np.ndarray
    covariance: np.ndarray

    @staticmethod
    def initial(n: int, p0: float = P0_SCALE, mean=None) -> "BodyLandmarkBelief":
        m = np.zeros((n, 3)) if mean is None else np.array(mean, dtype=float)
        return BodyLandmarkBelief(m, np.broadcast_to(p0 * np.eye(3), (n, 3, 3)).copy())


def kf_predict(belief: BodyLandmarkBelief, u: Twist, dt: float, process_noise: float = PROCESS_NOISE,
               F: np.ndarray | None = None) -> BodyLandmarkBelief:
    """mean <- exp(-dt Omega_x) mean - dt v; P <- F P F^T + process_noise dt I."""
    if F is None:
        F = rot_exp(u.angular, dt).T
    mean = belief.mean @ F.T - dt * u.linear
    P = F @ belief.covariance @ F.T + process_noise * dt * np.eye(3)
    return BodyLandmarkBelief(mean, P)


def kf_update(belief: BodyLandmarkBelief, y, measurement_noise: float = MEASUREMENT_NOISE,
              visible=None) -> BodyLandmarkBelief:
    """Kalman update with H = Pi_y, z = 0, Joseph-form covariance."""
    y = np.asarray(y, dtype=float)
    norms = np.linalg.norm(y, axis=-1)
    vis = np.ones(y.shape[:-1], dtype=bool) if visible is None else np.asarray(visible, dtype=bool)
    if np.any(vis & (np.abs(norms - 1.0) > UNIT_TOL)):
        raise NonUnitBearing("baseline update needs unit bearings")
    H = projector(np.where(vis[..., None], y, 1.0))
    P = belief.covariance
    Rm = measurement_noise * np.eye(3)
    S = H @ P @ H + Rm
    K = np.swapaxes(np.linalg.solve(S, H @ P), -1, -2)  # P H^T S^-1, S and P symmetric
    innov = -np.einsum("...ij,...j->...i", H, belief.mean)
    mean = belief.mean + np.einsum("...ij,...j->...i", K, innov)
    IKH = np.eye(3) - K @ H
    Pn = IKH @ P @ np.swapaxes(IKH, -1, -2) + K @ Rm @ np.swapaxes(K, -1, -2)
    Pn = 0.5 * (Pn + np.swapaxes(Pn, -1, -2))
    mean = np.where(vis[..., None], mean, belief.mean)
    Pn = np.where(vis[..., None, None], Pn, P)
    return BodyLandmarkBelief(mean, Pn)
