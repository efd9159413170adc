"""Open-loop dynamic extension vX = T(Q, xi) driven by measured velocities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Pose, Twist, nearest_rotation, rot_exp

N_ORTH = 1000


@dataclass(frozen=True)
class ExtensionState:
    Q: np.ndarray
    xi: np.ndarray
    steps: int = 0

    def pose(self) -> Pose:
        return Pose(self.Q, self.xi)


def extension_step(state: ExtensionState, u: Twist, dt: float, n_orth: int = N_ORTH,
                   E: np.ndarray | None = None) -> ExtensionState:
    """xi <- xi + dt Q v, Q <- Q exp(dt Omega_x); Q is re-projected every n_orth steps.

    ``E`` lets a caller pass a precomputed exp(dt Omega_x).
    """
    if E is None:
        E = rot_exp(u.angular, dt)
    xi = state.xi + dt * (state.Q @ u.linear)
    Q = state.Q @ E
    k = state.steps + 1
    if n_orth and k % n_orth == 0:
        Q = nearest_rotation(Q)
    return ExtensionState(Q, xi, k)


def constant_transform(x0: Pose, ext0: ExtensionState) -> Pose:
    """cX = T(Q0 R0^T, xi0 - Q0 R0^T x0), the constant vX X^-1."""
    cQ = ext0.Q @ x0.rotation.T
    return Pose(cQ, ext0.xi - cQ @ x0.translation)


def virtual_landmark(cX: Pose, l) -> np.ndarray:
    """vl = c_xi + cQ l (accepts (3,) or (n, 3))."""
    return np.asarray(l, dtype=float) @ cX.rotation.T + cX.translation
