"""Linear regression pairs (phi, q) built from bearings in the extension frame.

Samples may carry a leading landmark axis: phi (n, 3, 3), q (n, 3),
visible (n,). Invisible rows are exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonUnitBearing
from .extension import ExtensionState
from .geometry import Pose, projector

UNIT_TOL = 1e-6


@dataclass(frozen=True)
class RegressorSample:
    phi: np.ndarray
    q: np.ndarray
    visible: np.ndarray
    t: float = 0.0


def _unit(y, visible):
    norms = np.linalg.norm(y, axis=-1)
    bad = visible & (np.abs(norms - 1.0) > UNIT_TOL)
    if np.any(bad):
        raise NonUnitBearing(f"|y| = {np.atleast_1d(norms)[np.atleast_1d(bad)][0]!r}")
    safe = np.where(visible, norms, 1.0)
    return np.where(visible[..., None], y / safe[..., None], 0.0)


def build_regressor(ext: ExtensionState, y, visible=None, t: float = 0.0) -> RegressorSample:
    """phi = Pi_{Qy}, q = Pi_{Qy} xi for visible bearings; zeros otherwise.

    ``y`` is None for a single invisible landmark.
    """
    if y is None:
        return RegressorSample(np.zeros((3, 3)), np.zeros(3), np.asarray(False), t)
    y = np.asarray(y, dtype=float)
    visible = np.ones(y.shape[:-1], dtype=bool) if visible is None else np.asarray(visible, dtype=bool)
    y = _unit(y, visible)
    d = y @ ext.Q.T
    d = np.where(visible[..., None], d, 1.0)
    phi = projector(d)
    phi = np.where(visible[..., None, None], phi, 0.0)
    q = phi @ ext.xi
    return RegressorSample(phi, q, visible, t)


def build_anchored_regressor(ext: ExtensionState, ext0: ExtensionState, anchor: Pose,
                             sample: RegressorSample) -> RegressorSample:
    """Regression on the inertial landmark with the pose anchored at X(0).

    phi_bar = R0 Q0^T phi, q_bar = phi^T (xi - xi0 + Q0 R0^T x0).
    """
    R0, x0 = anchor.rotation, anchor.translation
    A = R0 @ ext0.Q.T
    phi_bar = A @ sample.phi
    q_bar = np.swapaxes(sample.phi, -1, -2) @ (ext.xi - ext0.xi + A.T @ x0)
    return RegressorSample(phi_bar, q_bar, sample.visible, sample.t)


def build_feedback_regressor(ext: ExtensionState, R_hat, x_hat, sample: RegressorSample) -> RegressorSample:
    """Closed-loop variant: phi_bar = R_hat Q^T phi, q_bar = phi^T (Q R_hat^T x_hat)."""
    R_hat = np.asarray(R_hat, dtype=float)
    phi_bar = (R_hat @ ext.Q.T) @ sample.phi
    q_bar = np.swapaxes(sample.phi, -1, -2) @ (ext.Q @ (R_hat.T @ np.asarray(x_hat, dtype=float)))
    return RegressorSample(phi_bar, q_bar, sample.visible, sample.t)


def stack_samples(samples) -> RegressorSample:
    """Stack a sequence of samples along a new leading time axis."""
    samples = list(samples)
    return RegressorSample(
        np.stack([s.phi for s in samples]),
        np.stack([s.q for s in samples]),
        np.stack([np.asarray(s.visible) for s in samples]),
        np.array([s.t for s in samples], dtype=float),
    )
