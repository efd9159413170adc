"""Small-matrix SO(3)/SE(3) and projector numerics.

All functions accept leading batch dimensions where it is natural, so a
stack of vectors with shape (..., 3) maps to a stack of matrices with shape
(..., 3, 3).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection

EPS_PROJ = 1e-9
_I3 = np.eye(3)
_SERIES_ANGLE = 1e-6


def hat(a) -> np.ndarray:
    """Skew-symmetric matrix with hat(a) @ b == cross(a, b)."""
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.shape[:-1] + (3, 3))
    out[..., 0, 1] = -a[..., 2]
    out[..., 0, 2] = a[..., 1]
    out[..., 1, 0] = a[..., 2]
    out[..., 1, 2] = -a[..., 0]
    out[..., 2, 0] = -a[..., 1]
    out[..., 2, 1] = a[..., 0]
    return out


def cross(a, b) -> np.ndarray:
    """Cross product over the last axis (component form; np.cross is slow on small arrays)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a1 * b2 - a2 * b1
    out[..., 1] = a2 * b0 - a0 * b2
    out[..., 2] = a0 * b1 - a1 * b0
    return out


def vee(M) -> np.ndarray:
    """Inverse of hat on the skew part of M."""
    M = np.asarray(M, dtype=float)
    return 0.5 * np.stack(
        [M[..., 2, 1] - M[..., 1, 2], M[..., 0, 2] - M[..., 2, 0], M[..., 1, 0] - M[..., 0, 1]],
        axis=-1,
    )


def rot_exp(omega, dt: float = 1.0) -> np.ndarray:
    """exp(dt * hat(omega)) by the Rodrigues formula.

    Small angles (below 1e-6 rad) use the second-order series instead, which
    is exact to machine precision in that range.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    w = np.asarray(omega, dtype=float) * dt
    if w.ndim == 1:
        return _rot_exp_single(w)
    theta = np.linalg.norm(w, axis=-1)
    K = hat(w)
    K2 = K @ K
    small = theta < _SERIES_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return _I3 + a[..., None, None] * K + b[..., None, None] * K2


def _rot_exp_single(w) -> np.ndarray:
    x, y, z = float(w[0]), float(w[1]), float(w[2])
    t2 = x * x + y * y + z * z
    theta = math.sqrt(t2)
    if theta < _SERIES_ANGLE:
        a, b = 1.0 - t2 / 6.0, 0.5 - t2 / 24.0
    else:
        a, b = math.sin(theta) / theta, (1.0 - math.cos(theta)) / t2
    # I + a K + b K^2 with K = hat(w), K^2 = w w^T - |w|^2 I
    return np.array([
        [1.0 + b * (x * x - t2), -a * z + b * x * y, a * y + b * x * z],
        [a * z + b * x * y, 1.0 + b * (y * y - t2), -a * x + b * y * z],
        [-a * y + b * x * z, a * x + b * y * z, 1.0 + b * (z * z - t2)],
    ])


def projector(x) -> np.ndarray:
    """Orthogonal projector onto the plane normal to x: I - x x^T / |x|^2."""
    x = np.asarray(x, dtype=float)
    n2 = np.einsum("...i,...i->...", x, x)
    if np.any(np.sqrt(n2) <= EPS_PROJ):
        raise DegenerateDirection(f"|x| <= {EPS_PROJ}")
    return _I3 - x[..., :, None] * x[..., None, :] / n2[..., None, None]


def adjugate3(A) -> np.ndarray:
    """Adjugate of a 3x3 matrix, defined also for singular A.

    Entry (i, j) is the (j, i) cofactor, so adj(A) @ A == det(A) * I.
    """
    A = np.asarray(A, dtype=float)
    a, b, c = A[..., 0, 0], A[..., 0, 1], A[..., 0, 2]
    d, e, f = A[..., 1, 0], A[..., 1, 1], A[..., 1, 2]
    g, h, i = A[..., 2, 0], A[..., 2, 1], A[..., 2, 2]
    out = np.empty(A.shape)
    out[..., 0, 0] = e * i - f * h
    out[..., 0, 1] = c * h - b * i
    out[..., 0, 2] = b * f - c * e
    out[..., 1, 0] = f * g - d * i
    out[..., 1, 1] = a * i - c * g
    out[..., 1, 2] = c * d - a * f
    out[..., 2, 0] = d * h - e * g
    out[..., 2, 1] = b * g - a * h
    out[..., 2, 2] = a * e - b * d
    return out


def det3(A) -> np.ndarray:
    """Determinant by cofactor expansion along the first row."""
    A = np.asarray(A, dtype=float)
    a, b, c = A[..., 0, 0], A[..., 0, 1], A[..., 0, 2]
    return (a * (A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1])
            + b * (A[..., 1, 2] * A[..., 2, 0] - A[..., 1, 0] * A[..., 2, 2])
            + c * (A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0]))


def attitude_error(R, R_hat) -> np.ndarray:
    """sqrt(tr(I - R R_hat^T) / 4), in [0, 1]."""
    tr = np.einsum("...ij,...ij->...", np.asarray(R, dtype=float), np.asarray(R_hat, dtype=float))
    return np.sqrt(np.clip((3.0 - tr) / 4.0, 0.0, 1.0))


def nearest_rotation(M) -> np.ndarray:
    """Closest rotation to M in Frobenius norm (polar factor)."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    d = np.sign(np.linalg.det(U @ Vt))
    U = U.copy()
    U[..., :, 2] *= np.asarray(d)[..., None]
    return U @ Vt


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Twist:
    """Body-frame velocity u = (angular, linear)."""

    angular: np.ndarray
    linear: np.ndarray

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class Pose:
    """T(R, x) = [[R, x], [0, 1]]."""

    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    @staticmethod
    def from_matrix(T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return Pose(T[:3, :3].copy(), T[:3, 3].copy())


def pose_compose(A: Pose, B: Pose) -> Pose:
    return Pose(A.rotation @ B.rotation, A.rotation @ B.translation + A.translation)


def pose_inverse(A: Pose) -> Pose:
    Rt = A.rotation.T
    return Pose(Rt, -Rt @ A.translation)
