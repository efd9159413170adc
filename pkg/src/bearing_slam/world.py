"""Ground-truth kinematics, landmark maps and sensor models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection, ScenarioError
from .geometry import EPS_PROJ, Pose, Twist, nearest_rotation, rot_exp

# Segment boundaries are compared with this slack so that t = k*dt landing a
# few ulps on either side of t_end gives the same answer.
_T_SLACK = 1e-9


@dataclass(frozen=True)
class Segment:
    t_end: float
    angular: np.ndarray
    linear: np.ndarray


@dataclass(frozen=True)
class TrajectoryProfile:
    """Piecewise-constant body twist plus the initial pose X(0).

    Segment j is active for t_{j-1} <= t < t_j. The last segment extends to
    any later time.
    """

    segments: tuple
    initial_pose: Pose

    def twist(self, t: float) -> Twist:
        for seg in self.segments:
            if t < seg.t_end - _T_SLACK:
                return Twist(seg.angular, seg.linear)
        seg = self.segments[-1]
        return Twist(seg.angular, seg.linear)

    def validate(self, horizon: float):
        if not self.segments:
            raise ScenarioError("profile has no segments")
        ends = [s.t_end for s in self.segments]
        if any(b <= a for a, b in zip(ends, ends[1:])) or ends[0] <= 0:
            raise ScenarioError("segment end times must be positive and increasing")
        if ends[-1] < horizon - _T_SLACK:
            raise ScenarioError("segments do not cover the horizon")
        for s in self.segments:
            if not (np.all(np.isfinite(s.angular)) and np.all(np.isfinite(s.linear))):
                raise ScenarioError("non-finite segment velocity")


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean Gaussian noise on velocities and on the bearing tangent plane."""

    sigma_v: float = 0.0
    sigma_omega: float = 0.0
    sigma_y: float = 0.0
    seed: int = 0

    @property
    def active(self) -> bool:
        return self.sigma_v > 0 or self.sigma_omega > 0 or self.sigma_y > 0

    @staticmethod
    def default(seed: int = 0) -> "NoiseModel":
        return NoiseModel(0.01, 0.005, 0.01, seed)


@dataclass(frozen=True)
class VisibilitySchedule:
    """Closed visibility intervals per landmark. None for a landmark means always visible."""

    intervals: tuple

    @staticmethod
    def always(n: int) -> "VisibilitySchedule":
        return VisibilitySchedule(tuple(None for _ in range(n)))

    def visible_at(self, t: float) -> np.ndarray:
        out = np.empty(len(self.intervals), dtype=bool)
        for i, iv in enumerate(self.intervals):
            if iv is None:
                out[i] = True
            else:
                out[i] = any(a - _T_SLACK <= t <= b + _T_SLACK for a, b in iv)
        return out

    def validate(self, n: int, horizon: float):
        if len(self.intervals) != n:
            raise ScenarioError("visibility schedule length differs from landmark count")
        for iv in self.intervals:
            if iv is None:
                continue
            iv = sorted(iv)
            for a, b in iv:
                if a > b or a < -_T_SLACK or b > horizon + _T_SLACK:
                    raise ScenarioError(f"bad visibility interval [{a}, {b}]")
            for (_, b0), (a1, _) in zip(iv, iv[1:]):
                if a1 <= b0:
                    raise ScenarioError("overlapping visibility intervals")


@dataclass(frozen=True)
class LandmarkMap:
    positions: np.ndarray  # (n, 3)

    @property
    def n(self) -> int:
        return len(self.positions)

    def differences(self) -> np.ndarray:
        return np.diff(self.positions, axis=0)

    def check_localizable(self, tol: float = 1e-6):
        """Raise unless at least 3 landmarks with pairwise non-parallel differences exist."""
        r = self.differences()
        if len(r) < 2:
            raise ScenarioError("localization needs at least 3 landmarks")
        for i in range(len(r)):
            for j in range(i + 1, len(r)):
                c = np.linalg.norm(np.cross(r[i], r[j]))
                if c <= tol * np.linalg.norm(r[i]) * np.linalg.norm(r[j]):
                    raise ScenarioError(f"difference vectors {i} and {j} are parallel")


@dataclass(frozen=True)
class GroundTruthState:
    pose: Pose
    t: float = 0.0

    @property
    def R(self) -> np.ndarray:
        return self.pose.rotation

    @property
    def x(self) -> np.ndarray:
        return self.pose.translation


def step_truth(state: GroundTruthState, profile: TrajectoryProfile, dt: float,
               step: int | None = None, n_orth: int = 0) -> GroundTruthState:
    """x <- x + dt R v, R <- R exp(dt Omega_x).

    ``step`` (the index of ``state``) makes the new time k*dt instead of an
    accumulated sum, which keeps long runs on an exact grid. With ``n_orth``
    the rotation is re-projected onto SO(3) on the same schedule as the
    dynamic extension, so both accumulate identical round-off.
    """
    u = profile.twist(state.t)
    R, x = state.R, state.x
    R_new = R @ rot_exp(u.angular, dt)
    if step is not None and n_orth and (step + 1) % n_orth == 0:
        R_new = nearest_rotation(R_new)
    t_new = (step + 1) * dt if step is not None else state.t + dt
    return GroundTruthState(Pose(R_new, x + dt * (R @ u.linear)), t_new)


def measure_bearing(state: GroundTruthState, landmark, noise: NoiseModel | None = None,
                    rng: np.random.Generator | None = None) -> np.ndarray:
    """y = R^T (l - x) / |l - x|, optionally perturbed in the tangent plane.

    ``landmark`` may be a single point (3,) or a stack (n, 3).
    """
    d = np.asarray(landmark, dtype=float) - state.x
    dist = np.linalg.norm(d, axis=-1, keepdims=True)
    if np.any(dist <= EPS_PROJ):
        raise DegenerateDirection("landmark coincides with robot position")
    y = (d / dist) @ state.R
    if noise is not None and noise.sigma_y > 0:
        if rng is None:
            raise ValueError("noisy bearings need an rng")
        n = noise.sigma_y * rng.standard_normal(y.shape)
        n -= np.sum(n * y, axis=-1, keepdims=True) * y
        y = y + n
        y /= np.linalg.norm(y, axis=-1, keepdims=True)
    return y


def measure_velocity(profile: TrajectoryProfile, t: float, noise: NoiseModel | None = None,
                     rng: np.random.Generator | None = None) -> Twist:
    u = profile.twist(t)
    if noise is None or (noise.sigma_v == 0 and noise.sigma_omega == 0):
        return u
    if rng is None:
        raise ValueError("noisy velocities need an rng")
    e = rng.standard_normal(6)
    return Twist(u.angular + noise.sigma_omega * e[:3], u.linear + noise.sigma_v * e[3:])


def body_landmarks(state: GroundTruthState, landmarks) -> np.ndarray:
    """Landmarks in the body frame, R^T (l - x)."""
    return (np.asarray(landmarks, dtype=float) - state.x) @ state.R
