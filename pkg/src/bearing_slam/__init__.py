"""Bearing-only visual-inertial SLAM observer with a trajectory simulator."""

from .geometry import Pose, Twist, adjugate3, attitude_error, hat, pose_compose, pose_inverse, projector, rot_exp
from .scenario import Scenario, scenario_ie, scenario_pe
from .harness import RunRecord, compare, export, run

__all__ = [
    "Pose", "Twist", "adjugate3", "attitude_error", "hat", "pose_compose", "pose_inverse", "projector",
    "rot_exp", "Scenario", "scenario_ie", "scenario_pe", "RunRecord", "compare", "export", "run",
]
