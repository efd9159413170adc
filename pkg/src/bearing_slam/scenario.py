"""Scenario definition, the two reference presets, and the JSON config format."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .extension import N_ORTH, ExtensionState
from .geometry import Pose, rot_z
from .localization import LocalizationGains
from .mapping import SigmaGains
from .world import LandmarkMap, NoiseModel, Segment, TrajectoryProfile, VisibilitySchedule

# Six landmarks placed within ~0.2 m of the circular path the robot follows
# (radius 2.5 m, period ~15.7 s). Each is passed closely at least once, which
# is what gives the determinant-based estimator usable excitation with the
# reference gains. Two sit near the start, two around t = 10-11 s and two
# just before t = 12 s; the ordering alternates between these groups so the
# consecutive differences span all directions.
DEFAULT_LANDMARKS = np.array([
    [1.132, 1.071, 2.170],
    [1.333, -3.641, 1.920],
    [0.199, -2.372, 1.990],
    [1.292, 0.959, 1.840],
    [0.637, -3.009, 1.910],
    [-0.004, -2.293, 2.140],
])

MAPPERS = ("drem", "gradient")
BARL_MODES = ("anchored", "feedback")
INTEGRATORS = ("euler", "rk4")


@dataclass(frozen=True)
class BaselineConfig:
    p0: float = 10.0
    process_noise: float = 1e-4
    measurement_noise: float = 1e-2
    initial_range: float = 0.0  # initial mean = initial_range * y(0)


@dataclass(frozen=True)
class Scenario:
    name: str
    profile: TrajectoryProfile
    landmarks: LandmarkMap
    ext0: ExtensionState
    dt: float = 1e-3
    horizon: float = 20.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    visibility: VisibilitySchedule | None = None
    sigma_gains: SigmaGains = field(default_factory=SigmaGains)
    loc_gains: LocalizationGains = field(default_factory=LocalizationGains)
    mapper: str = "drem"
    barl_mode: str = "anchored"
    integrator: str = "euler"
    seed: int = 0
    cQ_hat0: np.ndarray = field(default_factory=lambda: np.eye(3))
    x_hat0: np.ndarray | None = None  # None means xi(0)
    l_hat0: np.ndarray | None = None  # None means zeros
    chi0: np.ndarray | None = None  # None means l_hat0
    rho: tuple = (1.0, 1.0, 1.0)  # carried for completeness; enters no equation
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    n_orth: int = N_ORTH
    delta_min: float = 1e-6
    pe_window: float = 2.0

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n(self) -> int:
        return self.landmarks.n

    def schedule(self) -> VisibilitySchedule:
        return self.visibility or VisibilitySchedule.always(self.n)

    def validate(self) -> "Scenario":
        if not self.dt > 0 or not self.horizon > 0:
            raise ScenarioError("dt and horizon must be positive")
        if abs(self.n_steps * self.dt - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ScenarioError("horizon must be an integer number of steps")
        self.profile.validate(self.horizon)
        self.schedule().validate(self.n, self.horizon)
        for name in ("alpha", "gamma", "k_I"):
            g = np.asarray(getattr(self.sigma_gains, name))
            if g.ndim and g.shape != (self.n,):
                raise ScenarioError(f"{name} must be scalar or one value per landmark")
        if self.mapper not in MAPPERS:
            raise ScenarioError(f"mapper must be one of {MAPPERS}")
        if self.barl_mode not in BARL_MODES:
            raise ScenarioError(f"barl_mode must be one of {BARL_MODES}")
        if self.integrator not in INTEGRATORS:
            raise ScenarioError(f"integrator must be one of {INTEGRATORS}")
        if self.noise.sigma_v < 0 or self.noise.sigma_omega < 0 or self.noise.sigma_y < 0:
            raise ScenarioError("noise levels must be non-negative")
        for M in (self.profile.initial_pose.rotation, self.ext0.Q, self.cQ_hat0):
            if np.abs(M.T @ M - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(M) - 1) > 1e-9:
                raise ScenarioError("rotation matrices must be in SO(3)")
        return self

    def with_noise(self, on: bool = True) -> "Scenario":
        noise = NoiseModel.default(self.seed) if on else NoiseModel(seed=self.seed)
        return replace(self, noise=noise)

    # --- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a, dtype=float).tolist()

        def gain(g):
            return float(g) if np.ndim(g) == 0 else arr(g)

        vis = self.visibility
        return {
            "name": self.name,
            "dt": self.dt,
            "horizon": self.horizon,
            "seed": self.seed,
            "initial_pose": {"R": arr(self.profile.initial_pose.rotation), "x": arr(self.profile.initial_pose.translation)},
            "extension_init": {"Q": arr(self.ext0.Q), "xi": arr(self.ext0.xi)},
            "profile": [{"t_end": s.t_end, "omega": arr(s.angular), "v": arr(s.linear)} for s in self.profile.segments],
            "landmarks": arr(self.landmarks.positions),
            "visibility": None if vis is None else [None if iv is None else [list(p) for p in iv] for iv in vis.intervals],
            "noise": {"sigma_v": self.noise.sigma_v, "sigma_omega": self.noise.sigma_omega, "sigma_y": self.noise.sigma_y},
            "mapping_gains": {"alpha": gain(self.sigma_gains.alpha), "gamma": gain(self.sigma_gains.gamma), "k_I": gain(self.sigma_gains.k_I)},
            "localization_gains": {"k": gain(self.loc_gains.k), "sigma": gain(self.loc_gains.sigma)},
            "mapper": self.mapper,
            "barl_mode": self.barl_mode,
            "integrator": self.integrator,
            "cQ_hat0": arr(self.cQ_hat0),
            "x_hat0": arr(self.x_hat0),
            "l_hat0": arr(self.l_hat0),
            "chi0": arr(self.chi0),
            "rho": list(self.rho),
            "baseline": {"p0": self.baseline.p0, "process_noise": self.baseline.process_noise,
                         "measurement_noise": self.baseline.measurement_noise, "initial_range": self.baseline.initial_range},
            "n_orth": self.n_orth,
            "delta_min": self.delta_min,
            "pe_window": self.pe_window,
        }

    @staticmethod
    def from_dict(d: dict) -> "Scenario":
        try:
            def arr(a):
                return None if a is None else np.array(a, dtype=float)

            def gain(g):
                return float(g) if np.ndim(g) == 0 else np.array(g, dtype=float)

            pose = Pose(arr(d["initial_pose"]["R"]), arr(d["initial_pose"]["x"]))
            segs = tuple(Segment(float(s["t_end"]), arr(s["omega"]), arr(s["v"])) for s in d["profile"])
            vis = d.get("visibility")
            if vis is not None:
                vis = VisibilitySchedule(tuple(None if iv is None else tuple((float(a), float(b)) for a, b in iv) for iv in vis))
            seed = int(d.get("seed", 0))
            nz = d.get("noise", {})
            mg = d.get("mapping_gains", {})
            lg = d.get("localization_gains", {})
            bl = d.get("baseline", {})
            sc = Scenario(
                name=str(d.get("name", "custom")),
                profile=TrajectoryProfile(segs, pose),
                landmarks=LandmarkMap(arr(d["landmarks"]).reshape(-1, 3)),
                ext0=ExtensionState(arr(d["extension_init"]["Q"]), arr(d["extension_init"]["xi"])),
                dt=float(d.get("dt", 1e-3)),
                horizon=float(d.get("horizon", 20.0)),
                noise=NoiseModel(float(nz.get("sigma_v", 0)), float(nz.get("sigma_omega", 0)), float(nz.get("sigma_y", 0)), seed),
                visibility=vis,
                sigma_gains=SigmaGains(gain(mg.get("alpha", 5.0)), gain(mg.get("gamma", 100.0)), gain(mg.get("k_I", 5.0))),
                loc_gains=LocalizationGains(gain(lg.get("k", 1.0)), gain(lg.get("sigma", 1.0))),
                mapper=d.get("mapper", "drem"),
                barl_mode=d.get("barl_mode", "anchored"),
                integrator=d.get("integrator", "euler"),
                seed=seed,
                cQ_hat0=arr(d.get("cQ_hat0")) if d.get("cQ_hat0") is not None else np.eye(3),
                x_hat0=arr(d.get("x_hat0")),
                l_hat0=arr(d.get("l_hat0")),
                chi0=arr(d.get("chi0")),
                rho=tuple(float(r) for r in d.get("rho", (1.0, 1.0, 1.0))),
                baseline=BaselineConfig(float(bl.get("p0", 10.0)), float(bl.get("process_noise", 1e-4)),
                                        float(bl.get("measurement_noise", 1e-2)), float(bl.get("initial_range", 0.0))),
                n_orth=int(d.get("n_orth", N_ORTH)),
                delta_min=float(d.get("delta_min", 1e-6)),
                pe_window=float(d.get("pe_window", 2.0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioError(f"invalid scenario config: {e}") from e
        return sc.validate()

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @staticmethod
    def load(path) -> "Scenario":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ScenarioError(f"{path}: {e}") from e
        return Scenario.from_dict(d)


def _reference(name: str, k_I: float, segments, horizon: float, noise: bool, seed: int) -> Scenario:
    sc = Scenario(
        name=name,
        profile=TrajectoryProfile(tuple(segments), Pose(rot_z(np.pi / 6), np.array([1.0, 1.0, 2.0]))),
        landmarks=LandmarkMap(DEFAULT_LANDMARKS.copy()),
        ext0=ExtensionState(rot_z(np.pi / 2), np.array([0.0, 1.0, 1.0])),
        dt=1e-3,
        horizon=horizon,
        sigma_gains=SigmaGains(5.0, 100.0, k_I),
        seed=seed,
    )
    return sc.with_noise(noise).validate()


_V = np.array([1.0, 0.0, 0.0])
_W = np.array([0.0, 0.0, -0.4])


def scenario_pe(noise: bool = False, seed: int = 0, horizon: float = 20.0) -> Scenario:
    """Constant twist for the whole run: the robot circles and every landmark stays excited."""
    return _reference("pe", 5.0, [Segment(horizon, _W, _V)], horizon, noise, seed)


def scenario_ie(noise: bool = False, seed: int = 0, horizon: float = 30.0, t_stop: float = 12.0) -> Scenario:
    """Same motion, but the robot stops at t_stop; excitation is only interval-wise."""
    segs = [Segment(t_stop, _W, _V), Segment(max(horizon, t_stop + 1.0), np.zeros(3), np.zeros(3))]
    return _reference("ie", 20.0, segs, horizon, noise, seed)
