"""Run loop, run records, comparisons, Monte-Carlo replay and export."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baseline import BodyLandmarkBelief, kf_predict, kf_update
from .errors import BearingSlamError
from .excitation import ExcitationCertificate, certify
from .extension import ExtensionState, constant_transform, extension_step, virtual_landmark
from .geometry import attitude_error, det3, nearest_rotation, rot_exp
from .localization import LocalizationInputs, localization_init, localization_step, outputs, pose_update
from .mapping import SigmaGains, gamma_star, gradient_step, sigma_init, sigma_step
from .regressor import RegressorSample, build_regressor
from .scenario import Scenario
from .world import GroundTruthState, body_landmarks, measure_bearing, measure_velocity, step_truth


@dataclass
class RunRecord:
    """Time-indexed series on the uniform grid t_k = k dt, k = 0..N."""

    scenario: Scenario
    t: np.ndarray
    R: np.ndarray
    x: np.ndarray
    Q: np.ndarray
    xi: np.ndarray
    omega_meas: np.ndarray  # twist applied over [t_k, t_k+1]; last row NaN
    v_meas: np.ndarray
    y: np.ndarray
    visible: np.ndarray
    phi: np.ndarray
    l_hat_v: np.ndarray
    Delta: np.ndarray
    Delta_e: np.ndarray
    omega: np.ndarray
    l_bar: np.ndarray
    cQ_hat: np.ndarray
    x_hat: np.ndarray
    R_hat: np.ndarray
    l_hat: np.ndarray
    kf_mean: np.ndarray
    kf_truth: np.ndarray
    vl_true: np.ndarray
    extras: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    # derived error series
    @property
    def vl_err(self) -> np.ndarray:
        return self.l_hat_v - self.vl_true

    @property
    def att_err(self) -> np.ndarray:
        return attitude_error(self.R, self.R_hat)

    @property
    def x_err(self) -> np.ndarray:
        return np.linalg.norm(self.x_hat - self.x, axis=-1)

    @property
    def l_err(self) -> np.ndarray:
        return np.linalg.norm(self.l_hat - self.scenario.landmarks.positions, axis=-1)

    @property
    def lbar_err(self) -> np.ndarray:
        return np.linalg.norm(self.l_bar - self.scenario.landmarks.positions, axis=-1)

    @property
    def kf_err(self) -> np.ndarray:
        return np.linalg.norm(self.kf_mean - self.kf_truth, axis=-1)

    def index(self, t: float) -> int:
        return int(round(t / self.scenario.dt))

    def samples(self, i: int) -> RegressorSample:
        """Regressor stream of landmark i with a leading time axis."""
        return RegressorSample(self.phi[:, i], np.einsum("kij,kj->ki", self.phi[:, i], self.xi), self.visible[:, i], self.t)


def _alloc(N: int, n: int) -> dict:
    z = lambda *s: np.zeros((N + 1,) + s)
    return dict(
        t=z(), R=z(3, 3), x=z(3), Q=z(3, 3), xi=z(3), omega_meas=np.full((N + 1, 3), np.nan),
        v_meas=np.full((N + 1, 3), np.nan), y=z(n, 3), visible=np.zeros((N + 1, n), dtype=bool),
        phi=z(n, 3, 3), l_hat_v=z(n, 3), Delta=z(n), Delta_e=z(n), omega=z(n), l_bar=z(n, 3),
        cQ_hat=z(3, 3), x_hat=z(3), R_hat=z(3, 3), l_hat=z(n, 3), kf_mean=z(n, 3), kf_truth=z(n, 3),
    )


def run(scenario: Scenario, order: str = "map-first") -> RunRecord:
    """Simulate the scenario and run the observers and the baseline side by side.

    Per tick: extension step, mapping step, localization step (pose update,
    then l_bar estimators), outputs. ``order="loc-first"`` swaps the mapping
    and localization steps; it exists only to show that ordering matters.
    """
    sc = scenario.validate()
    N, n, dt = sc.n_steps, sc.n, sc.dt
    L = sc.landmarks.positions
    noise = sc.noise
    rng = np.random.default_rng(sc.seed) if noise.active else None
    sched = sc.schedule()
    gains = sc.sigma_gains
    k_I = np.asarray(gains.k_I, dtype=float)

    anchor = sc.profile.initial_pose
    truth = GroundTruthState(anchor, 0.0)
    ext0 = ExtensionState(sc.ext0.Q.copy(), sc.ext0.xi.copy())
    ext = ext0
    vl_true = virtual_landmark(constant_transform(anchor, ext0), L)

    l_hat0 = np.zeros((n, 3)) if sc.l_hat0 is None else np.array(sc.l_hat0, dtype=float).reshape(n, 3)
    chi0 = l_hat0 if sc.chi0 is None else np.array(sc.chi0, dtype=float).reshape(n, 3)
    mstate = sigma_init(l_hat0, chi0)
    x_hat0 = ext0.xi if sc.x_hat0 is None else sc.x_hat0
    loc = localization_init(sc.cQ_hat0, x_hat0, sigma_init(np.zeros((n, 3))))

    try:
        y = measure_bearing(truth, L, noise, rng)
        vis = sched.visible_at(0.0)
        sample = build_regressor(ext, y, vis, 0.0)
        kf = BodyLandmarkBelief.initial(n, sc.baseline.p0, sc.baseline.initial_range * y)
        kf = kf_update(kf, y, sc.baseline.measurement_noise, vis)
    except BearingSlamError as e:
        raise type(e)(f"t={0.0:.6f}: {e}") from e

    rec = _alloc(N, n)

    def log(k, truth, ext, y, sample, mstate, loc, kf):
        rec["t"][k] = truth.t
        rec["R"][k] = truth.R
        rec["x"][k] = truth.x
        rec["Q"][k] = ext.Q
        rec["xi"][k] = ext.xi
        rec["y"][k] = y
        rec["visible"][k] = sample.visible
        rec["phi"][k] = sample.phi
        rec["l_hat_v"][k] = mstate.l_hat
        P = mstate.Phi
        rec["Delta"][k] = D = np.maximum(det3(0.5 * (P + np.swapaxes(P, -1, -2))), 0.0)
        rec["Delta_e"][k] = D + k_I * (1.0 - mstate.omega)
        rec["omega"][k] = mstate.omega
        rec["l_bar"][k] = loc.l_bar
        R_hat, x_hat, l_hat = outputs(loc, ext, mstate.l_hat)
        rec["cQ_hat"][k] = loc.cQ_hat
        rec["x_hat"][k] = x_hat
        rec["R_hat"][k] = R_hat
        rec["l_hat"][k] = l_hat
        rec["kf_mean"][k] = kf.mean
        rec["kf_truth"][k] = body_landmarks(truth, L)

    def map_step(ms, sample):
        if sc.mapper == "drem":
            return sigma_step(ms, sample, gains, dt, sc.integrator)
        return replace(ms, l_hat=gradient_step(ms.l_hat, sample, gains.gamma))

    def loc_step(lc, inputs):
        return localization_step(lc, inputs, sc.loc_gains, dt, gains, sc.mapper, sc.barl_mode,
                                 sc.integrator, sc.n_orth)

    if order not in ("map-first", "loc-first"):
        raise ValueError(f"unknown order {order!r}")

    log(0, truth, ext, y, sample, mstate, loc, kf)
    for k in range(N):
        t = k * dt
        try:
            u = measure_velocity(sc.profile, t, noise, rng)
            truth_next = step_truth(truth, sc.profile, dt, step=k, n_orth=sc.n_orth)
            E = rot_exp(u.angular, dt)
            ext_next = extension_step(ext, u, dt, sc.n_orth, E)
            y = measure_bearing(truth_next, L, noise, rng)
            vis = sched.visible_at(truth_next.t)
            sample = build_regressor(ext_next, y, vis, truth_next.t)
            if order == "map-first":
                mstate = map_step(mstate, sample)
                loc = loc_step(loc, LocalizationInputs(u, ext, mstate.l_hat, sample, anchor, ext0, ext_next))
            else:
                loc = loc_step(loc, LocalizationInputs(u, ext, mstate.l_hat, sample, anchor, ext0, ext_next))
                mstate = map_step(mstate, sample)
            kf = kf_predict(kf, u, dt, sc.baseline.process_noise, F=E.T)
            kf = kf_update(kf, y, sc.baseline.measurement_noise, vis)
        except BearingSlamError as e:
            raise type(e)(f"t={t:.6f}: {e}") from e
        rec["omega_meas"][k] = u.angular
        rec["v_meas"][k] = u.linear
        truth, ext = truth_next, ext_next
        log(k + 1, truth, ext, y, sample, mstate, loc, kf)

    return RunRecord(scenario=sc, vl_true=vl_true, **rec)


# ---------------------------------------------------------------------------
# analysis


def decay_rate(t, e, floor: float = 1e-12) -> float:
    """Log-linear least-squares decay rate of |e| over the given samples."""
    e = np.abs(np.asarray(e, dtype=float))
    m = e > floor
    if m.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.asarray(t)[m], np.log(e[m]), 1)[0]
    return float(-slope)


def certificates(record: RunRecord, i: int):
    sc = record.scenario
    s = record.samples(i)
    return (certify(s, "IE", sc.pe_window, sc.delta_min), certify(s, "PE", sc.pe_window, sc.delta_min))


def rate_check(record: RunRecord, i: int, cert: ExcitationCertificate | None = None):
    """gamma_star from the IE certificate against fitted decay rates of each coordinate."""
    sc = record.scenario
    cert = cert or certificates(record, i)[0]
    if cert.kind == "NONE":
        return None
    alpha = float(np.broadcast_to(sc.sigma_gains.alpha, (sc.n,))[i])
    gamma = float(np.broadcast_to(sc.sigma_gains.gamma, (sc.n,))[i])
    k_I = float(np.broadcast_to(sc.sigma_gains.k_I, (sc.n,))[i])
    rate, tau, delta0 = gamma_star(SigmaGains(alpha, gamma, k_I), cert.delta, cert.t_c)
    t_start = cert.t0 + cert.t_c + float(tau)
    m = record.t >= t_start
    fitted = [decay_rate(record.t[m], record.vl_err[m, i, j]) for j in range(3)]
    return {
        "gamma_star": float(rate), "tau_star": float(tau), "delta0": float(delta0), "t_start": t_start,
        "fitted": fitted, "bound_holds": bool(all(f >= 1.05 * rate for f in fitted)),
    }


def summary(record: RunRecord) -> dict:
    sc = record.scenario
    out = {
        "scenario": sc.name, "mapper": sc.mapper, "barl_mode": sc.barl_mode, "integrator": sc.integrator,
        "seed": sc.seed, "noise": bool(sc.noise.active), "dt": sc.dt, "horizon": sc.horizon,
        "n_landmarks": sc.n, "n_samples": len(record),
        "baseline": "reconstructed robo-centric LTV Kalman filter",
    }
    if len(record) == 0:
        return out
    out["final"] = {
        "vl_err": np.linalg.norm(record.vl_err[-1], axis=-1).tolist(),
        "l_err": record.l_err[-1].tolist(),
        "lbar_err": record.lbar_err[-1].tolist(),
        "attitude_error": float(record.att_err[-1]),
        "x_err": float(record.x_err[-1]),
        "kf_err": record.kf_err[-1].tolist(),
    }
    certs, rates = [], []
    for i in range(sc.n):
        ie, pe = certificates(record, i)
        certs.append({"IE": ie.to_dict(), "PE": pe.to_dict()})
        rates.append(rate_check(record, i, ie) if sc.mapper == "drem" else None)
    out["certificates"] = certs
    out["rate_bound"] = rates
    out.update(record.extras)
    return out


def compare(scenario: Scenario, t_split: float | None = None, record: RunRecord | None = None) -> dict:
    """PEBO and baseline error norms on the same measurement stream.

    ``t_split`` defaults to the end of the first profile segment when the
    profile has more than one, else to the horizon midpoint.
    """
    rec = record or run(scenario)
    sc = rec.scenario
    if t_split is None:
        segs = sc.profile.segments
        t_split = segs[0].t_end if len(segs) > 1 else sc.horizon / 2
        if t_split > sc.horizon:
            t_split = sc.horizon / 2
    k = rec.index(t_split)
    pebo, base = rec.l_err, rec.kf_err
    return {
        "t_split": t_split,
        "pebo_at_split": pebo[k].tolist(), "pebo_final": pebo[-1].tolist(),
        "baseline_at_split": base[k].tolist(), "baseline_final": base[-1].tolist(),
        "pebo_ratio": (pebo[-1] / pebo[k]).tolist(), "baseline_ratio": (base[-1] / base[k]).tolist(),
        "pebo_better_final": bool(np.all(pebo[-1] < base[-1])),
        "traces": {"t": rec.t, "pebo": pebo, "baseline": base},
    }


def replay_localization(record: RunRecord, cQ_hat0, x_hat0=None, return_traces: bool = False):
    """Re-run the pose update for a batch of initial conditions.

    Only valid with anchored l_bar estimators, whose inputs do not depend on
    the pose estimate; the recorded mapping and l_bar traces are reused.
    Returns final attitude errors and position errors, one per draw.
    """
    sc = record.scenario
    if sc.barl_mode != "anchored":
        raise ValueError("replay needs barl_mode='anchored'")
    cQ = np.array(cQ_hat0, dtype=float)
    m = len(cQ)
    x_hat = np.broadcast_to(record.xi[0] if x_hat0 is None else np.asarray(x_hat0, float), (m, 3)).copy()
    N = len(record) - 1
    att = np.zeros((N + 1, m)) if return_traces else None
    pos = np.zeros((N + 1, m)) if return_traces else None
    for k in range(N + 1):
        if return_traces:
            att[k] = attitude_error(record.R[k], np.swapaxes(cQ, -1, -2) @ record.Q[k])
            pos[k] = np.linalg.norm(x_hat - record.x[k], axis=-1)
        if k == N:
            break
        cQ, x_hat = pose_update(cQ, x_hat, record.v_meas[k], record.Q[k], record.xi[k], record.l_hat_v[k + 1],
                                record.l_bar[k], record.visible[k + 1], sc.loc_gains, sc.dt)
        if sc.n_orth and (k + 1) % sc.n_orth == 0:
            cQ = nearest_rotation(cQ)
    R_hat = np.swapaxes(cQ, -1, -2) @ record.Q[N]
    final = (attitude_error(record.R[N], R_hat), np.linalg.norm(x_hat - record.x[N], axis=-1))
    if return_traces:
        return final, (att, pos)
    return final


# ---------------------------------------------------------------------------
# export


def _families(record: RunRecord):
    n = record.scenario.n
    ax = "012"
    mat = [f"{i}{j}" for i in ax for j in ax]

    def cols(prefix, names):
        return [f"{prefix}_{s}" for s in names]

    def per(prefix, k=3):
        return [f"{prefix}{i}_{j}" for i in range(n) for j in ax[:k]] if k else [f"{prefix}{i}" for i in range(n)]

    N1 = len(record)
    def flat(a):
        a = np.asarray(a, dtype=float)
        return a.reshape(N1, int(np.prod(a.shape[1:])))
    return {
        "truth": (cols("R", mat) + cols("x", ax), [flat(record.R), flat(record.x)]),
        "extension": (cols("Q", mat) + cols("xi", ax), [flat(record.Q), flat(record.xi)]),
        "velocity": (cols("omega", ax) + cols("v", ax), [flat(record.omega_meas), flat(record.v_meas)]),
        "bearings": (per("y") + per("visible", 0), [flat(record.y), flat(record.visible)]),
        "mapping": (per("vl_hat") + per("Delta", 0) + per("Delta_e", 0) + per("omega", 0),
                    [flat(record.l_hat_v), flat(record.Delta), flat(record.Delta_e), flat(record.omega)]),
        "localization": (cols("cQ_hat", mat) + cols("x_hat", ax) + cols("R_hat", mat) + per("l_bar") + per("l_hat"),
                         [flat(record.cQ_hat), flat(record.x_hat), flat(record.R_hat), flat(record.l_bar), flat(record.l_hat)]),
        "errors": (["attitude_error", "x_err"] + per("vl_err", 0) + per("l_err", 0) + per("lbar_err", 0) + per("kf_err", 0),
                   [flat(record.att_err), flat(record.x_err), flat(np.linalg.norm(record.vl_err, axis=-1)),
                    flat(record.l_err), flat(record.lbar_err), flat(record.kf_err)]),
        "baseline": (per("kf_mean") + per("kf_truth"), [flat(record.kf_mean), flat(record.kf_truth)]),
    }


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o))


def summary_json(s: dict) -> str:
    return json.dumps(s, sort_keys=True, indent=2, default=_json_default) + "\n"


def export(record: RunRecord, out_dir, summary_dict: dict | None = None) -> list:
    """Write one CSV per signal family plus summary.json; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create {out}: {e}") from e
    paths = []
    for name, (names, blocks) in _families(record).items():
        data = np.hstack([record.t.reshape(-1, 1)] + blocks)
        p = out / f"{name}.csv"
        try:
            np.savetxt(p, data, delimiter=",", header=",".join(["t"] + names), comments="", fmt="%.17g")
        except OSError as e:
            raise OSError(f"cannot write {p}: {e}") from e
        paths.append(p)
    s = summary(record) if summary_dict is None else summary_dict
    p = out / "summary.json"
    p.write_text(summary_json(s))
    paths.append(p)
    return paths


def read_csv(path):
    """Read an exported CSV back as (column names, 2-D array)."""
    path = Path(path)
    with path.open() as f:
        names = f.readline().strip().split(",")
        if not f.readline().strip():
            return names, np.zeros((0, len(names)))
    return names, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def empty_record(scenario: Scenario) -> RunRecord:
    """A record with no rows (used for format checks)."""
    rec = {k: v[:0] for k, v in _alloc(0, scenario.n).items()}
    return RunRecord(scenario=scenario, vl_true=np.zeros((scenario.n, 3)), **rec)
