"""Acceptance checks: one function per criterion, each returning a CheckResult.

Long runs are cached per process so that checks sharing a scenario reuse it.
"""
from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .extension import constant_transform, extension_step
from .geometry import adjugate3, hat, projector, rot_exp
from .harness import (RunRecord, export, rate_check, read_csv, replay_localization, run, summary,
                      summary_json, _families)
from .mapping import batch_ls_oracle
from .regressor import build_regressor
from .extension import ExtensionState
from .scenario import Scenario, scenario_ie, scenario_pe
from .world import GroundTruthState, step_truth


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    detail: str
    values: dict

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.criterion:>2} {self.name}: {self.detail}"

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "name": self.name, "passed": self.passed, "detail": self.detail,
                "values": self.values}


@lru_cache(maxsize=None)
def cached_run(name: str, noise: bool = False, mapper: str = "drem", seed: int = 0) -> RunRecord:
    sc = scenario_pe(noise, seed) if name == "pe" else scenario_ie(noise, seed)
    return run(replace(sc, mapper=mapper))


def extension_invariance(scenario: Scenario) -> float:
    """max_t |vX(t) X(t)^-1 - cX|_F along the scenario's noise-free truth (truth and extension only)."""
    sc = scenario
    anchor = sc.profile.initial_pose
    cX = constant_transform(anchor, sc.ext0).matrix()
    truth, ext = GroundTruthState(anchor, 0.0), sc.ext0
    worst = 0.0
    for k in range(sc.n_steps + 1):
        V = ext.pose().matrix()
        Xinv = np.eye(4)
        Xinv[:3, :3] = truth.R.T
        Xinv[:3, 3] = -truth.R.T @ truth.x
        worst = max(worst, float(np.linalg.norm(V @ Xinv - cX)))
        if k == sc.n_steps:
            break
        u = sc.profile.twist(k * sc.dt)
        truth = step_truth(truth, sc.profile, sc.dt, step=k, n_orth=sc.n_orth)
        ext = extension_step(ext, u, sc.dt, sc.n_orth)
    return worst


def check_geometry(n: int = 10_000, seed: int = 0) -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
    e_hat = np.abs(np.einsum("kij,kj->ki", hat(a), b) - np.cross(a, b)).max()
    w = rng.normal(size=(n, 3))
    s, u = rng.uniform(0.01, 2.0, n), rng.uniform(0.01, 2.0, n)
    e_group = np.abs(rot_exp(w * s[:, None], 1.0) @ rot_exp(w * u[:, None], 1.0)
                     - rot_exp(w * (s + u)[:, None], 1.0)).max()
    P = projector(a)
    e_proj = max(np.abs(P @ P - P).max(), np.abs(np.einsum("kij,kj->ki", P, a)).max(),
                 np.abs(P - np.swapaxes(P, 1, 2)).max())
    A = rng.uniform(-10, 10, size=(n, 3, 3))
    e_adj = np.abs(adjugate3(A) @ A - np.linalg.det(A)[:, None, None] * np.eye(3)).max()
    dt = time.perf_counter() - t0
    worst = max(e_hat, e_group, e_proj, e_adj)
    ok = worst <= 1e-9 and dt < 5.0
    return CheckResult(1, "geometry property suite", ok,
                       f"{n} draws, max error {worst:.2e} (<= 1e-9), {dt:.2f} s (< 5 s)",
                       {"hat": e_hat, "group_law": e_group, "projector": e_proj, "adjugate": e_adj, "runtime": dt})


def check_extension_invariance() -> CheckResult:
    t0 = time.perf_counter()
    dev = extension_invariance(scenario_pe())
    dt = time.perf_counter() - t0
    ok = dev <= 1e-9 and dt < 10.0
    return CheckResult(2, "constant transform invariance", ok,
                       f"max |vX X^-1 - cX|_F = {dev:.2e} (<= 1e-9), {dt:.2f} s (< 10 s)",
                       {"deviation": dev, "runtime": dt})


def regression_residuals(r: RunRecord):
    """(max |q - phi vl|, max bearing reconstruction error) over visible samples."""
    q = np.einsum("kiab,kb->kia", r.phi, r.xi)
    res = np.linalg.norm(q - np.einsum("kiab,ib->kia", r.phi, r.vl_true), axis=-1)
    d = r.vl_true[None] - r.xi[:, None]
    y_rec = np.einsum("kba,kib->kia", r.Q, d) / np.linalg.norm(d, axis=-1, keepdims=True)
    ey = np.linalg.norm(y_rec - r.y, axis=-1)
    vis = r.visible
    return float(res[vis].max()), float(ey[vis].max())


def check_regression() -> CheckResult:
    vals = {}
    for name in ("pe", "ie"):
        vals[f"{name}_q"], vals[f"{name}_y"] = regression_residuals(cached_run(name))
    worst = max(vals.values())
    return CheckResult(3, "regression consistency", worst <= 1e-12,
                       f"max residual {worst:.2e} over both scenarios (<= 1e-12)", vals)


def max_increase(r: RunRecord) -> float:
    e = np.abs(r.vl_err)
    return float((e[1:] - e[:-1]).max())


def check_monotone() -> CheckResult:
    vals = {name: max_increase(cached_run(name)) for name in ("pe", "ie")}
    worst = max(vals.values())
    return CheckResult(4, "element-wise monotonicity", worst <= 1e-9,
                       f"largest per-step increase {worst:.2e} (<= 1e-9)", vals)


def check_ie_convergence() -> CheckResult:
    r = cached_run("ie")
    k = r.index(12.0)
    e = np.linalg.norm(r.vl_err, axis=-1)
    ratio = e[-1] / e[k]
    g = cached_run("ie", mapper="gradient")
    eg = np.linalg.norm(g.vl_err, axis=-1)
    change = np.abs(eg[k + 1:] - eg[k]).max(axis=0)
    ok_drem = bool(np.all(ratio <= 0.2))
    ok_grad = bool(np.all(change <= 1e-6))
    return CheckResult(5, "convergence after excitation stops", ok_drem and ok_grad,
                       f"DREM max ratio e(30)/e(12) = {ratio.max():.2e} (<= 0.2) [{'ok' if ok_drem else 'FAIL'}]; "
                       f"gradient max change over (12,30] = {change.max():.2e} (<= 1e-6) [{'ok' if ok_grad else 'FAIL'}]",
                       {"drem_ratio": ratio.tolist(), "gradient_change": change.tolist(),
                        "drem_ok": ok_drem, "gradient_ok": ok_grad})


def check_rate_bound() -> CheckResult:
    r = cached_run("pe")
    rows = [rate_check(r, i) for i in range(r.scenario.n)]
    ok = all(row is not None and row["bound_holds"] for row in rows)
    slack = min(min(row["fitted"]) / max(row["gamma_star"], 1e-300) for row in rows if row)
    return CheckResult(6, "rate bound", ok,
                       f"fitted rate >= 1.05 gamma_star for every coordinate; min fitted "
                       f"{min(min(row['fitted']) for row in rows if row):.3f} /s, max gamma_star "
                       f"{max(row['gamma_star'] for row in rows if row):.2e} /s",
                       {"rows": rows, "min_ratio": slack})


def two_sample_oracle(n: int = 200, seed: int = 0) -> float:
    """Worst batch-oracle error on two-bearing instances built from known landmarks."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        vl = rng.uniform(-5, 5, 3)
        samples = []
        for _ in range(2):
            Q = Rotation.random(random_state=rng).as_matrix()
            xi = rng.uniform(-5, 5, 3)
            d = vl - xi
            samples.append(build_regressor(ExtensionState(Q, xi), Q.T @ d / np.linalg.norm(d)))
        worst = max(worst, float(np.abs(batch_ls_oracle(samples) - vl).max()))
    return worst


def check_oracle() -> CheckResult:
    vals = {}
    for mapper in ("drem", "gradient"):
        r = cached_run("pe", mapper=mapper)
        oracle = np.array([batch_ls_oracle(r.samples(i)) for i in range(r.scenario.n)])
        vals[mapper] = np.linalg.norm(r.l_hat_v[-1] - oracle, axis=-1).tolist()
    vals["two_sample"] = two_sample_oracle()
    ok_d = max(vals["drem"]) <= 1e-3
    ok_g = max(vals["gradient"]) <= 1e-3
    ok_o = vals["two_sample"] <= 1e-10
    return CheckResult(7, "batch least-squares agreement", ok_d and ok_g and ok_o,
                       f"DREM max {max(vals['drem']):.2e} [{'ok' if ok_d else 'FAIL'}]; gradient max "
                       f"{max(vals['gradient']):.2e} [{'ok' if ok_g else 'FAIL'}] (<= 1e-3); two-sample oracle "
                       f"{vals['two_sample']:.2e} (<= 1e-10) [{'ok' if ok_o else 'FAIL'}]", vals)


def check_almost_global(draws: int = 100, seed: int = 0) -> CheckResult:
    t0 = time.perf_counter()
    r = cached_run("pe")
    cQ0 = Rotation.random(draws, random_state=seed).as_matrix()
    att, pos = replay_localization(r, cQ0)
    dt = time.perf_counter() - t0
    good = int(np.sum((att < 0.02) & (pos < 0.05)))
    ok = good >= 99 * draws // 100 and dt < 300
    return CheckResult(8, "almost-global localization", ok,
                       f"{good}/{draws} draws reach attitude < 0.02 and |x err| < 0.05 m (>= 99), {dt:.1f} s",
                       {"converged": good, "attitude": att.tolist(), "position": pos.tolist(), "runtime": dt})


def check_comparison(seed: int = 0) -> CheckResult:
    r = cached_run("ie", noise=True, seed=seed)
    k = r.index(12.0)
    pebo = r.l_err[-1] / r.l_err[k]
    base = r.kf_err[-1] / r.kf_err[k]
    ok_p = bool(np.all(pebo < 0.5))
    ok_b = bool(np.all(base >= 1.0))
    return CheckResult(9, "observer vs baseline after excitation stops", ok_p and ok_b,
                       f"observer max e(30)/e(12) = {pebo.max():.3f} (< 0.5); baseline min e(30)/e(12) = "
                       f"{base.min():.3f} (>= 1)", {"observer_ratio": pebo.tolist(), "baseline_ratio": base.tolist()})


def check_determinism(seed: int = 0) -> CheckResult:
    a = cached_run("ie", noise=True, seed=seed)
    b = run(scenario_ie(True, seed))
    same = summary_json(summary(a)) == summary_json(summary(b))
    worst = 0.0
    with tempfile.TemporaryDirectory() as tmp:
        export(a, tmp)
        for name, (cols, blocks) in _families(a).items():
            names, data = read_csv(Path(tmp) / f"{name}.csv")
            ref = np.hstack([a.t.reshape(-1, 1)] + blocks)
            both_nan = np.isnan(ref) & np.isnan(data)
            diff = np.where(both_nan, 0.0, np.abs(ref - data))
            worst = max(worst, float(np.nan_to_num(diff, nan=np.inf).max()))
            if names != ["t"] + cols:
                worst = np.inf
    ok = same and worst <= 1e-12
    return CheckResult(10, "determinism and CSV round trip", ok,
                       f"summaries identical: {same}; CSV round-trip max error {worst:.1e} (<= 1e-12)",
                       {"identical": same, "roundtrip": worst})


CHECKS = [check_geometry, check_extension_invariance, check_regression, check_monotone, check_ie_convergence,
          check_rate_bound, check_oracle, check_almost_global, check_comparison, check_determinism]


def run_all(verbose: bool = True) -> list:
    out = []
    for fn in CHECKS:
        res = fn()
        if verbose:
            print(res.line(), flush=True)
        out.append(res)
    return out
