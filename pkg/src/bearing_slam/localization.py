"""Localization observer: estimates the constant transform cQ and the position x.

Inputs are the mapping estimates vl_hat (extension frame) and the inertial
landmark estimates l_bar from per-landmark estimators fed by anchored or
feedback regressors. Outputs are the pose R_hat = cQ_hat^T Q, x_hat and the
inertial landmarks l_hat = cQ_hat^T (vl_hat - xi) + x_hat.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .extension import N_ORTH, ExtensionState
from .geometry import Pose, Twist, cross, nearest_rotation, rot_exp
from .mapping import SigmaGains, SigmaState, gradient_step, sigma_step
from .regressor import RegressorSample, build_anchored_regressor, build_feedback_regressor


@dataclass(frozen=True)
class LocalizationGains:
    k: np.ndarray | float = 1.0
    sigma: np.ndarray | float = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.k) <= 0) or np.any(np.asarray(self.sigma) <= 0):
            raise ValueError("localization gains must be positive")

    def per_landmark(self, n: int):
        k, s = np.asarray(self.k, float), np.asarray(self.sigma, float)
        return (np.full(n, float(k)) if k.ndim == 0 else k), (np.full(n, float(s)) if s.ndim == 0 else s)


@dataclass(frozen=True)
class LocalizationState:
    cQ_hat: np.ndarray
    x_hat: np.ndarray
    bar: SigmaState  # per-landmark estimators; bar.l_hat is l_bar
    steps: int = 0

    @property
    def l_bar(self) -> np.ndarray:
        return self.bar.l_hat


@dataclass(frozen=True)
class LocalizationInputs:
    u: Twist
    ext: ExtensionState  # extension state paired with x_hat (start of tick)
    l_hat_v: np.ndarray  # freshly updated mapping estimates, (n, 3)
    samples: RegressorSample  # regressors at the end of the tick
    anchor: Pose
    ext0: ExtensionState
    ext_next: ExtensionState | None = None  # extension state at the end of the tick


def w_vis(l_hat_v, l_bar, cQ_hat, gains: LocalizationGains) -> np.ndarray:
    """sum_{i<n} k_i vr_i x (cQ_hat r_bar_i) over consecutive differences; zero when n <= 2.

    ``cQ_hat`` may carry leading batch axes.
    """
    l_hat_v = np.asarray(l_hat_v, dtype=float)
    l_bar = np.asarray(l_bar, dtype=float)
    cQ_hat = np.asarray(cQ_hat, dtype=float)
    n = len(l_hat_v)
    if n <= 2:
        return np.zeros(cQ_hat.shape[:-2] + (3,))
    k, _ = gains.per_landmark(n)
    rv = np.diff(l_hat_v, axis=0)
    rb = np.einsum("...ij,kj->...ki", cQ_hat, np.diff(l_bar, axis=0))
    return np.einsum("k,...ki->...i", k[: n - 1], cross(rv, rb))


def pose_update(cQ_hat, x_hat, v, Q, xi, l_hat_v, l_bar, visible, gains: LocalizationGains, dt: float):
    """Discrete cQ_hat / x_hat update; batched over leading axes of cQ_hat and x_hat.

    cQ_hat <- exp(-dt w_vis_x) cQ_hat,
    x_hat <- x_hat + dt [R_hat v + sum_visible sigma_i (l_bar_i - x_hat - cQ_hat^T (vl_i - xi))].
    """
    n = len(l_hat_v)
    _, sigma = gains.per_landmark(n)
    w = w_vis(l_hat_v, l_bar, cQ_hat, gains)
    R_hat = np.swapaxes(cQ_hat, -1, -2) @ Q
    # cQ_hat^T (vl_i - xi) for every landmark, as rows
    z = np.einsum("kj,...ji->...ki", np.asarray(l_hat_v) - xi, cQ_hat)
    s = np.where(np.asarray(visible), sigma, 0.0)
    corr = np.einsum("k,...ki->...i", s, l_bar - x_hat[..., None, :] - z)
    x_new = x_hat + dt * (R_hat @ v + corr)
    cQ_new = rot_exp(-w, dt) @ cQ_hat
    return cQ_new, x_new


def localization_init(cQ_hat0, x_hat0, bar: SigmaState) -> LocalizationState:
    return LocalizationState(np.array(cQ_hat0, dtype=float), np.array(x_hat0, dtype=float), bar)


def localization_step(state: LocalizationState, inputs: LocalizationInputs, gains: LocalizationGains,
                      dt: float, bar_gains: SigmaGains | None = None, mapper: str = "drem",
                      barl_mode: str = "anchored", integrator: str = "euler",
                      n_orth: int = N_ORTH) -> LocalizationState:
    """One tick: pose update from the current l_bar, then the l_bar estimators.

    The l_bar estimators see the end-of-tick regressors, and in feedback mode
    the freshly updated pose estimate.
    """
    ext = inputs.ext
    ext_next = inputs.ext_next if inputs.ext_next is not None else ext
    cQ, x_hat = pose_update(state.cQ_hat, state.x_hat, inputs.u.linear, ext.Q, ext.xi,
                            inputs.l_hat_v, state.l_bar, inputs.samples.visible, gains, dt)
    k = state.steps + 1
    if n_orth and k % n_orth == 0:
        cQ = nearest_rotation(cQ)

    if barl_mode == "anchored":
        bs = build_anchored_regressor(ext_next, inputs.ext0, inputs.anchor, inputs.samples)
    elif barl_mode == "feedback":
        bs = build_feedback_regressor(ext_next, cQ.T @ ext_next.Q, x_hat, inputs.samples)
    else:
        raise ValueError(f"unknown barl_mode {barl_mode!r}")
    bar_gains = bar_gains or SigmaGains()
    if mapper == "drem":
        bar = sigma_step(state.bar, bs, bar_gains, dt, integrator)
    elif mapper == "gradient":
        bar = SigmaState(state.bar.q_e, state.bar.Phi, state.bar.chi, state.bar.omega,
                         gradient_step(state.l_bar, bs, bar_gains.gamma), state.bar.chi0)
    else:
        raise ValueError(f"unknown mapper {mapper!r}")
    return LocalizationState(cQ, x_hat, bar, k)


def outputs(state: LocalizationState, ext: ExtensionState, l_hat_v):
    """(R_hat, x_hat, l_hat) with R_hat = cQ_hat^T Q and l_hat = cQ_hat^T (vl_hat - xi) + x_hat."""
    R_hat = state.cQ_hat.T @ ext.Q
    l_hat = (np.asarray(l_hat_v) - ext.xi) @ state.cQ_hat + state.x_hat
    return R_hat, state.x_hat, l_hat
