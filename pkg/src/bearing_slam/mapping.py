"""Per-landmark mapping observers in the extension frame.

The DREM observer keeps, per landmark, a first-order filtered regressor
(q_e, Phi), scalarizes it with the adjugate, and mixes in integral
information through (chi, omega) so that convergence survives the end of
excitation. The gradient estimator is the simple fixed-step alternative.

States carry an optional leading landmark axis; all landmarks are stepped
together and independently.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import SingularNormalMatrix
from .geometry import adjugate3, det3
from .regressor import RegressorSample


@dataclass(frozen=True)
class SigmaGains:
    alpha: np.ndarray | float = 5.0
    gamma: np.ndarray | float = 100.0
    k_I: np.ndarray | float = 5.0

    def __post_init__(self):
        for name in ("alpha", "gamma", "k_I"):
            if np.any(np.asarray(getattr(self, name)) <= 0):
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class SigmaState:
    q_e: np.ndarray
    Phi: np.ndarray
    chi: np.ndarray
    omega: np.ndarray
    l_hat: np.ndarray
    chi0: np.ndarray


@dataclass(frozen=True)
class DremSignals:
    Delta: np.ndarray
    Y: np.ndarray
    Delta_e: np.ndarray
    Y_e: np.ndarray


def sigma_init(l_hat0, chi0=None) -> SigmaState:
    l_hat0 = np.array(l_hat0, dtype=float)
    chi0 = np.zeros_like(l_hat0) if chi0 is None else np.array(chi0, dtype=float)
    lead = l_hat0.shape[:-1]
    return SigmaState(
        q_e=np.zeros_like(l_hat0),
        Phi=np.zeros(lead + (3, 3)),
        chi=chi0.copy(),
        omega=np.ones(lead),
        l_hat=l_hat0,
        chi0=chi0,
    )


def _v(g, extra: int = 1):
    # per-landmark gains broadcast against trailing vector/matrix axes
    g = np.asarray(g, dtype=float)
    return g.reshape(g.shape + (1,) * extra) if g.ndim else g


def drem_signals(state: SigmaState, gains: SigmaGains) -> DremSignals:
    """Delta = det(sym Phi), Y = adj(Phi) q_e, plus the integral-information mix.

    Phi is PSD, so a negative determinant can only be round-off on a
    rank-deficient Phi; it is clipped to zero.
    """
    P = 0.5 * (state.Phi + np.swapaxes(state.Phi, -1, -2))
    Delta = np.maximum(det3(P), 0.0)
    Y = np.einsum("...ij,...j->...i", adjugate3(P), state.q_e)
    k_I = np.asarray(gains.k_I, dtype=float)
    Delta_e = Delta + k_I * (1.0 - state.omega)
    Y_e = Y + _v(k_I) * (state.chi - state.omega[..., None] * state.chi0)
    return DremSignals(Delta, Y, Delta_e, Y_e)


def _derivative(state: SigmaState, phi, q, gains: SigmaGains):
    s = drem_signals(state, gains)
    a1, a2, g1 = _v(gains.alpha), _v(gains.alpha, 2), _v(gains.gamma)
    D, De = s.Delta, s.Delta_e
    d_qe = -a1 * state.q_e + a1 * np.einsum("...ij,...j->...i", phi, q)
    d_Phi = -a2 * state.Phi + a2 * (phi @ np.swapaxes(phi, -1, -2))
    d_chi = D[..., None] * (s.Y - D[..., None] * state.chi)
    d_omega = -(D**2) * state.omega
    d_l = g1 * De[..., None] * (s.Y_e - De[..., None] * state.l_hat)
    return d_qe, d_Phi, d_chi, d_omega, d_l


def _advance(state: SigmaState, d, h) -> SigmaState:
    return replace(
        state,
        q_e=state.q_e + h * d[0],
        Phi=state.Phi + h * d[1],
        chi=state.chi + h * d[2],
        omega=state.omega + h * d[3],
        l_hat=state.l_hat + h * d[4],
    )


def sigma_step(state: SigmaState, sample: RegressorSample, gains: SigmaGains, dt: float,
               integrator: str = "euler") -> SigmaState:
    """One step of the DREM observer with the sample held over [t, t+dt].

    Forward Euler by default (signals from the pre-step state); ``rk4`` is
    available for step-size studies. Invisible samples carry phi = q = 0.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    phi, q = sample.phi, sample.q
    if integrator == "euler":
        return _advance(state, _derivative(state, phi, q, gains), dt)
    if integrator == "rk4":
        k1 = _derivative(state, phi, q, gains)
        k2 = _derivative(_advance(state, k1, dt / 2), phi, q, gains)
        k3 = _derivative(_advance(state, k2, dt / 2), phi, q, gains)
        k4 = _derivative(_advance(state, k3, dt), phi, q, gains)
        d = tuple((a + 2 * b + 2 * c + e) / 6.0 for a, b, c, e in zip(k1, k2, k3, k4))
        return _advance(state, d, dt)
    raise ValueError(f"unknown integrator {integrator!r}")


def gradient_step(l_hat, sample: RegressorSample, gamma) -> np.ndarray:
    """l_hat + phi (q - phi^T l_hat) / (gamma + 1); invisible landmarks are held.

    For projector regressors (symmetric, idempotent, q in their range) this is
    l_hat + (q - phi l_hat) / (gamma + 1). The general form also covers the
    rotated regressors of the inertial-frame estimators.
    """
    l_hat = np.asarray(l_hat, dtype=float)
    res = sample.q - np.einsum("...ji,...j->...i", sample.phi, l_hat)
    new = l_hat + np.einsum("...ij,...j->...i", sample.phi, res) / (_v(gamma) + 1.0)
    return np.where(np.asarray(sample.visible)[..., None], new, l_hat)


def gamma_star(gains: SigmaGains, delta: float, t_c: float):
    """Guaranteed exponential rate under (t0, t_c, delta) interval excitation.

    Returns (rate, tau_star, delta0) with delta0 = (alpha delta e^{-alpha t_c})^3,
    rate = gamma k_I^2 (1 - exp(-delta0^2 / (6 alpha e)))^2 and tau_star = 1/(6 alpha).
    """
    if delta <= 0 or t_c <= 0:
        raise ValueError("delta and t_c must be positive")
    alpha = np.asarray(gains.alpha, dtype=float)
    delta0 = (alpha * delta * np.exp(-alpha * t_c)) ** 3
    rate = np.asarray(gains.gamma) * np.asarray(gains.k_I) ** 2 * (-np.expm1(-(delta0**2) / (6 * alpha * np.e))) ** 2
    return rate, 1.0 / (6.0 * alpha), delta0


def batch_ls_oracle(samples) -> np.ndarray:
    """Solve sum phi phi^T l = sum phi q for one landmark.

    ``samples`` is a sequence of single-landmark RegressorSample or a stacked
    sample with a leading time axis.
    """
    if isinstance(samples, RegressorSample):
        phi, q = np.asarray(samples.phi), np.asarray(samples.q)
        if phi.ndim == 2:
            phi, q = phi[None], q[None]
    else:
        samples = list(samples)
        phi = np.array([s.phi for s in samples]).reshape(-1, 3, 3)
        q = np.array([s.q for s in samples]).reshape(-1, 3)
    A = np.einsum("kij,klj->il", phi, phi)
    b = np.einsum("kij,kj->i", phi, q)
    s = np.linalg.svd(A, compute_uv=False)
    if len(phi) == 0 or s[-1] <= 1e-10 * max(s[0], 1e-300):
        raise SingularNormalMatrix("accumulated regressor has rank < 3")
    return np.linalg.solve(A, b)
