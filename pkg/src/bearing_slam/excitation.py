"""Excitation certificates (persistent / interval) for regressor streams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyWindow, NoCertificate
from .regressor import RegressorSample, stack_samples

DELTA_MIN = 1e-6


@dataclass(frozen=True)
class ExcitationCertificate:
    kind: str  # "PE", "IE" or "NONE"
    t0: float = 0.0
    t_c: float = 0.0
    delta: float = 0.0
    window_T: float = 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t0": self.t0, "t_c": self.t_c, "delta": self.delta, "window_T": self.window_T}


def _stream(samples):
    if not isinstance(samples, RegressorSample):
        samples = stack_samples(samples)
    t = np.atleast_1d(np.asarray(samples.t, dtype=float))
    phi = np.asarray(samples.phi, dtype=float).reshape(len(t), 3, 3)
    return t, phi


def cumulative_gramian(t, phi) -> np.ndarray:
    """Running trapezoidal integral of phi phi^T, G[k] = int_{t_0}^{t_k}."""
    pp = phi @ np.swapaxes(phi, -1, -2)
    inc = 0.5 * (pp[1:] + pp[:-1]) * np.diff(t)[:, None, None]
    G = np.zeros_like(pp)
    np.cumsum(inc, axis=0, out=G[1:])
    return G


def gramian(samples, t_a: float, t_b: float) -> np.ndarray:
    """Trapezoidal int_{t_a}^{t_b} phi phi^T dt over the sample grid points in [t_a, t_b]."""
    t, phi = _stream(samples)
    sel = (t >= t_a - 1e-12) & (t <= t_b + 1e-12)
    if t_b <= t_a or sel.sum() < 2:
        raise EmptyWindow(f"no samples in [{t_a}, {t_b}]")
    G = cumulative_gramian(t[sel], phi[sel])
    out = G[-1]
    return 0.5 * (out + out.T)


def _min_eig(G):
    return np.linalg.eigvalsh(0.5 * (G + np.swapaxes(G, -1, -2)))[..., 0]


def certify(samples, mode: str = "IE", window_T: float = 2.0, delta_min: float = DELTA_MIN) -> ExcitationCertificate:
    """Certify a single-landmark regressor stream.

    IE: the earliest end time t0 + t_c (t0 = stream start) at which the
    Gramian reaches min-eig >= delta_min; delta is the value reached there.
    PE: every window of length window_T must reach delta_min; delta is the
    infimum over windows.
    """
    t, phi = _stream(samples)
    if len(t) < 2:
        return ExcitationCertificate("NONE")
    G = cumulative_gramian(t, phi)
    if mode == "IE":
        lam = _min_eig(G)
        hit = np.nonzero(lam >= delta_min)[0]
        if len(hit) == 0:
            return ExcitationCertificate("NONE")
        k = hit[0]
        return ExcitationCertificate("IE", float(t[0]), float(t[k] - t[0]), float(lam[k]))
    if mode == "PE":
        dt = t[1] - t[0]
        w = int(round(window_T / dt))
        if w < 1 or w >= len(t):
            return ExcitationCertificate("NONE", window_T=window_T)
        lam = _min_eig(G[w:] - G[:-w])
        inf = float(lam.min())
        if inf < delta_min:
            return ExcitationCertificate("NONE", window_T=window_T, delta=max(inf, 0.0))
        return ExcitationCertificate("PE", float(t[0]), float(window_T), inf, float(window_T))
    raise ValueError(f"unknown mode {mode!r}")


def delta_floor(cert: ExcitationCertificate, alpha: float) -> float:
    """(alpha delta e^{-alpha t_c})^3, the lower bound on Delta at t0 + t_c."""
    if cert.kind == "NONE":
        raise NoCertificate("certificate kind is NONE")
    return float((alpha * cert.delta * np.exp(-alpha * cert.t_c)) ** 3)
