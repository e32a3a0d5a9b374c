"""Discrete H2 norms, Lyapunov functionals and decay-rate diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import to_riemann
from .solver import time_derivative


def _trapezoid(values, xi):
    return float(np.trapezoid(values, xi))


def _h2_density(f, xi):
    d1 = np.gradient(f, xi, edge_order=2)
    d2 = np.gradient(d1, xi, edge_order=2)
    return f**2 + d1**2 + d2**2


def h2_norm(state, profile):
    """Squared discrete H2 norms of the deviations per region, and ``|x_s - x_s*|``.

    Derivatives are taken in the fixed coordinate; the integral carries the
    measure factor of the stretched region.
    """
    if state.n_cells < 4:
        raise ValueError("h2_norm needs at least 4 cells")
    xi, q = state.xi, state.q
    xs_star = profile.x_shock
    free = sum(_trapezoid(_h2_density(q[k], xi), xi) for k in (0, 1))
    cong = sum(_trapezoid(_h2_density(q[k], xi), xi) for k in (2, 3))
    free *= state.x_s / xs_star
    cong *= (profile.length - state.x_s) / xs_star
    return free, cong, abs(state.x_s - xs_star)


def combined_norm(h2_free, h2_cong, shock_dev):
    return (np.sqrt(h2_free + h2_cong) + shock_dev) ** 2


@dataclass(frozen=True)
class LyapunovSample:
    t: float
    V_parts: tuple
    V: float
    h2_free: float
    h2_cong: float
    shock_dev: float
    combined: float


def _weights(mu, char, xi):
    speeds = char.xscale * char.lam
    return np.exp(-mu * xi[None, :] / speeds[:, None])


def eval_V(history, constants, char):
    """Lyapunov sample from the last (state, xdot, dt) entries, or None during warm-up.

    Needs two entries: the time derivative comes from the transport form and
    the second time derivatives from a backward difference over the last step.
    """
    if len(history) < 2:
        return None
    (prev, xdot_prev, _), (state, xdot, dt) = history[-2], history[-1]
    if dt <= 0:
        return None
    profile = char.profile
    xi = state.xi
    mu, C0 = constants.mu, constants.C0
    w = _weights(mu, char, xi)
    p = constants.p
    shift = state.x_s - profile.x_shock

    u = to_riemann(char, state.q)
    ut = to_riemann(char, time_derivative(state, xdot, profile))
    ut_prev = to_riemann(char, time_derivative(prev, xdot_prev, profile))
    utt = (ut - ut_prev) / dt
    xddot = (xdot - xdot_prev) / dt

    def energy(f):
        return _trapezoid(np.sum(p[:, None] * w * f**2, axis=0), xi)

    cross_w = (constants.p_prime / char.lam[:3])[:, None] * w[:3]

    def cross(f, scale):
        return scale * _trapezoid(np.sum(cross_w * f[:3], axis=0), xi) + C0 * scale**2

    parts = (energy(u), energy(ut), energy(utt), cross(u, shift), cross(ut, xdot), cross(utt, xddot))
    hf, hc, dev = h2_norm(state, profile)
    return LyapunovSample(state.t, parts, float(sum(parts)), hf, hc, dev, combined_norm(hf, hc, dev))


class Monitor:
    """Solver observer producing norm (and, with constants, Lyapunov) columns."""

    def __init__(self, char, constants=None):
        self.char = char
        self.constants = constants

    def __call__(self, history, record=None):
        state = history[-1][0]
        hf, hc, dev = h2_norm(state, self.char.profile)
        row = {"h2_free": hf, "h2_cong": hc, "shock_dev": dev, "combined": combined_norm(hf, hc, dev)}
        sample = None if self.constants is None else eval_V(history, self.constants, self.char)
        if sample is not None:
            row["V"] = sample.V
            for k, v in enumerate(sample.V_parts, start=1):
                row[f"V{k}"] = v
        return row


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    margin: float
    tolerance: float
    window: tuple
    n_samples: int
    target_rate: float

    @property
    def dissipation_ok(self):
        return self.margin >= -self.tolerance

    @property
    def rate_ok(self):
        return self.rate >= self.target_rate

    def to_dict(self):
        return {"rate": self.rate, "r_squared": self.r_squared, "margin": self.margin,
                "tolerance": self.tolerance, "window": list(self.window), "n_samples": self.n_samples,
                "target_rate": self.target_rate, "dissipation_ok": self.dissipation_ok,
                "rate_ok": self.rate_ok}


def fit_rate(t, values):
    """Least-squares exponential rate of ``values`` (positive means decay) and R^2."""
    t = np.asarray(t, float)
    y = np.log(np.maximum(np.asarray(values, float), np.finfo(float).tiny))
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return -float(slope), r2


def dissipation_check(t, V, combined, gamma, warmup=0.05, tol_fraction=0.05, rate_factor=0.7):
    """Compare ``dV/dt`` with ``-(gamma/2) V`` and fit the decay rate of the norm.

    The norm is ``sqrt(combined)``, whose predicted rate is ``gamma / 4``.
    Only samples after ``warmup`` (fraction of the horizon) are used.
    """
    t = np.asarray(t, float)
    V = np.asarray(V, float)
    combined = np.asarray(combined, float)
    start = t[0] + warmup * (t[-1] - t[0])
    keep = (t >= start) & np.isfinite(V)
    if np.count_nonzero(keep) < 10:
        raise ValueError("dissipation check needs at least 10 samples after warm-up")
    tw, Vw = t[keep], V[keep]
    dV = np.gradient(Vw, tw)
    margin = float(np.min(-dV - 0.5 * gamma * Vw))
    tol = tol_fraction * float(np.max(Vw))
    rate, r2 = fit_rate(tw, np.sqrt(combined[keep]))
    return DecayFit(rate, r2, margin, tol, (float(tw[0]), float(tw[-1])), int(tw.size),
                    rate_factor * gamma / 4)
