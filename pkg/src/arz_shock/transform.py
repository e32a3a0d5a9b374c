"""Fixed-domain description of the shocked solution.

The free region [0, x_s] and the congested region [x_s, L] are both
stretched onto [0, x_s*].  The congested region is parametrized backwards:
fixed coordinate 0 is the road end x = L and x_s* is the shock.  Fields are
stored as deviations from the steady shock, in the order
``(rho^f, z^f, rho^c, z^c)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClosureError, DegenerateShockError, DomainError, StateBlowupError

SHOCK_COLLAPSE_FRACTION = 0.1


@dataclass(frozen=True)
class ShockState:
    xi: np.ndarray
    q: np.ndarray
    x_s: float
    t: float = 0.0

    @property
    def n_cells(self):
        return self.xi.size - 1

    @property
    def rho_f(self):
        return self.q[0]

    @property
    def z_f(self):
        return self.q[1]

    @property
    def rho_c(self):
        return self.q[2]

    @property
    def z_c(self):
        return self.q[3]

    def interface(self):
        """Deviation traces at the shock, ``(rho^f, z^f, rho^c, z^c)``."""
        return self.q[:, -1].copy()


def uniform_grid(profile, n_cells):
    return np.linspace(0.0, profile.x_shock, n_cells + 1)


def steady_state(profile, n_cells, x_s=None, t=0.0):
    x_s = profile.x_shock if x_s is None else x_s
    return ShockState(uniform_grid(profile, n_cells), np.zeros((4, n_cells + 1)), float(x_s), t)


def totals(state, profile):
    """Physical ``(rho_f, z_f, rho_c, z_c)`` node values."""
    base = np.array([profile.rho_f, profile.z_f, profile.rho_c, profile.z_c])[:, None]
    return state.q + base


@dataclass(frozen=True)
class PhysicalSnapshot:
    """Samples of ``(rho, z)`` on each side of the shock, abscissae increasing."""

    x_free: np.ndarray
    rho_free: np.ndarray
    z_free: np.ndarray
    x_cong: np.ndarray
    rho_cong: np.ndarray
    z_cong: np.ndarray
    x_s: float
    t: float = 0.0


def _check_axis(x, name):
    if x.size < 2:
        raise DomainError(f"{name} region needs at least 2 samples")
    if np.any(np.diff(x) <= 0):
        raise DomainError(f"{name} abscissae are not strictly increasing")


def to_fixed_domain(snapshot, profile, n_cells):
    """Resample a physical snapshot onto the uniform fixed grid (deviations)."""
    xs, length, xs_star = snapshot.x_s, profile.length, profile.x_shock
    if not 0 < xs < length:
        raise DomainError(f"shock position {xs} outside (0, {length})")
    xf, xc = np.asarray(snapshot.x_free, float), np.asarray(snapshot.x_cong, float)
    _check_axis(xf, "free")
    _check_axis(xc, "congested")
    span = 1e-9 * length
    if xf[0] > span or abs(xf[-1] - xs) > span or abs(xc[0] - xs) > span or abs(xc[-1] - length) > span:
        raise DomainError("snapshot regions must cover [0, x_s] and [x_s, L]")

    xi = uniform_grid(profile, n_cells)
    x_phys_f = xi * xs / xs_star
    x_phys_c = length + xi * (xs - length) / xs_star
    q = np.empty((4, xi.size))
    q[0] = np.interp(x_phys_f, xf, snapshot.rho_free) - profile.rho_f
    q[1] = np.interp(x_phys_f, xf, snapshot.z_free) - profile.z_f
    q[2] = np.interp(x_phys_c, xc, snapshot.rho_cong) - profile.rho_c
    q[3] = np.interp(x_phys_c, xc, snapshot.z_cong) - profile.z_c
    return ShockState(xi, q, float(xs), snapshot.t)


def from_fixed_domain(state, profile):
    xs, length, xs_star = state.x_s, profile.length, profile.x_shock
    tot = totals(state, profile)
    x_free = state.xi * xs / xs_star
    x_cong = (length + state.xi * (xs - length) / xs_star)[::-1]
    return PhysicalSnapshot(x_free, tot[0].copy(), tot[1].copy(),
                            x_cong, tot[2, ::-1].copy(), tot[3, ::-1].copy(), xs, state.t)


def shock_rate(profile, traces):
    """Shock speed from deviation traces ``(rho^f, z^f, rho^c, z^c)`` at the interface."""
    pm = profile.pressure
    rf = traces[0] + profile.rho_f
    zf = traces[1] + profile.z_f
    rc = traces[2] + profile.rho_c
    zc = traces[3] + profile.z_c
    denom = rc - rf
    if abs(denom) < SHOCK_COLLAPSE_FRACTION * (profile.rho_c - profile.rho_f):
        raise DegenerateShockError(f"shock density jump {denom:.6g} below collapse threshold")
    return float((zc - zf - rc * pm.p(rc) + rf * pm.p(rf)) / denom)


def shock_ode_rhs(state, profile):
    """Shock speed evaluated from the interface node of both regions."""
    return shock_rate(profile, state.q[:, -1])


def interface_residual(profile, traces):
    """Mismatch of z/rho across the shock for deviation traces."""
    rf = traces[0] + profile.rho_f
    zf = traces[1] + profile.z_f
    rc = traces[2] + profile.rho_c
    zc = traces[3] + profile.z_c
    return zc / rc - zf / rf


def rh_closure_u4(u123, char, tol=1e-12, max_iter=50):
    """Solve the nonlinear interface condition for the incoming component u4.

    Newton iteration started from the linearized relation u4 = sum(s_i R_i u_i);
    ``tol`` is relative to the magnitude of the invariant z/rho.
    """
    profile = char.profile
    u1, u2, u3 = (float(v) for v in u123)
    rho_f = profile.rho_f + u1 / char.lam_t[0] + u2 / char.lam_t[1]
    z_f = profile.z_f + u1 + u2
    if rho_f <= 0:
        raise ClosureError(f"free trace density {rho_f} not positive")
    target = z_f / rho_f

    u4 = float(np.dot(char.s[:3] * char.R, (u1, u2, u3)))
    history = []
    for _ in range(max_iter):
        rho_c = profile.rho_c + u3 / char.lam_t[2] + u4 / char.lam_t[3]
        z_c = profile.z_c + u3 + u4
        res = z_c / rho_c - target
        history.append(res)
        slope = (rho_c - z_c / char.lam_t[3]) / rho_c**2
        if slope == 0 or not np.isfinite(slope):
            break
        if abs(res) <= tol * max(1.0, abs(target)):
            # one more Newton step polishes to rounding level
            return u4 - res / slope
        u4 -= res / slope
    raise ClosureError(f"interface closure did not converge, last residual {history[-1]:.3e}", history)


def quasilinear_speeds(state, xdot, profile):
    """Per-node transport speeds of the four fixed-domain equations.

    Rows: the two free speeds, then the congested first-family speed
    (positive: it travels from the road end towards the shock) and the
    congested second-family speed (negative).
    """
    pm = profile.pressure
    tot = totals(state, profile)
    if np.any(tot[0] <= 0) or np.any(tot[2] <= 0):
        raise StateBlowupError("nonpositive density in state", state)
    xs_star, xs, length = profile.x_shock, state.x_s, profile.length
    frame = state.xi * xdot / xs_star

    v_f = tot[1] / tot[0] - pm.p(tot[0])
    v_c = tot[3] / tot[2] - pm.p(tot[2])
    stretch_f = xs_star / xs
    stretch_c = xs_star / (length - xs)
    return np.array([
        stretch_f * (v_f - tot[0] * pm.dp(tot[0]) - frame),
        stretch_f * (v_f - frame),
        -stretch_c * (v_c - tot[2] * pm.dp(tot[2]) - frame),
        -stretch_c * (v_c - frame),
    ])
