"""Aw-Rascle-Zhang model: pressure laws, eigenstructure, jump relations and
the steady shock profile.

State variables are the density ``rho`` and the generalized momentum
``z = rho * (v + p(rho))``.  The region upstream of the shock is the free
regime (both characteristic speeds positive), the region downstream is the
congested regime (first speed negative, second positive).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateJumpError,
    DomainError,
    InfeasibleEquilibriumError,
    RegimeError,
    SingularConfigurationError,
)

REL_TOL = 1e-9
ABS_TOL = 1e-9

FAMILIES = ("affine", "power")


@dataclass(frozen=True)
class PressureModel:
    """Closed-form traffic pressure.

    ``affine``: p(rho) = a * (rho / rho_m - 1), params ``(a, rho_m)``.
    ``power``:  p(rho) = c * rho**theta, params ``(c, theta)``.
    """

    family: str
    params: tuple
    rho_min: float
    rho_max: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown pressure family {self.family!r}")
        if len(self.params) != 2 or any(v <= 0 for v in self.params):
            raise DomainError(f"pressure parameters must be two positive numbers, got {self.params}")
        if not 0 < self.rho_min < self.rho_max:
            raise DomainError(f"evaluation range must satisfy 0 < rho_min < rho_max, got "
                              f"[{self.rho_min}, {self.rho_max}]")

    @classmethod
    def affine(cls, a, rho_m, rho_min=None, rho_max=None):
        rho_min = 1e-6 * rho_m if rho_min is None else rho_min
        rho_max = rho_m if rho_max is None else rho_max
        return cls("affine", (float(a), float(rho_m)), float(rho_min), float(rho_max))

    @classmethod
    def power_law(cls, c, theta, rho_min=1e-6, rho_max=1e6):
        return cls("power", (float(c), float(theta)), float(rho_min), float(rho_max))

    # Vectorized evaluations; no range checks (used in the solver's inner loop).
    def p(self, rho):
        if self.family == "affine":
            a, rho_m = self.params
            return a * (rho / rho_m - 1.0)
        c, theta = self.params
        return c * np.power(rho, theta)

    def dp(self, rho):
        if self.family == "affine":
            a, rho_m = self.params
            return a / rho_m + 0.0 * rho
        c, theta = self.params
        return c * theta * np.power(rho, theta - 1.0)

    def d2p(self, rho):
        if self.family == "affine":
            return 0.0 * rho
        c, theta = self.params
        return c * theta * (theta - 1.0) * np.power(rho, theta - 2.0)

    def inverse(self, value):
        """Density with pressure ``value`` (p is strictly increasing)."""
        if self.family == "affine":
            a, rho_m = self.params
            return rho_m * (1.0 + value / a)
        c, theta = self.params
        return np.power(value / c, 1.0 / theta)

    @property
    def vanishes_at_zero(self):
        """True when p(0) = 0, as the theory assumes."""
        return self.family == "power"

    def check_assumptions(self, n=1000):
        """Sample the evaluation range and report the structural assumptions.

        Returns a dict with boolean entries ``increasing`` (p' > 0),
        ``convex_flux`` ((rho p)'' > 0) and ``zero_at_origin`` (p(0) = 0).
        The last one is a diagnostic only: the affine law is used in practice
        even though it is negative near rho = 0.
        """
        rho = np.linspace(self.rho_min, self.rho_max, n)
        dp = self.dp(rho)
        flux_curv = 2.0 * dp + rho * self.d2p(rho)
        return {
            "increasing": bool(np.all(dp > 0)),
            "convex_flux": bool(np.all(flux_curv > 0)),
            "zero_at_origin": self.vanishes_at_zero,
        }


def eval_pressure(model, rho):
    """Return ``(p, p', p'')`` at a scalar density inside the evaluation range."""
    rho = float(rho)
    if not (rho > 0 and model.rho_min <= rho <= model.rho_max):
        raise DomainError(f"density {rho!r} outside evaluation range "
                          f"[{model.rho_min}, {model.rho_max}]")
    return float(model.p(rho)), float(model.dp(rho)), float(model.d2p(rho))


def compute_eigenvalues(model, rho, z, regime=None):
    """Characteristic speeds ``(z/rho - p - rho p', z/rho - p)`` of the ARZ system.

    With ``regime="free"`` both speeds must be positive; with
    ``regime="congested"`` the first must be negative and the second positive.
    A violation raises :class:`RegimeError` carrying both speeds.
    """
    if rho <= 0:
        raise DomainError(f"density must be positive, got {rho!r}")
    v = z / rho - model.p(rho)
    first, second = float(v - rho * model.dp(rho)), float(v)
    if regime == "free":
        ok = first > 0 and second > 0
    elif regime == "congested":
        ok = first < 0 < second
    elif regime is None:
        ok = True
    else:
        raise DomainError(f"unknown regime {regime!r}")
    if not ok:
        raise RegimeError(f"speeds ({first:.6g}, {second:.6g}) violate the {regime} sign pattern",
                          speeds=(first, second))
    return first, second


def mass_flux(model, rho, z):
    return z - rho * model.p(rho)


def shock_speed(model, left, right, tol=1e-12):
    """Jump speed from the mass Rankine-Hugoniot relation."""
    (rl, zl), (rr, zr) = left, right
    jump = rr - rl
    if abs(jump) <= tol * max(1.0, abs(rl), abs(rr)):
        raise DegenerateJumpError(f"density jump {jump!r} too small (left={rl}, right={rr})")
    return float((mass_flux(model, rr, zr) - mass_flux(model, rl, zl)) / jump)


class RHResidual(NamedTuple):
    residual: float
    left_denser: bool


def rh_residual(model, left, right):
    """Continuity residual of the invariant z/rho across a jump.

    ``left_denser`` reports the literal density ordering rho_left > rho_right.
    Note that the steady shock used throughout has the opposite ordering
    (free density below congested density).
    """
    (rl, zl), (rr, zr) = left, right
    if rl <= 0 or rr <= 0:
        raise DomainError("densities must be positive")
    return RHResidual(float(zl / rl - zr / rr), bool(rl > rr))


@dataclass(frozen=True)
class EquilibriumShockProfile:
    """Steady shock: free state upstream of ``x_shock``, congested downstream."""

    rho_f: float
    z_f: float
    rho_c: float
    z_c: float
    x_shock: float
    length: float
    pressure: PressureModel

    def state(self, region):
        return (self.rho_f, self.z_f) if region == "free" else (self.rho_c, self.z_c)

    def velocity(self, region):
        rho, z = self.state(region)
        return z / rho - float(self.pressure.p(rho))


@dataclass(frozen=True)
class Check:
    passed: bool
    residual: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: dict
    warnings: tuple = ()

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks.values())

    def failed(self):
        return [name for name, c in self.checks.items() if not c.passed]


def validate_equilibrium(profile):
    """Check every steady-shock invariant and report numeric residuals.

    Never raises; callers decide whether a failed check is acceptable.
    """
    pm = profile.pressure
    rf, zf, rc, zc = profile.rho_f, profile.z_f, profile.rho_c, profile.z_c
    checks = {}

    flux_f, flux_c = float(mass_flux(pm, rf, zf)), float(mass_flux(pm, rc, zc))
    scale = max(abs(flux_f), abs(flux_c), 1.0)
    checks["stationarity"] = Check(abs(flux_f - flux_c) <= REL_TOL * scale, flux_f - flux_c,
                                   f"fluxes {flux_f:.17g} / {flux_c:.17g}")

    cross = zc * rf - zf * rc
    vel_form = zf / rf - zc / rc
    checks["riemann_invariant"] = Check(abs(cross) <= REL_TOL * max(abs(zc * rf), abs(zf * rc), 1.0),
                                        cross, f"z/rho form {vel_form:.17g}")

    checks["density_order"] = Check(rf < rc, rc - rf)

    vf = zf / rf - float(pm.p(rf))
    lam1, lam2 = vf - rf * float(pm.dp(rf)), vf
    checks["free_speeds"] = Check(lam1 > 0 and lam2 > 0, min(lam1, lam2),
                                  f"lambda1={lam1:.17g} lambda2={lam2:.17g}")
    vc = zc / rc - float(pm.p(rc))
    first_c, lam4 = vc - rc * float(pm.dp(rc)), vc
    checks["congested_speeds"] = Check(first_c < 0 < lam4, min(-first_c, lam4),
                                       f"-lambda3={first_c:.17g} lambda4={lam4:.17g}")
    checks["shock_inside"] = Check(0 < profile.x_shock < profile.length,
                                   min(profile.x_shock, profile.length - profile.x_shock))

    notes = ()
    if not pm.vanishes_at_zero:
        notes = ("pressure does not vanish at rho = 0",)
    return ValidationReport(checks, notes)


def fix_equilibrium(model, rho_f, rho_c, x_shock, length):
    """Solve for the momenta making ``(rho_f, rho_c)`` a stationary admissible shock.

    Both the flux match and the continuity of z/rho hold, which gives the
    unique common value w = (rho_c p(rho_c) - rho_f p(rho_f)) / (rho_c - rho_f).
    """
    if not 0 < rho_f < rho_c:
        raise DomainError(f"need 0 < rho_f < rho_c, got rho_f={rho_f}, rho_c={rho_c}")
    if not 0 < x_shock < length:
        raise DomainError(f"need 0 < x_shock < length, got {x_shock}, {length}")
    pf, pc = float(model.p(rho_f)), float(model.p(rho_c))
    w = (rho_c * pc - rho_f * pf) / (rho_c - rho_f)
    profile = EquilibriumShockProfile(rho_f, w * rho_f, rho_c, w * rho_c,
                                      float(x_shock), float(length), model)
    report = validate_equilibrium(profile)
    for name in ("free_speeds", "congested_speeds"):
        if not report.checks[name].passed:
            raise InfeasibleEquilibriumError(f"{name} fail: {report.checks[name].detail}")
    return profile


SIGNS = np.array([1.0, 1.0, -1.0, 1.0])


@dataclass(frozen=True)
class CharacteristicData:
    """Linearized eigenstructure at a steady shock.

    ``lam`` holds the four speeds as positive numbers (the physical first
    congested speed is ``-lam[2]``); ``lam_t`` the shifted speeds that make
    ``(1, lam_t[i])`` the right eigenvectors in ``(rho, z)``.
    ``R``, ``theta`` and ``L`` have three entries (controlled components).
    """

    profile: EquilibriumShockProfile
    lam: np.ndarray
    lam_t: np.ndarray
    s: np.ndarray
    xscale: np.ndarray
    R: np.ndarray
    theta: np.ndarray
    L: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    S1_inv: np.ndarray
    S2_inv: np.ndarray
    transit: np.ndarray = field(repr=False)

    @property
    def jump(self):
        return self.profile.rho_c - self.profile.rho_f


def characteristic_data(profile, allow_invalid=False):
    """Build :class:`CharacteristicData` from each quantity's defining formula."""
    if not allow_invalid:
        report = validate_equilibrium(profile)
        if not report.all_passed:
            raise InfeasibleEquilibriumError(f"profile fails {report.failed()}; "
                                             "pass allow_invalid=True to override")
    pm = profile.pressure
    rf, zf, rc, zc = profile.rho_f, profile.z_f, profile.rho_c, profile.z_c
    xs, length = profile.x_shock, profile.length

    l1, l2 = compute_eigenvalues(pm, rf, zf)
    first_c, l4 = compute_eigenvalues(pm, rc, zc)
    lam = np.array([l1, l2, -first_c, l4])
    rho_i = np.array([rf, rf, rc, rc])
    z_i = np.array([zf, zf, zc, zc])
    lam_t = SIGNS * lam + pm.p(rho_i) + rho_i * pm.dp(rho_i)

    if np.any(lam_t == 0) or lam_t[0] == lam_t[1] or lam_t[2] == -lam_t[3] or lam_t[2] == lam_t[3]:
        raise SingularConfigurationError(f"shifted speeds {lam_t} make S or K1 singular")
    denom = rf - zf / lam_t[3]
    if denom == 0:
        raise SingularConfigurationError("rho_f - z_f / lam_t[3] vanishes")

    # R_i pairs component i with the state on the other side of the shock.
    other_rho = np.array([rc, rc, rf])
    other_z = np.array([zc, zc, zf])
    R = (other_rho - other_z / lam_t[:3]) / denom
    s = SIGNS
    L = (-lam[:3] / lam_t[:3] + s[:3] * lam[3] * R / lam_t[3]) / (rc - rf)

    x3 = xs / (length - xs)
    xscale = np.array([1.0, 1.0, x3, -x3])
    S1_inv = np.array([[1 / lam_t[0], 1 / lam_t[1]], [1.0, 1.0]])
    S2_inv = np.array([[1 / lam_t[2], 1 / lam_t[3]], [1.0, 1.0]])

    # Shock-speed sensitivities by the chain rule through the flux jump, with
    # u4 eliminated by the linearized interface relation u4 = sum(s_i R_i u_i).
    grad_f = np.array([-(pm.p(rf) + rf * pm.dp(rf)), 1.0])
    grad_c = np.array([-(pm.p(rc) + rc * pm.dp(rc)), 1.0])
    d_free = np.array([grad_f @ S1_inv[:, 0], grad_f @ S1_inv[:, 1], 0.0])
    d_cong = grad_c @ S2_inv[:, 1] * s[:3] * R
    d_cong[2] += grad_c @ S2_inv[:, 0]
    theta = (d_cong - d_free) / (rc - rf)
    transit = xs / (xscale[:3] * lam[:3])
    return CharacteristicData(profile, lam, lam_t, s.copy(), xscale, R, theta, L,
                              np.linalg.inv(S1_inv), np.linalg.inv(S2_inv), S1_inv, S2_inv,
                              transit)


def to_riemann(char, deviations):
    """Map ``(rho^f, z^f, rho^c, z^c)`` deviations (shape ``(4, ...)``) to ``u``."""
    d = np.asarray(deviations, dtype=float)
    return np.concatenate([np.tensordot(char.S1, d[:2], axes=1),
                           np.tensordot(char.S2, d[2:], axes=1)])


def from_riemann(char, u):
    u = np.asarray(u, dtype=float)
    return np.concatenate([np.tensordot(char.S1_inv, u[:2], axes=1),
                           np.tensordot(char.S2_inv, u[2:], axes=1)])
