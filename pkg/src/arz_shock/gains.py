"""Feedback gains, decay-rate certificates and Lyapunov constant selection.

Boundary law (linear realization)::

    (rho(t,0) - rho_f*, z(t,0) - z_f*, z(t,L) - z_c*)
        = Gp @ (z(x_s-) - z_f*, z(x_s+) - z_c*, rho(x_s-) - rho_f*, x_s - x_s*)
          - (0, 0, g4p * (rho(t,L) - rho_c*))

In Riemann coordinates this becomes ``v(0) = K v(x_s*) + b (x_s - x_s*) + r u4(0)``
with ``v = (u1, u2, u3)``.  Two conventions exist for the matrices linking
``Gp`` to ``(K, b)``: ``"printed"`` reproduces the published formulas
verbatim, ``"exact"`` is the linearization of the law above and is what the
solver actually applies.  See :func:`realized_map`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import (
    ConstantsInfeasibleError,
    DegenerateCoefficientError,
    DomainError,
    SingularConfigurationError,
    SynthesisError,
)

G4_SLOPES = ("lambda4", "zero_reflection")


def g4_slope_value(char, slope="zero_reflection"):
    """Derivative of the downstream density feedback at zero."""
    if slope == "lambda4":
        return -float(char.lam[3])
    if slope == "zero_reflection":
        return -float(char.lam_t[3])
    raise DomainError(f"unknown g4 slope {slope!r}, expected one of {G4_SLOPES}")


def k1_matrix(char, convention="printed", g4p=None):
    """Map from imposed ``(rho^f(0), z^f(0), G_3)`` to ``(u1, u2, u3)(0)``."""
    lt = char.lam_t
    if lt[1] == lt[0]:
        raise SingularConfigurationError("lam_t[0] == lam_t[1]")
    d = lt[1] - lt[0]
    k1 = np.zeros((3, 3))
    k1[0, :2] = lt[0] * lt[1] / d, -lt[0] / d
    k1[1, :2] = -lt[0] * lt[1] / d, lt[1] / d
    if convention == "printed":
        if lt[2] + lt[3] == 0:
            raise SingularConfigurationError("lam_t[2] + lam_t[3] == 0")
        k1[2, 2] = lt[2] / (lt[2] + lt[3])
    elif convention == "exact":
        g4p = g4_slope_value(char) if g4p is None else g4p
        if lt[2] + g4p == 0:
            raise SingularConfigurationError("downstream boundary law cannot be solved for u3")
        k1[2, 2] = lt[2] / (lt[2] + g4p)
    else:
        raise DomainError(f"unknown convention {convention!r}")
    return k1


def measurement_matrix(char, convention="printed"):
    """Map ``v(x_s*)`` to the measured deviations ``(z^f, z^c, rho^f)`` at the shock.

    Returned as the 4x3 matrix whose last row (shock position) is zero.
    """
    p = char.profile
    lt, R = char.lam_t, char.R
    den = p.rho_f - p.z_f / lt[3]
    m = np.zeros((4, 3))
    m[0] = 1.0, 1.0, 0.0
    if convention == "printed":
        m[1] = ((p.rho_c - p.z_c / lt[0]) / den, (p.rho_c - p.z_c / lt[1]) / den,
                -(p.z_f / lt[2] + p.z_f / lt[3]) / den)
    elif convention == "exact":
        m[1] = R[0], R[1], 1.0 - R[2]
    else:
        raise DomainError(f"unknown convention {convention!r}")
    m[2] = 1.0 / lt[0], 1.0 / lt[1], 0.0
    return m


def reflection_coefficient(char, g4p):
    """Linear gain from the outgoing u4(0) into the imposed u3(0)."""
    lt = char.lam_t
    return -(1.0 + g4p / lt[3]) / (1.0 + g4p / lt[2])


@dataclass(frozen=True)
class FeedbackGains:
    Gp: np.ndarray | None
    g4p: float
    K: np.ndarray
    b: np.ndarray
    K1: np.ndarray
    convention: str = "exact"
    reflection: float = 0.0
    # b[i] = near_i(b_rate) * (1 + b_excess[i]); keeps the position inside
    # intervals narrower than float resolution (large gamma * transit time)
    b_rate: float | None = None
    b_excess: np.ndarray | None = None


def assemble_gains(Gp, char, g4p=None, convention="exact"):
    """Compute ``K = K1 Gp M_R`` and ``b = K1 Gp e4`` for a given ``Gp``."""
    Gp = np.asarray(Gp, dtype=float)
    if Gp.shape != (3, 4):
        raise DomainError(f"Gp must be 3x4, got {Gp.shape}")
    g4p = -float(char.lam[3]) if g4p is None else float(g4p)
    k1 = k1_matrix(char, convention, g4p)
    m = measurement_matrix(char, convention)
    K = k1 @ Gp @ m
    b = k1 @ Gp[:, 3]
    refl = reflection_coefficient(char, g4p) if convention == "exact" else 0.0
    return FeedbackGains(Gp, g4p, K, b, k1, convention, refl)


def realize(K, b, char, g4p, convention="exact"):
    """Solve ``K1 Gp [M_R | e4] = [K | b]`` for ``Gp``; None if singular."""
    k1 = k1_matrix(char, convention, g4p)
    stacked = np.column_stack([measurement_matrix(char, convention), np.eye(4)[:, 3]])
    try:
        return np.linalg.solve(k1, np.column_stack([K, b])) @ np.linalg.inv(stacked)
    except np.linalg.LinAlgError:
        return None


def realized_map(Gp, g4p, char):
    """Linearize the physical boundary law independently of :func:`k1_matrix`.

    Builds the affine map from ``(u1, u2, u3)(x_s*), x_s - x_s*, u4(0)`` to the
    imposed ``(u1, u2, u3)(0)`` by pushing unit vectors through the physical
    relations.  Returns ``(K, b, r)``.
    """
    lt, R = char.lam_t, char.R
    cols = []
    for e in np.eye(5):
        u1, u2, u3, dx, u4_0 = e
        u4_s = R[0] * u1 + R[1] * u2 - R[2] * u3
        meas = np.array([u1 + u2, u3 + u4_s, u1 / lt[0] + u2 / lt[1], dx])
        rho0, z0, g3 = Gp @ meas
        a = np.linalg.solve(char.S1_inv, [rho0, z0])
        # z(L) = g3 - g4p * rho(L); rho(L) = u3/lt3 + u4/lt4, z(L) = u3 + u4
        u3_0 = (g3 - u4_0 - g4p * u4_0 / lt[3]) / (1.0 + g4p / lt[2])
        cols.append([a[0], a[1], u3_0])
    cols = np.array(cols).T
    return cols[:, :3], cols[:, 3], float(cols[2, 4])


class Interval(NamedTuple):
    lower: float
    upper: float

    def contains(self, value):
        return self.lower < value < self.upper

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def empty(self):
        return not self.lower < self.upper


def near_endpoint(gamma, i, char):
    """Endpoint ``-gamma exp(-gamma tau_i) / (3 L_i)`` shared by both interval cases."""
    return float(-gamma * np.exp(-gamma * char.transit[i]) / (3 * char.L[i]))


def relative_width(gamma, i, char):
    """Interval width divided by ``|near_endpoint|``; positive for every gamma > 0."""
    with np.errstate(over="ignore"):
        return float(1.0 / np.expm1(gamma * char.transit[i]))


def b_excess_at(mu, i, gains, char):
    """Relative excess of ``b[i]`` over the near endpoint at rate ``mu``."""
    tau = char.transit[i]
    if gains.b_rate is not None and gains.b_excess is not None:
        g = gains.b_rate
        with np.errstate(over="ignore"):
            return float(np.expm1(np.log(g / mu) + (mu - g) * tau + np.log1p(gains.b_excess[i])))
    return float(gains.b[i] / near_endpoint(mu, i, char) - 1.0)


def b_admissible(mu, i, gains, char, strict_indices=False):
    if strict_indices:
        return b_interval(mu, i, char, True).contains(gains.b[i])
    eta = b_excess_at(mu, i, gains, char)
    return 0.0 < eta < relative_width(mu, i, char)


def b_interval(gamma, i, char, strict_indices=False):
    """Admissible open interval for ``b[i]`` (``i`` zero-based) at rate ``gamma``.

    ``strict_indices=True`` evaluates the published endpoints verbatim, where
    one exponential uses the first component's transit time instead of the
    i-th; the default uses the i-th throughout.
    """
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    Li = char.L[i]
    if Li == 0:
        raise DegenerateCoefficientError(f"coupling coefficient L[{i}] vanishes")
    ei = np.exp(-gamma * char.transit[i])
    e_alt = np.exp(-gamma * char.transit[0]) if strict_indices else ei
    if Li > 0:
        lo = -gamma * ei / (3 * Li * (1 - ei))
        hi = -gamma * e_alt / (3 * Li)
    else:
        lo = -gamma * ei / (3 * Li)
        hi = -gamma * ei / (3 * Li * (1 - e_alt))
    return Interval(float(lo), float(hi))


def _coupling(char):
    """``lambda_i/lam_t_i - s_i lambda_4 R_i / lam_t_4`` for i = 1..3."""
    return char.lam[:3] / char.lam_t[:3] - char.s[:3] * char.lam[3] * char.R / char.lam_t[3]


def d_matrix(x, gamma, b, char):
    w = np.exp(gamma * (char.profile.x_shock - x) / (char.xscale[:3] * char.lam[:3]))
    return np.diag(_coupling(char) / b * w)


def d_tilde(gamma, char):
    tr = char.transit
    spread = np.exp(gamma * (tr[:, None] - tr[None, :])).sum(axis=1)
    return np.diag(spread * _coupling(char) ** 2)


def f_matrix(x, mu, p, char):
    """Boundary weight ``diag(lambda_i p_i x_i exp(-mu x / (x_i lambda_i)))``."""
    lam, xs = char.lam[:3], char.xscale[:3]
    return np.diag(lam * p[:3] * xs * np.exp(-mu * x / (xs * lam)))


def _dtilde_coefficient(gamma, b, char):
    dr = char.jump
    return float(np.sum(2 * b * _coupling(char) * np.expm1(gamma * char.transit)) / (gamma**2 * dr**2))


def decay_matrix(gamma, K, b, char):
    """Symmetrized matrix whose positive definiteness certifies rate ``gamma``."""
    xs = char.profile.x_shock
    M = (d_matrix(xs, gamma, b, char) - K.T @ d_matrix(0.0, gamma, b, char) @ K
         - _dtilde_coefficient(gamma, b, char) * d_tilde(gamma, char))
    return 0.5 * (M + M.T)


def is_positive_definite(M):
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


@dataclass(frozen=True)
class LyapunovConstants:
    mu: float
    C0: float
    p_prime: np.ndarray
    p: np.ndarray  # four weights; p[3] is the u4 weight
    eps: np.ndarray
    p4_max: float
    equivalence: float
    shock_coefficient: float

    def to_dict(self):
        return {"mu": self.mu, "C0": self.C0, "p_prime": self.p_prime.tolist(), "p": self.p.tolist(),
                "eps": self.eps.tolist(), "p4_max": self.p4_max, "equivalence": self.equivalence,
                "shock_coefficient": self.shock_coefficient}


@dataclass(frozen=True)
class GainCertificate:
    gamma: float
    b: np.ndarray
    intervals: list
    M: np.ndarray
    min_eig: float
    D_star: np.ndarray
    D_zero: np.ndarray
    D_tilde: np.ndarray
    verdict: bool
    reasons: list = field(default_factory=list)
    constants: LyapunovConstants | None = None
    constants_error: str | None = None
    min_eig_scaled: float = float("nan")

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "b": self.b.tolist(),
            "intervals": [[iv.lower, iv.upper] for iv in self.intervals],
            "minEig": self.min_eig,
            "minEigScaled": self.min_eig_scaled,
            "verdict": "pass" if self.verdict else "fail",
            "reasons": list(self.reasons),
            "constants": None if self.constants is None else self.constants.to_dict(),
            "constants_error": self.constants_error,
        }


def interval_factors(gamma, gains, char):
    """``beta_i = b_i / near_endpoint_i``; admissible b has ``1 < beta_i < 1/(1 - exp(-gamma tau_i))``."""
    return np.array([1.0 + b_excess_at(gamma, i, gains, char) for i in range(3)])


def scaled_decay_matrix(gamma, K, beta, char):
    """Congruence ``S M S`` of the decay matrix with ``S = diag(exp(-gamma tau_i / 2))``.

    Same definiteness as :func:`decay_matrix`, but every entry is O(1) when
    ``b`` is written as ``beta`` times the near endpoint, so it stays finite
    where ``b`` and ``exp(gamma tau)`` leave the floating-point range.
    """
    tr, L, dr = char.transit, char.L, char.jump
    E = np.exp(-gamma * tr)
    A = 3 * L**2 * dr / (gamma * beta)
    coef = np.sum(2 * beta * -np.expm1(-gamma * tr)) / (3 * gamma * dr)
    tilde = E.sum() * L**2 * dr**2
    K = np.asarray(K, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        K_hat = np.where(K == 0, 0.0, K * np.exp(gamma * (tr[:, None] - tr[None, :] / 2)))
        M = np.diag(A) - K_hat.T @ np.diag(A) @ K_hat - coef * np.diag(tilde)
    return 0.5 * (M + M.T)


def _min_eig(M):
    if not np.all(np.isfinite(M)):
        return float("nan")
    return float(np.linalg.eigvalsh(M)[0])


def stability_matrix(gamma, gains, char, strict_indices=False):
    """Check the interval conditions on ``b`` and positive definiteness of the decay matrix.

    Definiteness is decided on the scaled matrix; ``min_eig`` is reported for
    the unscaled one (NaN when its entries overflow).
    """
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    b = np.asarray(gains.b, dtype=float)
    intervals = [b_interval(gamma, i, char, strict_indices) for i in range(3)]
    reasons = [f"b[{i}]={b[i]:.6g} outside ({iv.lower:.6g}, {iv.upper:.6g})"
               for i, iv in enumerate(intervals) if not b_admissible(gamma, i, gains, char, strict_indices)]
    xs = char.profile.x_shock
    scaled = scaled_decay_matrix(gamma, gains.K, interval_factors(gamma, gains, char), char)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        M = decay_matrix(gamma, gains.K, b, char)
        D_star, D_zero = d_matrix(xs, gamma, b, char), d_matrix(0.0, gamma, b, char)
        D_t = d_tilde(gamma, char)
    min_eig = _min_eig(M)
    if not (np.all(np.isfinite(scaled)) and is_positive_definite(scaled)):
        reasons.append(f"decay matrix not positive definite (min eigenvalue {min_eig:.6g}, "
                       f"scaled {_min_eig(scaled):.6g})")
    return GainCertificate(gamma, b, intervals, M, min_eig, D_star, D_zero, D_t,
                           not reasons, reasons, min_eig_scaled=_min_eig(scaled))


def k_scalars(gamma, b, char):
    """Per-component scalars bounding diagonal gains: ``k_i**2 < exp(-gamma tau_i) K_i``."""
    tr = char.transit
    L = char.L
    spread = np.exp(gamma * (tr[:, None] - tr[None, :])).sum(axis=1)
    total = np.sum(2 * b * L / gamma**2 * np.expm1(gamma * tr))
    return 1.0 - b * L * total * spread


def k_scalars_from_factors(gamma, beta, char):
    """:func:`k_scalars` with ``b = beta * near_endpoint``, in overflow-free form."""
    E = np.exp(-gamma * char.transit)
    return 1.0 - (2.0 / 9.0) * beta * np.sum(beta * -np.expm1(-gamma * char.transit)) * E.sum()


def b_from_fraction(gamma, i, char, fraction):
    """``(b_i, excess)`` at ``fraction`` of the way from the near endpoint,
    where the diagonal gain scalars are guaranteed positive, to the far one."""
    eta = fraction * relative_width(gamma, i, char)
    return near_endpoint(gamma, i, char) * (1.0 + eta), eta


def synthesize_diagonal(gamma, char, strict_indices=False, safety=0.5, g4_slope="zero_reflection",
                        fraction=0.5, max_halvings=30):
    """Diagonal-K design.

    ``b`` starts at ``fraction`` of each admissible interval (0.5 is the
    midpoint); the fraction is halved until all gain scalars are positive.
    Diagonal gains are ``safety`` times their admissible bound.
    """
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    for _ in range(max_halvings):
        b, eta = np.array([b_from_fraction(gamma, i, char, fraction) for i in range(3)]).T
        Ki = k_scalars_from_factors(gamma, 1.0 + eta, char)
        if np.all(Ki > 0):
            break
        fraction *= 0.5
    else:
        raise SynthesisError(f"no admissible b with positive gain scalars at gamma={gamma}")
    k = safety * np.sqrt(np.exp(-gamma * char.transit) * Ki)
    K = np.diag(k)
    g4p = g4_slope_value(char, g4_slope)
    Gp = realize(K, b, char, g4p)
    gains = FeedbackGains(Gp, g4p, K, b, k1_matrix(char, "exact", g4p), "exact",
                          reflection_coefficient(char, g4p), float(gamma), eta)
    cert = stability_matrix(gamma, gains, char, strict_indices)
    if Gp is None:
        cert.reasons.append("boundary gain matrix not realizable")
    return gains, cert


def lyapunov_matrix(mu, gains, char, consts):
    """Boundary quadratic form of the Lyapunov derivative (must be positive definite)."""
    xs, length = char.profile.x_shock, char.profile.length
    K = gains.K
    F_star = f_matrix(xs, mu, consts.p, char)
    F_zero = f_matrix(0.0, mu, consts.p, char)
    coef = np.sum(1.0 / consts.eps) / (2 * char.jump**2)
    M = F_star - K.T @ F_zero @ K - coef * d_tilde(mu, char)
    M = M - np.diag(_u4_penalty(mu, consts.p[3], char))
    return 0.5 * (M + M.T)


def _u4_penalty(mu, p4, char):
    length, xs = char.profile.length, char.profile.x_shock
    x4 = abs(char.xscale[3])
    return 3 * p4 * x4 * char.lam[3] * np.exp(mu * (length - xs) / char.lam[3]) * char.R**2


def _feasible_mu(mu, gains, char, strict_indices):
    if not all(b_admissible(mu, i, gains, char, strict_indices) for i in range(3)):
        return False
    M = scaled_decay_matrix(mu, gains.K, interval_factors(mu, gains, char), char)
    return bool(np.all(np.isfinite(M))) and is_positive_definite(M)


def lyapunov_constants(gamma, gains, char, C0=1.4, strict_indices=False, iterations=40):
    """Select ``mu``, ``p'``, ``p``, ``eps`` and ``p4`` for a certified gain set."""
    if not _feasible_mu(gamma, gains, char, strict_indices):
        raise ConstantsInfeasibleError(f"gains are not certified at gamma={gamma}")
    if _feasible_mu(2 * gamma, gains, char, strict_indices):
        mu = 2 * gamma
    else:
        lo, hi = gamma, 2 * gamma
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if _feasible_mu(mid, gains, char, strict_indices):
                lo = mid
            else:
                hi = mid
        mu = lo
        if mu <= gamma:
            raise ConstantsInfeasibleError("no mu > gamma keeps the b intervals and decay matrix valid")

    tr, lam, xsc = char.transit, char.lam[:3], char.xscale[:3]
    b = gains.b
    p_prime = 2 * C0 * char.theta * np.exp(mu * tr) / xsc
    p = -p_prime / (2 * lam * b)
    if np.any(p <= 0):
        raise ConstantsInfeasibleError(f"weights {p} not positive")
    inv_eps = p_prime**2 * xsc * (-np.expm1(-mu * tr)) / (mu**2 * lam * p)
    equivalence = float(np.max(p_prime**2 * xsc / (mu * lam * p) * (-np.expm1(-mu * tr))))
    shock_coef = float(mu * C0 + 0.5 * np.sum(xsc * b * p_prime))

    def consts_with(p4):
        return LyapunovConstants(mu, C0, p_prime, np.append(p, p4), 1.0 / inv_eps, p4_max,
                                 equivalence, shock_coef)

    p4_max = float("inf")
    base = consts_with(0.0)
    if not is_positive_definite(lyapunov_matrix(mu, gains, char, base)):
        raise ConstantsInfeasibleError("boundary form not positive definite even with p4 = 0")
    if np.any(char.R != 0):
        hi = float(np.min(p))
        while is_positive_definite(lyapunov_matrix(mu, gains, char, consts_with(hi))):
            hi *= 2.0
        lo = 0.0
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if is_positive_definite(lyapunov_matrix(mu, gains, char, consts_with(mid))):
                lo = mid
            else:
                hi = mid
        p4_max = lo
        p4 = 0.5 * p4_max
    else:
        p4 = float(np.min(p))
    consts = consts_with(p4)
    if not equivalence < 2:
        raise ConstantsInfeasibleError(f"equivalence bound {equivalence:.6g} not below 2")
    if not shock_coef < 0:
        raise ConstantsInfeasibleError(f"shock coefficient {shock_coef:.6g} not negative")
    return consts


def certify(gamma, gains, char, strict_indices=False, C0=1.4):
    """Interval and decay-matrix certificate, plus Lyapunov constants when they can be found.

    The verdict depends only on the interval and positive-definiteness
    conditions; failure to construct the auxiliary constants is reported
    in ``constants_error``.
    """
    cert = stability_matrix(gamma, gains, char, strict_indices)
    if not cert.verdict:
        return cert
    try:
        consts = lyapunov_constants(gamma, gains, char, C0, strict_indices)
    except ConstantsInfeasibleError as exc:
        return replace(cert, constants_error=str(exc))
    return replace(cert, constants=consts)
