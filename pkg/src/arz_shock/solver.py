"""Explicit time integration of the fixed-domain system coupled to the shock ODE.

Scheme: first-order upwind on the characteristic decomposition of each
node's 2x2 transport matrix (Courant-Isaacson-Rees), explicit Euler in time.
Boundary nodes only receive the update of their outgoing characteristic;
incoming information comes from the boundary law (road ends) or the
interface closure (shock).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ARZError, DomainError, RegimeViolationError, StateBlowupError
from .model import to_riemann
from .transform import (
    PhysicalSnapshot,
    ShockState,
    interface_residual,
    quasilinear_speeds,
    rh_closure_u4,
    shock_rate,
    to_fixed_domain,
    totals,
    uniform_grid,
)

MODES = ("closed-loop", "open-loop")


Z_RULES = ("steady_velocity", "steady_invariant")


@dataclass(frozen=True)
class InitialCondition:
    """Piecewise-constant densities with a shock at ``x_s``.

    ``z_rule`` fills ``z`` per region: ``"steady_velocity"`` gives the
    region's steady velocity, ``z = rho (v* + p(rho))``; ``"steady_invariant"``
    keeps the steady ratio, ``z = rho z*/rho*``.  Explicit ``z_free`` and
    ``z_cong`` override the rule.
    """

    x_s: float
    rho_free: float
    rho_cong: float
    z_free: float | None = None
    z_cong: float | None = None
    z_rule: str = "steady_velocity"

    def __post_init__(self):
        if self.z_rule not in Z_RULES:
            raise DomainError(f"z_rule must be one of {Z_RULES}, got {self.z_rule!r}")
        if self.rho_free <= 0 or self.rho_cong <= 0:
            raise DomainError("initial densities must be positive")

    def _z(self, profile, region, rho):
        if self.z_rule == "steady_invariant":
            rho_s, z_s = profile.state(region)
            return rho * z_s / rho_s
        return rho * (profile.velocity(region) + float(profile.pressure.p(rho)))

    def snapshot(self, profile, samples=3):
        zf = self._z(profile, "free", self.rho_free) if self.z_free is None else self.z_free
        zc = self._z(profile, "congested", self.rho_cong) if self.z_cong is None else self.z_cong
        one = np.ones(samples)
        return PhysicalSnapshot(np.linspace(0, self.x_s, samples), self.rho_free * one, zf * one,
                                np.linspace(self.x_s, profile.length, samples), self.rho_cong * one,
                                zc * one, self.x_s)


@dataclass(frozen=True)
class SimConfig:
    profile: object
    char: object
    initial: object  # InitialCondition, PhysicalSnapshot or ShockState
    n_cells: int = 200
    cfl: float = 0.9
    t_final: float = 600.0
    mode: str = "closed-loop"
    gains: object = None
    record_dt: float = 1.0
    snapshot_dt: float | None = None
    shock_cap: float = 0.1
    min_gap: float = 0.01

    def __post_init__(self):
        if self.n_cells < 16:
            raise DomainError(f"n_cells must be at least 16, got {self.n_cells}")
        if not 0 < self.cfl < 1:
            raise DomainError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.t_final < 0:
            raise DomainError(f"t_final must be nonnegative, got {self.t_final}")
        if self.record_dt <= 0:
            raise DomainError("record_dt must be positive")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "closed-loop" and (self.gains is None or self.gains.Gp is None):
            raise DomainError("closed-loop mode needs gains with a realized Gp")

    @property
    def dxi(self):
        return self.profile.x_shock / self.n_cells


@dataclass
class TrajectoryRecord:
    t: list = field(default_factory=list)
    x_s: list = field(default_factory=list)
    xdot: list = field(default_factory=list)
    controls: list = field(default_factory=list)  # (rho(0), z(0), z(L)) physical
    rh_residual: list = field(default_factory=list)
    extras: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    max_rh_residual: float = 0.0
    steps: int = 0
    status: str = "ok"
    error: str | None = None
    final_state: ShockState | None = None

    def as_arrays(self):
        return {"t": np.array(self.t), "x_s": np.array(self.x_s), "xdot": np.array(self.xdot),
                "controls": np.array(self.controls).reshape(-1, 3),
                "rh_residual": np.array(self.rh_residual)}


def initial_state(config):
    init = config.initial
    if isinstance(init, ShockState):
        return init
    if isinstance(init, InitialCondition):
        init = init.snapshot(config.profile)
    return to_fixed_domain(init, config.profile, config.n_cells)


def cfl_dt(state, speeds, config):
    top = float(np.max(np.abs(speeds)))
    if not np.isfinite(top):
        raise StateBlowupError("non-finite characteristic speed", state)
    if top == 0:
        return config.record_dt
    return config.cfl * config.dxi / top


def shock_cap_dt(state, xdot, config):
    room = config.shock_cap * min(state.x_s, config.profile.length - state.x_s)
    return np.inf if xdot == 0 else room / abs(xdot)


def _eigensystems(tot, pm):
    """Right eigenvectors ``(1, a_k)`` of the (rho, z) transport matrix per node."""
    rho, z = tot
    w = z / rho
    return w, w + rho * pm.dp(rho)


def _upwind_increment(q, tot, speeds, pm, dxi):
    """``-dt`` times this is the CIR upwind change of a 2-field region (shape (2, N+1))."""
    a1, a2 = _eigensystems(tot, pm)
    det = a2 - a1
    back = np.zeros_like(q)
    fwd = np.zeros_like(q)
    back[:, 1:] = np.diff(q, axis=1)
    fwd[:, :-1] = np.diff(q, axis=1)

    def components(d):
        # solve [[1, 1], [a1, a2]] @ alpha = d
        return (a2 * d[0] - d[1]) / det, (d[1] - a1 * d[0]) / det

    b1, b2 = components(back)
    f1, f2 = components(fwd)
    c1 = np.maximum(speeds[0], 0) * b1 + np.minimum(speeds[0], 0) * f1
    c2 = np.maximum(speeds[1], 0) * b2 + np.minimum(speeds[1], 0) * f2
    return np.array([c1 + c2, a1 * c1 + a2 * c2]) / dxi


def time_derivative(state, xdot, profile):
    """``q_t`` from the transport form with centered spatial differences."""
    pm = profile.pressure
    tot = totals(state, profile)
    speeds = quasilinear_speeds(state, xdot, profile)
    out = np.empty_like(state.q)
    for block, sp in ((slice(0, 2), speeds[:2]), (slice(2, 4), speeds[2:])):
        a1, a2 = _eigensystems(tot[block], pm)
        dq = np.gradient(state.q[block], state.xi, axis=1)
        det = a2 - a1
        al1 = (a2 * dq[0] - dq[1]) / det
        al2 = (dq[1] - a1 * dq[0]) / det
        c1, c2 = sp[0] * al1, sp[1] * al2
        out[block] = -np.array([c1 + c2, a1 * c1 + a2 * c2])
    return out


def _check_regime(state, speeds):
    expected = np.array([1, 1, 1, -1])
    for node in (0, -1):
        bad = np.sign(speeds[:, node]) != expected
        if np.any(bad):
            raise RegimeViolationError(
                f"characteristic reversal at node {node}: speeds {speeds[:, node]}", state)


def measurements(state):
    """Deviations ``(z^f(x_s-), z^c(x_s+), rho^f(x_s-), x_s - x_s*)`` without the shift."""
    return np.array([state.q[1, -1], state.q[3, -1], state.q[0, -1]])


def apply_boundary_control(state, gains, profile, w_end=None):
    """Physical boundary values ``(rho(0), z(0), z(L))`` from the linear feedback law.

    ``w_end`` is the outgoing invariant ``z/rho`` at the road end; when given,
    ``rho(L)`` is solved from it so the law holds exactly.  Otherwise the
    stored ``rho(L)`` is used.
    """
    meas = np.append(measurements(state), state.x_s - profile.x_shock)
    drho0, dz0, g3 = gains.Gp @ meas
    if w_end is None:
        zL = profile.z_c + g3 - gains.g4p * state.q[2, 0]
    else:
        zL = road_end_state(w_end, profile.z_c + g3 + gains.g4p * profile.rho_c, gains.g4p)[1]
    return (profile.rho_f + drho0, profile.z_f + dz0, zL)


def road_end_state(w_end, a, g):
    """``(rho, z)`` with ``z = w_end rho`` and ``z = a - g rho``."""
    den = w_end + g
    if den == 0:
        raise StateBlowupError("road-end boundary law cannot be solved for the density")
    rho = a / den
    return rho, a - g * rho


def step(state, dt, config, xdot=None, frozen=None):
    """Advance one explicit step; returns ``(new_state, controls)``.

    ``frozen`` holds the open-loop data ``(rho(0), z(0), v(L))``; ``controls``
    returned are the applied physical ``(rho(0), z(0), z(L))``.
    """
    profile, char = config.profile, config.char
    pm = profile.pressure
    if xdot is None:
        xdot = shock_rate(profile, state.q[:, -1])
    speeds = quasilinear_speeds(state, xdot, profile)
    _check_regime(state, speeds)
    tot = totals(state, profile)

    q = state.q.copy()
    q[:2] -= dt * _upwind_increment(state.q[:2], tot[:2], speeds[:2], pm, config.dxi)
    q[2:] -= dt * _upwind_increment(state.q[2:], tot[2:], speeds[2:], pm, config.dxi)
    x_new = state.x_s + dt * xdot
    if min(x_new, profile.length - x_new) < config.min_gap * profile.length:
        raise RegimeViolationError(f"shock reached a road end: x_s = {x_new:.6g}", state)

    # interface: keep free traces and outgoing u3, close u4 by the jump condition
    u = to_riemann(char, q[:, -1])
    u[3] = rh_closure_u4(u[:3], char)
    q[2:, -1] = char.S2_inv @ u[2:]

    new = ShockState(state.xi, q, x_new, state.t + dt)
    w_end = (profile.z_c + q[3, 0]) / (profile.rho_c + q[2, 0])
    if config.mode == "closed-loop":
        controls = apply_boundary_control(new, config.gains, profile, w_end)
        rho_end = controls[2] / w_end
    else:
        # frozen inflow data and frozen incoming invariant v(L)
        rho_end = float(pm.inverse(w_end - frozen[2]))
        if not rho_end > 0:
            raise StateBlowupError("open-loop road-end density not positive", state)
        controls = (frozen[0], frozen[1], w_end * rho_end)
    q[0, 0] = controls[0] - profile.rho_f
    q[1, 0] = controls[1] - profile.z_f
    q[2, 0], q[3, 0] = rho_end - profile.rho_c, controls[2] - profile.z_c

    if np.any(~np.isfinite(q)):
        raise StateBlowupError("non-finite values after step", state)
    rho = totals(new, profile)
    if np.any(rho[0] <= 0) or np.any(rho[2] <= 0):
        raise StateBlowupError("density became nonpositive", state)
    return new, controls


def boundary_values(state, profile):
    """Current physical ``(rho(0), z(0), z(L))``."""
    tot = totals(state, profile)
    return (float(tot[0, 0]), float(tot[1, 0]), float(tot[3, 0]))


def open_loop_data(state, profile):
    """Held open-loop data ``(rho(0), z(0), v(L))``."""
    tot = totals(state, profile)
    v_end = tot[3, 0] / tot[2, 0] - float(profile.pressure.p(tot[2, 0]))
    return (float(tot[0, 0]), float(tot[1, 0]), float(v_end))


def run(config, observer=None, max_steps=10_000_000):
    """Integrate to ``t_final``; records land exactly on multiples of ``record_dt``.

    ``observer(history, record)`` is called at each record time with the last
    (up to three) ``(state, xdot, dt)`` entries and returns a dict stored in
    ``record.extras``.
    """
    profile = config.profile
    state = initial_state(config)
    frozen = open_loop_data(state, profile)
    rec = TrajectoryRecord()
    history = deque(maxlen=3)

    def log(state, xdot, controls, dt):
        history.append((state, xdot, dt))
        rec.t.append(state.t)
        rec.x_s.append(state.x_s)
        rec.xdot.append(xdot)
        rec.controls.append(tuple(float(c) for c in controls))
        res = float(interface_residual(profile, state.q[:, -1]))
        rec.rh_residual.append(res)
        if observer is not None:
            rec.extras.append(observer(list(history), rec))

    next_record = config.record_dt
    next_snap = 0.0 if config.snapshot_dt else None
    try:
        xdot = shock_rate(profile, state.q[:, -1])
        log(state, xdot, boundary_values(state, profile), 0.0)
        if next_snap is not None:
            rec.snapshots.append(state)
            next_snap += config.snapshot_dt
        while state.t < config.t_final - 1e-12 * max(1.0, config.t_final):
            if rec.steps >= max_steps:
                raise StateBlowupError("step budget exhausted", state)
            speeds = quasilinear_speeds(state, xdot, profile)
            dt = min(cfl_dt(state, speeds, config), shock_cap_dt(state, xdot, config))
            target = min(next_record, config.t_final)
            landing = state.t + dt >= target - 1e-12 * max(1.0, target)
            if landing:
                dt = target - state.t
            state, controls = step(state, dt, config, xdot, frozen)
            rec.steps += 1
            if landing:
                # pin the clock to the record grid to avoid drift
                state = ShockState(state.xi, state.q, state.x_s, float(target))
            xdot = shock_rate(profile, state.q[:, -1])
            res = abs(float(interface_residual(profile, state.q[:, -1])))
            rec.max_rh_residual = max(rec.max_rh_residual, res)
            if landing:
                log(state, xdot, controls, dt)
                next_record = round(target / config.record_dt + 1) * config.record_dt
                if next_snap is not None and state.t >= next_snap - 1e-9:
                    rec.snapshots.append(state)
                    next_snap += config.snapshot_dt
            else:
                history.append((state, xdot, dt))
    except StateBlowupError as exc:
        rec.status, rec.error = "blowup", str(exc)
    except RegimeViolationError as exc:
        rec.status, rec.error = "regime", str(exc)
    except ARZError as exc:
        rec.status, rec.error = type(exc).__name__, str(exc)
    rec.final_state = state
    return rec


@dataclass(frozen=True)
class CompatibilityReport:
    zeroth_order: np.ndarray
    first_order: np.ndarray

    @property
    def compatible(self):
        return bool(np.all(np.abs(self.zeroth_order) < 1e-9) and np.all(np.abs(self.first_order) < 1e-9))


def compatibility_check(state, gains, config):
    """Mismatch between the boundary law and the initial boundary traces.

    Zeroth order compares imposed and stored ``(rho(0), z(0), z(L))``.
    First order compares their time derivatives: the stored ones from the
    transport equations, the imposed ones by differentiating the linear law
    along the same transport equations.
    """
    profile = config.profile
    xdot = shock_rate(profile, state.q[:, -1])
    imposed = np.array(apply_boundary_control(state, gains, profile))
    stored = np.array(boundary_values(state, profile))
    qt = time_derivative(state, xdot, profile)
    stored_rate = np.array([qt[0, 0], qt[1, 0], qt[3, 0]])
    meas_rate = np.array([qt[1, -1], qt[3, -1], qt[0, -1], xdot])
    law_rate = gains.Gp @ meas_rate
    law_rate[2] -= gains.g4p * qt[2, 0]
    return CompatibilityReport(imposed - stored, law_rate - stored_rate)


__all__ = [
    "InitialCondition", "SimConfig", "TrajectoryRecord", "cfl_dt", "step", "run",
    "apply_boundary_control", "compatibility_check", "time_derivative", "uniform_grid",
]
