import numpy as np
import pytest

from arz_shock.errors import DomainError, RegimeViolationError, StateBlowupError
from arz_shock.scenarios import INITIAL
from arz_shock.solver import (
    InitialCondition,
    SimConfig,
    cfl_dt,
    compatibility_check,
    initial_state,
    run,
    shock_cap_dt,
    step,
    time_derivative,
)
from arz_shock.transform import ShockState, quasilinear_speeds, steady_state, uniform_grid


def config(profile, char, gains, **kw):
    kw.setdefault("initial", INITIAL)
    return SimConfig(profile, char, gains=gains, **kw)


def bump_state(profile, char, n_cells, amplitude=3.0):
    xi = uniform_grid(profile, n_cells)
    bump = np.where((xi > 20) & (xi < 80), np.sin(np.pi * (xi - 20) / 60) ** 4, 0.0)
    q = np.zeros((4, n_cells + 1))
    q[0] = amplitude * bump
    q[1] = amplitude * bump * char.lam_t[0]
    return ShockState(xi, q, profile.x_shock)


def test_cfl_dt_at_steady_state(profile, char, gains):
    cfg = config(profile, char, gains, n_cells=200)
    state = steady_state(profile, 200)
    dt = cfl_dt(state, quasilinear_speeds(state, 0.0, profile), cfg)
    fastest = max(char.lam[0], char.lam[1], char.xscale[2] * char.lam[2], -char.xscale[3] * char.lam[3])
    assert dt == pytest.approx(0.9 * (120.0 / 200) / fastest, rel=1e-12)
    fine = config(profile, char, gains, n_cells=400)
    state2 = steady_state(profile, 400)
    assert cfl_dt(state2, quasilinear_speeds(state2, 0.0, profile), fine) == pytest.approx(dt / 2)


def test_quiescent_and_nonfinite_speeds(profile, char, gains):
    cfg = config(profile, char, gains, record_dt=2.5)
    state = steady_state(profile, 200)
    assert cfl_dt(state, np.zeros((4, 201)), cfg) == 2.5
    with pytest.raises(StateBlowupError):
        cfl_dt(state, np.full((4, 201), np.nan), cfg)


def test_shock_cap_near_road_end(profile, char, gains):
    cfg = config(profile, char, gains)
    near = steady_state(profile, 200, x_s=10.0)
    assert shock_cap_dt(near, 5.0, cfg) == pytest.approx(0.1 * 10.0 / 5.0)
    assert shock_cap_dt(near, 0.0, cfg) == np.inf


@pytest.mark.parametrize("mode", ["closed-loop", "open-loop"])
def test_steady_state_is_fixed_point(profile, char, gains, mode):
    cfg = config(profile, char, gains, mode=mode)
    state = steady_state(profile, 200)
    frozen = (profile.rho_f, profile.z_f, profile.velocity("congested"))
    for _ in range(50):
        new, _ = step(state, 0.02, cfg, frozen=frozen)
        assert np.max(np.abs(new.q - state.q)) < 1e-12
        assert abs(new.x_s - state.x_s) < 1e-12
        state = new


def test_config_validation(profile, char, gains):
    with pytest.raises(DomainError):
        config(profile, char, gains, n_cells=8)
    with pytest.raises(DomainError):
        config(profile, char, gains, cfl=1.2)
    with pytest.raises(DomainError):
        config(profile, char, None)
    with pytest.raises(DomainError):
        config(profile, char, gains, mode="manual")
    with pytest.raises(DomainError):
        InitialCondition(200.0, -1.0, 130.0)


def test_initial_condition_rules(profile):
    pm = profile.pressure
    vel = InitialCondition(200.0, 65.0, 130.0).snapshot(profile)
    assert vel.z_free[0] / 65.0 - pm.p(65.0) == pytest.approx(profile.velocity("free"))
    inv = InitialCondition(200.0, 65.0, 130.0, z_rule="steady_invariant").snapshot(profile)
    assert inv.z_cong[0] / 130.0 == pytest.approx(profile.z_c / profile.rho_c)


def test_blowup_and_regime_errors(profile, char, gains):
    cfg = config(profile, char, gains)
    state = steady_state(profile, 200)
    q = state.q.copy()
    q[0, 5] = -2 * profile.rho_f
    with pytest.raises(StateBlowupError):
        step(ShockState(state.xi, q, state.x_s), 0.01, cfg)
    q = state.q.copy()
    q[3, 0] = -profile.z_c - 1000.0  # congested velocity negative at the road end
    with pytest.raises(RegimeViolationError):
        step(ShockState(state.xi, q, state.x_s), 0.01, cfg)


def test_record_grid_and_snapshots(profile, char, gains):
    rec = run(config(profile, char, gains, t_final=5.0, record_dt=0.5, snapshot_dt=2.0))
    assert rec.status == "ok"
    np.testing.assert_allclose(rec.t, np.arange(11) * 0.5, atol=1e-12)
    assert np.all(np.diff(rec.t) > 0)
    assert [s.t for s in rec.snapshots] == pytest.approx([0.0, 2.0, 4.0])
    assert rec.as_arrays()["controls"].shape == (11, 3)


def test_open_loop_shock_moves_upstream(open_loop):
    x_s = np.array(open_loop.x_s)
    assert x_s[10] < x_s[0]
    assert open_loop.status == "regime"


def test_compatibility(profile, char, gains):
    cfg = config(profile, char, gains, initial=steady_state(profile, 200))
    assert compatibility_check(initial_state(cfg), gains, cfg).compatible
    cfg = config(profile, char, gains)
    report = compatibility_check(initial_state(cfg), gains, cfg)
    assert not report.compatible
    assert np.abs(report.zeroth_order).max() > 1


def test_single_step_is_first_order(profile, char, gains):
    ref_state = bump_state(profile, char, 3200)
    ref_rate = time_derivative(ref_state, 0.0, profile)
    errors = []
    for n in (100, 200, 400):
        state = bump_state(profile, char, n)
        cfg = config(profile, char, gains, n_cells=n, initial=state)
        dt = 1e-4
        new, _ = step(state, dt, cfg)
        rate = (new.q - state.q) / dt
        stride = 3200 // n
        errors.append(np.max(np.abs(rate[:2, 1:-1] - ref_rate[:2, ::stride][:, 1:-1])))
    assert errors[0] / errors[1] > 1.7 and errors[1] / errors[2] > 1.7


def test_smooth_data_converges_at_first_order(profile, char, gains):
    paths = {}
    for n in (200, 400, 800):
        cfg = config(profile, char, gains, n_cells=n, t_final=60.0, initial=bump_state(profile, char, n))
        rec = run(cfg)
        assert rec.status == "ok"
        paths[n] = np.array(rec.x_s)
    d1 = np.abs(paths[200] - paths[400]).max()
    d2 = np.abs(paths[400] - paths[800]).max()
    assert d1 / d2 >= 1.7
