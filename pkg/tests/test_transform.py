import numpy as np
import pytest
from conftest import profiles
from hypothesis import given
from hypothesis import strategies as st

from arz_shock.errors import DegenerateShockError, DomainError, StateBlowupError
from arz_shock.model import characteristic_data, from_riemann
from arz_shock.transform import (
    PhysicalSnapshot,
    ShockState,
    from_fixed_domain,
    interface_residual,
    quasilinear_speeds,
    rh_closure_u4,
    shock_ode_rhs,
    shock_rate,
    steady_state,
    to_fixed_domain,
)


def interface_state(char, u123, n_cells=16):
    u = np.append(u123, rh_closure_u4(u123, char))
    state = steady_state(char.profile, n_cells)
    q = state.q.copy()
    q[:, -1] = from_riemann(char, u)
    return ShockState(state.xi, q, state.x_s)


def test_steady_state_is_stationary(profile):
    state = steady_state(profile, 32)
    assert shock_ode_rhs(state, profile) == pytest.approx(0.0, abs=1e-12)
    assert interface_residual(profile, state.interface()) == pytest.approx(0.0, abs=1e-15)


def test_round_trip_through_physical_coordinates(profile):
    rng = np.random.default_rng(3)
    state = ShockState(steady_state(profile, 40).xi, rng.normal(size=(4, 41)), 170.0, 2.0)
    back = to_fixed_domain(from_fixed_domain(state, profile), profile, 40)
    np.testing.assert_allclose(back.q, state.q, atol=1e-12)
    assert back.x_s == 170.0 and back.t == 2.0


def test_physical_snapshot_covers_road(profile):
    snap = from_fixed_domain(steady_state(profile, 20, x_s=150.0), profile)
    assert snap.x_free[0] == 0.0 and snap.x_free[-1] == pytest.approx(150.0)
    assert snap.x_cong[0] == pytest.approx(150.0) and snap.x_cong[-1] == pytest.approx(500.0)
    np.testing.assert_allclose(snap.rho_cong, profile.rho_c)


def test_to_fixed_domain_validation(profile):
    x = np.array([0.0, 50.0, 100.0])
    ones = np.ones(3)
    good = PhysicalSnapshot(x, ones, ones, np.array([100.0, 300.0, 500.0]), ones, ones, 100.0)
    to_fixed_domain(good, profile, 16)
    with pytest.raises(DomainError):
        to_fixed_domain(PhysicalSnapshot(x[::-1], ones, ones, good.x_cong, ones, ones, 100.0),
                        profile, 16)
    with pytest.raises(DomainError):
        to_fixed_domain(PhysicalSnapshot(x, ones, ones, good.x_cong, ones, ones, 600.0), profile, 16)
    with pytest.raises(DomainError):
        to_fixed_domain(PhysicalSnapshot(x, ones, ones, good.x_cong[:2] * 0.5, ones[:2], ones[:2],
                                         100.0), profile, 16)


def test_collapsing_jump_is_rejected(profile):
    traces = np.array([0.0, 0.0, -85.0, 0.0])
    with pytest.raises(DegenerateShockError):
        shock_rate(profile, traces)


@given(profiles(), st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3))
def test_closure_restores_invariant_continuity(profile, u123):
    char = characteristic_data(profile)
    scale = 0.02 * profile.rho_f * np.abs(char.lam_t[:3])
    state = interface_state(char, np.array(u123) * scale)
    assert abs(interface_residual(profile, state.interface())) <= 1e-12 * (1 + abs(profile.z_f / profile.rho_f))


@given(profiles())
def test_shock_rate_jacobian_matches_theta(profile):
    char = characteristic_data(profile)
    for i in range(3):
        h = 1e-6 * char.jump * abs(char.lam_t[i])
        e = np.zeros(3)
        e[i] = h
        fd = (shock_ode_rhs(interface_state(char, e), profile)
              - shock_ode_rhs(interface_state(char, -e), profile)) / (2 * h)
        assert fd == pytest.approx(char.theta[i], rel=1e-6, abs=1e-12)


def test_speeds_at_steady_state(profile, char):
    speeds = quasilinear_speeds(steady_state(profile, 8), 0.0, profile)
    expected = char.xscale * char.lam
    np.testing.assert_allclose(speeds, np.repeat(expected[:, None], 9, axis=1), rtol=1e-12)


def test_speeds_reject_nonpositive_density(profile):
    state = steady_state(profile, 8)
    q = state.q.copy()
    q[0, 3] = -profile.rho_f
    with pytest.raises(StateBlowupError):
        quasilinear_speeds(ShockState(state.xi, q, state.x_s), 0.0, profile)
