"""Reference scenario: 500 m road, affine pressure, shock steered from 200 m to 120 m."""

from __future__ import annotations

from .model import EquilibriumShockProfile, PressureModel, fix_equilibrium
from .solver import InitialCondition

LENGTH = 500.0
RHO_MAX = 180.0
PRESSURE_GAIN = 24.5
RHO_FREE, RHO_CONG = 60.0, 150.0
Z_FREE, Z_CONG = 220.0, 587.5
X_SHOCK = 120.0
INITIAL = InitialCondition(x_s=200.0, rho_free=65.0, rho_cong=130.0)


def reference_pressure():
    return PressureModel.affine(PRESSURE_GAIN, RHO_MAX)


def reference_profile(kind="consistent"):
    """``"consistent"`` recomputes z so the profile is a true steady shock;
    ``"literal"`` uses the tabulated z values, which violate the jump condition."""
    pm = reference_pressure()
    if kind == "consistent":
        return fix_equilibrium(pm, RHO_FREE, RHO_CONG, X_SHOCK, LENGTH)
    if kind == "literal":
        return EquilibriumShockProfile(RHO_FREE, Z_FREE, RHO_CONG, Z_CONG, X_SHOCK, LENGTH, pm)
    raise ValueError(f"unknown profile kind {kind!r}")
