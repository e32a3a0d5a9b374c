"""INI run configuration: schema, parsing, presets and a stable hash."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, replace
from importlib import resources

from .errors import ConfigError
from .model import EquilibriumShockProfile, PressureModel, fix_equilibrium
from .solver import MODES, Z_RULES, InitialCondition

PRESETS = ("section5",)


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(options):
    def parse(text):
        text = text.strip()
        if text not in options:
            raise ValueError(f"expected one of {options}, got {text!r}")
        return text
    parse.__name__ = "one of " + "|".join(options)
    return parse


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise ValueError(f"must be positive, got {value}")
    return value


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise ValueError(f"must be a positive integer, got {value}")
    return value


# section -> key -> (parser, default); a default of ... marks a required key
SCHEMA = {
    "scenario": {"name": (str, "custom")},
    "road": {"length_m": (_positive_float, ...)},
    "pressure": {
        "family": (_choice(("affine", "power")), ...),
        "gain_m_per_s": (_positive_float, None),
        "rho_max_veh_per_km": (_positive_float, None),
        "coefficient": (_positive_float, None),
        "exponent": (_positive_float, None),
    },
    "equilibrium": {
        "rho_free_veh_per_km": (_positive_float, ...),
        "rho_cong_veh_per_km": (_positive_float, ...),
        "x_shock_m": (_positive_float, ...),
        "z_free_veh_m_per_km_s": (float, None),
        "z_cong_veh_m_per_km_s": (float, None),
    },
    "initial": {
        "x_shock_m": (_positive_float, ...),
        "rho_free_veh_per_km": (_positive_float, ...),
        "rho_cong_veh_per_km": (_positive_float, ...),
        "z_rule": (_choice(Z_RULES), "steady_velocity"),
    },
    "control": {
        "mode": (_choice(MODES), "closed-loop"),
        "gamma_per_s": (_positive_float, ...),
        "g4_slope": (_choice(("zero_reflection", "lambda4")), "zero_reflection"),
        "gain_safety": (_positive_float, 0.5),
        "b_fraction": (_positive_float, 0.5),
        "c0": (_positive_float, 1.4),
        "published_indices": (_bool, False),
    },
    "numerics": {
        "cells": (_positive_int, ...),
        "cfl": (_positive_float, 0.9),
        "t_final_s": (float, ...),
        "record_dt_s": (_positive_float, 1.0),
        "snapshot_dt_s": (float, 0.0),
    },
    "output": {"directory": (str, "out")},
}
REQUIRED_SECTIONS = tuple(s for s in SCHEMA if s != "scenario")


@dataclass(frozen=True)
class RunConfig:
    name: str
    length: float
    pressure_family: str
    pressure_params: tuple
    rho_free: float
    rho_cong: float
    x_shock: float
    z_free: float | None
    z_cong: float | None
    initial_x_shock: float
    initial_rho_free: float
    initial_rho_cong: float
    z_rule: str
    mode: str
    gamma: float
    g4_slope: str
    gain_safety: float
    b_fraction: float
    C0: float
    strict_indices: bool
    cells: int
    cfl: float
    t_final: float
    record_dt: float
    snapshot_dt: float
    output_dir: str

    def pressure(self):
        if self.pressure_family == "affine":
            return PressureModel.affine(*self.pressure_params)
        return PressureModel.power_law(*self.pressure_params)

    def profile(self):
        pm = self.pressure()
        if self.z_free is None:
            return fix_equilibrium(pm, self.rho_free, self.rho_cong, self.x_shock, self.length)
        return EquilibriumShockProfile(self.rho_free, self.z_free, self.rho_cong, self.z_cong,
                                       self.x_shock, self.length, pm)

    def initial(self):
        return InitialCondition(self.initial_x_shock, self.initial_rho_free, self.initial_rho_cong,
                                z_rule=self.z_rule)

    def canonical(self):
        """Semantic content only: output location and name do not change results."""
        data = asdict(self)
        data.pop("output_dir")
        data.pop("name")
        data["pressure_params"] = list(data["pressure_params"])
        return data

    def hash(self):
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def _collect(parser, source):
    errors = []
    missing = [s for s in REQUIRED_SECTIONS if not parser.has_section(s)]
    if missing:
        errors.append(f"{source}: missing sections {missing} (required: {list(REQUIRED_SECTIONS)})")
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"{source}: unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in SCHEMA[section]:
                errors.append(f"{source}: unknown key {section}.{key}")
    for section, keys in SCHEMA.items():
        if not parser.has_section(section):
            continue
        for key, (conv, default) in keys.items():
            if key in parser[section]:
                raw = parser[section][key]
                try:
                    values[section, key] = conv(raw)
                except ValueError as exc:
                    errors.append(f"{source}: {section}.{key} = {raw!r}: expected "
                                  f"{getattr(conv, '__name__', 'value')} ({exc})")
            elif default is ...:
                errors.append(f"{source}: missing required key {section}.{key}")
            else:
                values[section, key] = default
    if not errors:
        errors.extend(_cross_checks(values, source))
    if errors:
        raise ConfigError("\n".join(errors))
    return values


def _cross_checks(v, source):
    errors = []
    fam = v["pressure", "family"]
    needed = {"affine": ("gain_m_per_s", "rho_max_veh_per_km"), "power": ("coefficient", "exponent")}[fam]
    for key in needed:
        if v["pressure", key] is None:
            errors.append(f"{source}: pressure.{key} is required for family {fam}")
    zf, zc = v["equilibrium", "z_free_veh_m_per_km_s"], v["equilibrium", "z_cong_veh_m_per_km_s"]
    if (zf is None) != (zc is None):
        errors.append(f"{source}: equilibrium z values must be given together or not at all")
    cfl = v["numerics", "cfl"]
    if not 0 < cfl < 1:
        errors.append(f"{source}: numerics.cfl must lie in (0, 1), got {cfl}")
    if v["numerics", "t_final_s"] < 0:
        errors.append(f"{source}: numerics.t_final_s must be nonnegative")
    if v["numerics", "cells"] < 16:
        errors.append(f"{source}: numerics.cells must be at least 16")
    length = v["road", "length_m"]
    for sec in ("equilibrium", "initial"):
        if not v[sec, "x_shock_m"] < length:
            errors.append(f"{source}: {sec}.x_shock_m must lie inside the road (0, {length})")
    return errors


def parse_config_text(text, source="<string>"):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    v = _collect(parser, source)
    fam = v["pressure", "family"]
    params = ((v["pressure", "gain_m_per_s"], v["pressure", "rho_max_veh_per_km"]) if fam == "affine"
              else (v["pressure", "coefficient"], v["pressure", "exponent"]))
    return RunConfig(
        name=v["scenario", "name"] if parser.has_section("scenario") else "custom",
        length=v["road", "length_m"],
        pressure_family=fam,
        pressure_params=params,
        rho_free=v["equilibrium", "rho_free_veh_per_km"],
        rho_cong=v["equilibrium", "rho_cong_veh_per_km"],
        x_shock=v["equilibrium", "x_shock_m"],
        z_free=v["equilibrium", "z_free_veh_m_per_km_s"],
        z_cong=v["equilibrium", "z_cong_veh_m_per_km_s"],
        initial_x_shock=v["initial", "x_shock_m"],
        initial_rho_free=v["initial", "rho_free_veh_per_km"],
        initial_rho_cong=v["initial", "rho_cong_veh_per_km"],
        z_rule=v["initial", "z_rule"],
        mode=v["control", "mode"],
        gamma=v["control", "gamma_per_s"],
        g4_slope=v["control", "g4_slope"],
        gain_safety=v["control", "gain_safety"],
        b_fraction=v["control", "b_fraction"],
        C0=v["control", "c0"],
        strict_indices=v["control", "published_indices"],
        cells=v["numerics", "cells"],
        cfl=v["numerics", "cfl"],
        t_final=v["numerics", "t_final_s"],
        record_dt=v["numerics", "record_dt_s"],
        snapshot_dt=v["numerics", "snapshot_dt_s"],
        output_dir=v["output", "directory"],
    )


def parse_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def preset_text(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {list(PRESETS)}")
    return resources.files("arz_shock").joinpath("presets", f"{name}.ini").read_text(encoding="utf-8")


def load_preset(name):
    return parse_config_text(preset_text(name), f"preset:{name}")
