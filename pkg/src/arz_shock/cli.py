"""Command line entry point: simulate, certify, sweep and validate."""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .config import PRESETS, load_preset, parse_config
from .errors import ARZError, ConfigError
from .gains import certify, synthesize_diagonal
from .lyapunov import Monitor, dissipation_check, fit_rate
from .model import characteristic_data, validate_equilibrium
from .records import TRAJECTORY_COLUMNS, trajectory_rows, write_json, write_rows, write_snapshot
from .solver import SimConfig, compatibility_check, initial_state, run
from .transform import from_fixed_domain

EXIT_OK, EXIT_CONFIG, EXIT_CERTIFICATE, EXIT_SOLVER = 0, 2, 3, 4


class CertificateFailure(ARZError):
    """A requested gain set did not pass its certificate."""


class SolverFailure(ARZError):
    """The time integration stopped before the final time."""


class Outputs:
    """Tracks written files so the manifest can list them."""

    def __init__(self, directory):
        self.directory = directory
        self.paths = []
        os.makedirs(directory, exist_ok=True)

    def path(self, name):
        full = os.path.join(self.directory, name)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        if name not in self.paths:
            self.paths.append(name)
        return full


def _profile_and_char(cfg):
    profile = cfg.profile()
    report = validate_equilibrium(profile)
    if not report.all_passed:
        details = "; ".join(f"{n}: residual {report.checks[n].residual:.6g} {report.checks[n].detail}"
                            for n in report.failed())
        raise ConfigError(f"equilibrium profile is not a valid steady shock ({details})")
    return profile, characteristic_data(profile)


def _design(cfg, char, gamma):
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    gains, _ = synthesize_diagonal(gamma, char, cfg.strict_indices, cfg.gain_safety, cfg.g4_slope,
                                   cfg.b_fraction)
    return gains, certify(gamma, gains, char, cfg.strict_indices, cfg.C0)


def _certificate_dict(cert, gains):
    data = cert.to_dict()
    data["K"] = gains.K
    data["Gp"] = gains.Gp
    data["g4_slope"] = gains.g4p
    data["reflection"] = gains.reflection
    return data


def cmd_simulate(cfg, out):
    profile, char = _profile_and_char(cfg)
    gains, cert = _design(cfg, char, cfg.gamma)
    write_json(out.path("certificate.json"), _certificate_dict(cert, gains))
    if cfg.mode == "closed-loop" and not cert.verdict:
        raise CertificateFailure(f"gains not certified at gamma={cfg.gamma}: {cert.reasons}")

    sim = SimConfig(profile, char, cfg.initial(), cfg.cells, cfg.cfl, cfg.t_final, cfg.mode, gains,
                    cfg.record_dt, cfg.snapshot_dt or None)
    compat = compatibility_check(initial_state(sim), gains, sim)
    rec = run(sim, observer=Monitor(char, cert.constants))

    write_rows(out.path("trajectory.csv"), TRAJECTORY_COLUMNS, trajectory_rows(rec))
    for k, state in enumerate(rec.snapshots):
        snap = from_fixed_domain(state, profile)
        write_snapshot(out.path(os.path.join("snapshots", f"snapshot_{k:04d}.csv")), snap,
                       profile.pressure)

    t = np.array(rec.t)
    combined = np.array([e["combined"] for e in rec.extras])
    V = np.array([e.get("V", np.nan) for e in rec.extras])
    fit = None
    if np.count_nonzero(np.isfinite(V)) >= 12:
        fit = dissipation_check(t[1:], V[1:], combined[1:], cfg.gamma).to_dict()
    summary = {
        "scenario": cfg.name,
        "mode": cfg.mode,
        "gamma": cfg.gamma,
        "status": rec.status,
        "error": rec.error,
        "steps": rec.steps,
        "t_end": rec.t[-1],
        "x_s_initial": rec.x_s[0],
        "x_s_final": rec.x_s[-1],
        "x_s_target": profile.x_shock,
        "combined_initial": combined[0],
        "combined_final": combined[-1],
        "max_rh_residual": rec.max_rh_residual,
        "compatibility": {"zeroth_order": compat.zeroth_order, "first_order": compat.first_order},
        "decay_fit": fit,
        "certificate_verdict": cert.verdict,
    }
    write_json(out.path("summary.json"), summary)
    if rec.status != "ok":
        raise SolverFailure(f"run stopped at t={rec.t[-1]:.6g}: {rec.error}")
    return EXIT_OK


def cmd_certify(cfg, out, gammas):
    _, char = _profile_and_char(cfg)
    ok = True
    for gamma in gammas:
        gains, cert = _design(cfg, char, gamma)
        write_json(out.path(f"certificate_gamma_{gamma:.6g}.json"), _certificate_dict(cert, gains))
        ok &= cert.verdict
    if not ok:
        raise CertificateFailure("at least one requested gamma failed certification")
    return EXIT_OK


def cmd_sweep(cfg, out, gammas, simulate=False):
    profile, char = _profile_and_char(cfg)
    rows, ok = [], True
    for gamma in gammas:
        gains, cert = _design(cfg, char, gamma)
        ok &= cert.verdict
        rate = None
        if simulate and cert.verdict:
            sim = SimConfig(profile, char, cfg.initial(), cfg.cells, cfg.cfl, cfg.t_final,
                            "closed-loop", gains, cfg.record_dt)
            rec = run(sim, observer=Monitor(char))
            combined = np.array([e["combined"] for e in rec.extras])
            if rec.status == "ok" and len(rec.t) >= 12:
                rate = fit_rate(np.array(rec.t[1:]), np.sqrt(combined[1:]))[0]
        rows.append([gamma, cert.min_eig, "pass" if cert.verdict else "fail", rate])
    write_rows(out.path("sweep.csv"), ("gamma", "min_eig", "verdict", "fitted_rate"), rows)
    if not ok:
        raise CertificateFailure("at least one gamma in the sweep failed certification")
    return EXIT_OK


def cmd_validate(cfg, out):
    profile = cfg.profile()
    report = validate_equilibrium(profile)
    data = {
        "checks": {name: {"passed": c.passed, "residual": c.residual, "detail": c.detail}
                   for name, c in report.checks.items()},
        "warnings": list(report.warnings),
        "pressure_assumptions": profile.pressure.check_assumptions(),
        "profile": {"rho_f": profile.rho_f, "z_f": profile.z_f, "rho_c": profile.rho_c,
                    "z_c": profile.z_c, "x_shock": profile.x_shock, "length": profile.length},
        "valid": report.all_passed,
    }
    write_json(out.path("validation.json"), data)
    if not report.all_passed:
        raise ConfigError("equilibrium profile failed validation: "
                          + ", ".join(report.failed()))
    return EXIT_OK


def _gamma_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad gamma list {text!r}") from exc


def build_parser():
    parser = argparse.ArgumentParser(prog="arz-shock", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", help="INI configuration file")
    src.add_argument("--preset", choices=PRESETS, help="shipped scenario (default: section5)")
    common.add_argument("--out", help="output directory (overrides [output] directory)")
    common.add_argument("--published-indices", action="store_true",
                        help="evaluate the b intervals with the published first-component index")
    common.add_argument("--record-timing", action="store_true",
                        help="store wall-clock duration in the manifest (breaks byte-identical reruns)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a scenario and write trajectories")
    p.add_argument("--gamma", type=float, help="design decay rate (overrides the config)")
    p.add_argument("--mode", choices=("closed-loop", "open-loop"))
    p.add_argument("--t-final", type=float)
    p.add_argument("--cells", type=int)

    p = sub.add_parser("certify", parents=[common], help="certify gains for one or more rates")
    p.add_argument("--gamma", type=_gamma_list, help="comma-separated decay rates")

    p = sub.add_parser("sweep", parents=[common], help="certificate sweep over decay rates")
    p.add_argument("--gamma", type=_gamma_list, help="comma-separated decay rates")
    p.add_argument("--gamma-min", type=float, default=0.1)
    p.add_argument("--gamma-max", type=float, default=2.0)
    p.add_argument("--gamma-count", type=int, default=20)
    p.add_argument("--simulate", action="store_true", help="also fit the closed-loop decay rate")

    sub.add_parser("validate", parents=[common], help="check the equilibrium profile")
    return parser


def _load(args):
    cfg = parse_config(args.config) if args.config else load_preset(args.preset or "section5")
    overrides = {"output_dir": args.out}
    if args.published_indices:
        overrides["strict_indices"] = True
    if args.command == "simulate":
        overrides.update(gamma=args.gamma, mode=args.mode, t_final=args.t_final, cells=args.cells)
    cfg = cfg.with_overrides(**overrides)
    if cfg.cells < 16 or cfg.t_final < 0 or not cfg.gamma > 0:
        raise ConfigError("overrides must keep cells >= 16, t_final >= 0 and gamma > 0")
    return cfg


def _dispatch(args, cfg, out):
    if args.command == "simulate":
        return cmd_simulate(cfg, out)
    if args.command == "certify":
        return cmd_certify(cfg, out, args.gamma or [cfg.gamma])
    if args.command == "sweep":
        gammas = args.gamma or list(np.linspace(args.gamma_min, args.gamma_max, args.gamma_count))
        return cmd_sweep(cfg, out, gammas, args.simulate)
    return cmd_validate(cfg, out)


def main(argv=None):
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    out = None
    cfg = None
    try:
        cfg = _load(args)
        out = Outputs(cfg.output_dir)
        status = _dispatch(args, cfg, out)
        error = None
    except ConfigError as exc:
        status, error = EXIT_CONFIG, exc
    except CertificateFailure as exc:
        status, error = EXIT_CERTIFICATE, exc
    except (SolverFailure, ARZError) as exc:
        status, error = EXIT_SOLVER, exc

    if error is not None:
        payload = {"exit_code": status, "error": type(error).__name__, "message": str(error)}
        print(f"error: {error}", file=sys.stderr)
        if out is None:
            out = Outputs(args.out or (cfg.output_dir if cfg else "out"))
        write_json(out.path("error.json"), payload)
    manifest = {
        "scenario": cfg.name if cfg else None,
        "command": args.command,
        "config_hash": cfg.hash() if cfg else None,
        "outputs": sorted(out.paths),
        "version": __version__,
        "duration_s": time.perf_counter() - start if args.record_timing else None,
        "exit_status": status,
    }
    write_json(os.path.join(out.directory, "manifest.json"), manifest)
    return status


if __name__ == "__main__":
    sys.exit(main())
