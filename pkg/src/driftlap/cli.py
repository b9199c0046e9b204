"""Command-line entry point.

Exit codes: 0 for a completed run (including "bound not applicable"), 1 when a
pipeline stage or the output step fails, 2 for usage errors, 3 when a completed
run produced a failing theorem verdict.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import DriftlapError
from .experiments import (
    FAIL,
    ExperimentConfig,
    convergence_study,
    run_eigen_experiment,
    run_heat_experiment,
    run_mesh,
)
from .reporting import dumps_report, emit_report

EXIT_OK = 0
EXIT_STAGE_ERROR = 1
EXIT_USAGE = 2
EXIT_VERDICT_FAILED = 3

log = logging.getLogger("driftlap")

# command-line flag -> ExperimentConfig field
_FLAG_FIELDS = {
    "surface": "surface", "radius": "radius", "slope": "slope", "Lu": "Lu", "Lv": "Lv",
    "amplitude": "amplitude", "off": "off_path", "potential": "potential_path",
    "u0": "u0_path", "subdiv": "subdiv", "grid": "grid", "tol": "tol", "k": "eig_count",
    "slack": "slack", "decay_tol": "decay_tol", "samples": "samples", "z_min": "z_min",
    "z_max": "z_max", "z_count": "z_count", "z_log": "z_log", "c": "c", "dt": "dt",
    "t_end": "t_end", "p_list": "p_list", "integrator": "integrator",
    "record_every": "record_every", "runs": "runs", "levels": "levels", "seed": "seed",
    "out": "out",
}


def _add_common(p):
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--surface", choices=["sphere", "torus", "off"])
    p.add_argument("--radius", type=float)
    p.add_argument("--slope", type=float, help="a in f = a*x3 on the sphere")
    p.add_argument("--Lu", type=float)
    p.add_argument("--Lv", type=float)
    p.add_argument("--amplitude", type=float, help="beta in f = beta*cos(2 pi u/Lu) on the torus")
    p.add_argument("--off", help="OFF mesh (with --surface off)")
    p.add_argument("--potential", help="per-vertex potential CSV for OFF meshes")
    p.add_argument("--subdiv", type=int, help="icosphere subdivision level")
    p.add_argument("--grid", help="torus grid, N or NUxNV")
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (must not exist or be empty)")


def _add_bound_flags(p):
    p.add_argument("--z-min", dest="z_min", type=float)
    p.add_argument("--z-max", dest="z_max", type=float)
    p.add_argument("--z-count", dest="z_count", type=int)
    p.add_argument("--z-log", dest="z_log", choices=["true", "false"])
    p.add_argument("--samples", type=int)
    p.add_argument("--slack", type=float, help="relative slack for the eigenvalue bound verdict")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftlap",
        description="Drifting Laplacian spectra, curvature bounds and weighted heat flow on closed meshes.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate or load a mesh, validate it, write mesh.off")
    _add_common(p)

    p = sub.add_parser("eigs", help="smallest eigenpairs of the drifting Laplacian")
    _add_common(p)
    p.add_argument("-k", type=int, help="number of eigenpairs")

    p = sub.add_parser("verify-thm1", help="first eigenvalue against the curvature lower bound")
    _add_common(p)
    _add_bound_flags(p)
    p.add_argument("-k", type=int)

    p = sub.add_parser("heat", help="heat flow with gradient-energy decay verification")
    _add_common(p)
    p.add_argument("--c", type=float, help="constant zeroth-order coefficient")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--p-list", dest="p_list", help="comma-separated exponents, each >= 1")
    p.add_argument("--integrator", choices=["implicit_euler", "spectral"])
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--runs", type=int, help="number of seeded random initial conditions")
    p.add_argument("--u0", help="CSV initial data for the first run")
    p.add_argument("--decay-tol", dest="decay_tol", type=float)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("converge", help="first-eigenvalue convergence across resolutions")
    _add_common(p)
    p.add_argument("--levels", required=False, help="comma-separated subdivision levels or grid sizes")
    return parser


def config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for flag, name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig(**overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))

    runners = {
        "mesh": run_mesh,
        "eigs": lambda c: run_eigen_experiment(c, theorem1=False),
        "verify-thm1": run_eigen_experiment,
        "heat": run_heat_experiment,
        "converge": convergence_study,
    }
    report = runners[args.command](cfg)

    if cfg.out:
        try:
            for path in emit_report(report, cfg.out):
                log.info("wrote %s", path)
        except (OSError, DriftlapError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_STAGE_ERROR
    else:
        sys.stdout.write(dumps_report(report))

    if report.failed_stage:
        print(f"error in stage {report.failed_stage}: {report.data['error']['message']}", file=sys.stderr)
        return EXIT_STAGE_ERROR
    if FAIL in report.verdicts():
        return EXIT_VERDICT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
