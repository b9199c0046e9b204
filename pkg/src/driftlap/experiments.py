"""End-to-end experiments: configuration, pipelines and run reports."""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .curvature import (
    DEFAULT_SAMPLES,
    SphereLinear,
    TorusCosine,
    condition4_K,
    optimize_bound,
    surface_potential,
    sweep_rows,
    z_grid,
)
from .heatflow import HeatConfig, evolve, random_mean_zero, trace_rows, verify_decay
from .mesh import load_off, mean_edge_length, validate
from .spectral import first_positive_eigenvalue, smallest_eigenpairs
from .weighted import Potential, assemble, read_vertex_csv

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "bound not applicable"

SURFACES = ("sphere", "torus", "off")


def _parse_bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    return tuple(float(x) for x in str(text).replace(";", ",").split(",") if x.strip())


def _parse_ints(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).replace(";", ",").split(",") if x.strip())


@dataclass
class ExperimentConfig:
    """Flat experiment description; every field has a key=value spelling."""

    surface: str = "sphere"
    radius: float = 1.0
    slope: float = 0.0
    Lu: float = 2 * math.pi
    Lv: float = 2 * math.pi
    amplitude: float = 1.0
    off_path: str | None = None
    potential_path: str | None = None
    u0_path: str | None = None
    subdiv: int = 4
    grid: tuple = (64, 64)
    tol: float = 1e-8
    eig_count: int = 6
    slack: float = 0.02
    decay_tol: float = 0.05
    samples: int = DEFAULT_SAMPLES
    z_min: float = 1e-3
    z_max: float = 1e2
    z_count: int = 50
    z_log: bool = True
    c: float = 0.0
    dt: float = 1e-3
    t_end: float = 2.0
    p_list: tuple = (1.0, 2.0, 3.0, 4.0)
    integrator: str = "implicit_euler"
    record_every: int = 10
    runs: int = 1
    levels: tuple = ()
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        self.surface = str(self.surface).lower()
        if self.surface not in SURFACES:
            raise ValueError(f"surface must be one of {SURFACES}, got {self.surface!r}")
        if self.surface == "off" and not self.off_path:
            raise ValueError("surface=off needs off_path")
        self.grid = self._grid(self.grid)
        self.p_list = _parse_floats(self.p_list)
        self.levels = _parse_ints(self.levels)
        self.z_log = _parse_bool(self.z_log)
        for name, typ in (("radius", float), ("slope", float), ("Lu", float), ("Lv", float),
                          ("amplitude", float), ("tol", float), ("slack", float),
                          ("decay_tol", float), ("z_min", float), ("z_max", float),
                          ("c", float), ("dt", float), ("t_end", float), ("subdiv", int),
                          ("eig_count", int), ("samples", int), ("z_count", int),
                          ("record_every", int), ("runs", int), ("seed", int)):
            setattr(self, name, typ(getattr(self, name)))

    @staticmethod
    def _grid(value):
        if isinstance(value, (list, tuple)):
            g = tuple(int(x) for x in value)
        else:
            g = tuple(int(x) for x in str(value).lower().replace("x", ",").split(",") if x.strip())
        if len(g) == 1:
            g = (g[0], g[0])
        if len(g) != 2:
            raise ValueError(f"grid must be N or NUxNV, got {value!r}")
        return g

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        values = {}
        names = {f.name for f in dataclasses.fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in names:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            if value.lower() not in ("", "none"):  # blank means "use the default"
                values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(), **overrides)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        del d["out"]  # where results go is not part of the experiment
        for key in ("grid", "p_list", "levels"):
            d[key] = list(d[key])
        return d

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, list):
                value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def heat_config(self) -> HeatConfig:
        return HeatConfig(
            c=self.c, dt=self.dt, t_end=self.t_end, p_list=self.p_list,
            integrator=self.integrator, record_every=self.record_every,
        )

    def catalog_surface(self):
        if self.surface == "sphere":
            return SphereLinear(self.radius, self.slope)
        if self.surface == "torus":
            return TorusCosine(self.Lu, self.Lv, self.amplitude)
        return None

    def with_resolution(self, level: int) -> "ExperimentConfig":
        if self.surface == "sphere":
            return dataclasses.replace(self, subdiv=level)
        return dataclasses.replace(self, grid=(level, level))


@dataclass
class RunReport:
    """JSON payload in ``data`` plus tabular side outputs written next to it."""

    data: dict
    mesh: object = None
    sweep: list | None = None
    trace_header: list | None = None
    trace: list | None = None
    convergence: list | None = None
    timings: dict = field(default_factory=dict)

    @property
    def failed_stage(self):
        err = self.data.get("error")
        return err["stage"] if err else None

    def verdicts(self) -> list:
        out = []
        if "theorem1" in self.data:
            out.append(self.data["theorem1"]["verdict"])
        if "theorem2" in self.data:
            out.append(self.data["theorem2"]["verdict"])
        return out


class _Stages:
    """Runs named pipeline stages, capturing the first failure in the report."""

    def __init__(self, report: RunReport):
        self.report = report

    def __call__(self, name, fn, *args, **kwargs):
        if self.report.failed_stage:
            raise _Aborted
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            self.report.data["error"] = {"stage": name, "message": f"{type(exc).__name__}: {exc}"}
            raise _Aborted from exc
        finally:
            self.report.timings[name] = self.report.timings.get(name, 0.0) + time.perf_counter() - t0


class _Aborted(Exception):
    pass


def _new_report(cfg, command):
    return RunReport(data={"artifact_version": __version__, "command": command, "config": cfg.to_dict()})


def build_problem(cfg: ExperimentConfig):
    """Mesh, potential and (for catalog surfaces) the analytic surface."""
    surface = cfg.catalog_surface()
    if surface is None:
        with open(cfg.off_path, "rb") as fh:
            mesh = load_off(fh.read())
        if cfg.potential_path:
            potential = Potential(read_vertex_csv(cfg.potential_path), descriptor="csv")
        else:
            potential = Potential.zero(mesh)
        return mesh, potential, None
    if isinstance(surface, SphereLinear):
        mesh = surface.make_mesh(cfg.subdiv)
    else:
        mesh = surface.make_mesh(*cfg.grid)
    return mesh, surface_potential(surface, mesh), surface


def _mesh_section(mesh):
    d = validate(mesh)._asdict()
    d.update(
        geometry=mesh.geometry,
        vertex_count=mesh.vertex_count,
        triangle_count=mesh.triangle_count,
        mean_edge_length=mean_edge_length(mesh),
    )
    return d


def run_mesh(cfg: ExperimentConfig) -> RunReport:
    report = _new_report(cfg, "mesh")
    stage = _Stages(report)
    try:
        mesh, _, _ = stage("mesh", build_problem, cfg)
        report.mesh = mesh
        report.data["mesh"] = _mesh_section(mesh)
    except _Aborted:
        pass
    return report


def _eigen_stages(cfg, report, stage):
    mesh, potential, surface = stage("mesh", build_problem, cfg)
    report.mesh = mesh
    report.data["mesh"] = stage("validate", _mesh_section, mesh)
    op = stage("assemble", assemble, mesh, potential)
    k = min(max(cfg.eig_count, 2), mesh.vertex_count)
    eig = stage("eigensolve", smallest_eigenpairs, op, k, cfg.tol)
    first = stage("first_eigenvalue", first_positive_eigenvalue, op, cfg.tol)
    report.data["eigen"] = {
        "eigenvalues": [float(x) for x in eig.eigenvalues],
        "residuals": [float(x) for x in eig.residuals],
        "tolerance": cfg.tol,
        "method": eig.method,
        "lambda1": first.lambda1,
    }
    return mesh, op, surface, first


def run_eigen_experiment(cfg: ExperimentConfig, theorem1: bool = True) -> RunReport:
    """Spectrum, and with ``theorem1`` the z-sweep and eigenvalue-bound verdict."""
    report = _new_report(cfg, "verify-thm1" if theorem1 else "eigs")
    stage = _Stages(report)
    try:
        _, _, surface, first = _eigen_stages(cfg, report, stage)
        if not theorem1:
            return report
        if surface is None:
            stage("conditions", _raise, ValueError("curvature conditions need a catalog surface (sphere or torus)"))
        zs = z_grid(cfg.z_count, cfg.z_min, cfg.z_max, cfg.z_log)
        search = stage("conditions", optimize_bound, surface, zs, cfg.samples)
        K = stage("conditions", condition4_K, surface, cfg.samples)
        report.sweep = sweep_rows(search)
        report.data["conditions"] = {
            "K": K,
            "best_z": search.best_z,
            "best_bound": search.best_bound,
            "samples": cfg.samples,
            "reports": [r.as_dict() for r in search.reports],
        }
        lam1 = first.lambda1
        if search.best_bound is None:
            verdict = {"verdict": NOT_APPLICABLE, "lambda1": lam1, "bound": None,
                       "slack": cfg.slack, "margin": None}
        else:
            threshold = search.best_bound * (1.0 - cfg.slack)
            verdict = {
                "verdict": PASS if lam1 >= threshold else FAIL,
                "lambda1": lam1,
                "bound": search.best_bound,
                "slack": cfg.slack,
                "margin": lam1 - threshold,
            }
        report.data["theorem1"] = verdict
    except _Aborted:
        pass
    return report


def _raise(exc):
    raise exc


def run_heat_experiment(cfg: ExperimentConfig) -> RunReport:
    """Seeded heat-flow runs with per-p decay verdicts; the first run's trace is kept."""
    report = _new_report(cfg, "heat")
    stage = _Stages(report)
    try:
        mesh, potential, surface = stage("mesh", build_problem, cfg)
        report.mesh = mesh
        report.data["mesh"] = stage("validate", _mesh_section, mesh)
        op = stage("assemble", assemble, mesh, potential)
        if surface is None:
            stage("conditions", _raise, ValueError("K needs a catalog surface (sphere or torus)"))
        K = stage("conditions", condition4_K, surface, cfg.samples)
        hc = stage("heat_config", cfg.heat_config)
        eig = None
        if hc.integrator == "spectral":
            eig = stage("eigensolve", smallest_eigenpairs, op, op.vertex_count, cfg.tol, "dense")
        rng = np.random.default_rng(cfg.seed)
        runs = []
        all_pass = True
        for r in range(cfg.runs):
            if cfg.u0_path and r == 0:
                u0 = stage("initial_data", read_vertex_csv, cfg.u0_path)
            else:
                u0 = random_mean_zero(op, rng)
            trace = stage("evolve", evolve, op, u0, hc, eig)
            verdicts = stage("verify", verify_decay, trace, K, cfg.c, cfg.decay_tol)
            if r == 0:
                report.trace_header, report.trace = trace_rows(trace, K, cfg.c)
            entry = {}
            for p, v in verdicts.items():
                entry[f"{p:g}"] = {
                    "passed": v.passed, "worst_margin": v.worst_margin,
                    "worst_time": v.worst_time, "tol": v.tol,
                }
                all_pass &= v.passed
            runs.append(entry)
        report.data["theorem2"] = {
            "verdict": PASS if all_pass else FAIL,
            "K": K,
            "c": cfg.c,
            "tol": cfg.decay_tol,
            "runs": runs,
        }
    except _Aborted:
        pass
    return report


def analytic_lambda1(cfg: ExperimentConfig):
    """Exact first eigenvalue when f is zero on a catalog surface, else None."""
    if cfg.surface == "sphere" and cfg.slope == 0:
        return 2.0 / cfg.radius**2
    if cfg.surface == "torus" and cfg.amplitude == 0:
        return (2 * math.pi / max(cfg.Lu, cfg.Lv)) ** 2
    return None


def convergence_study(cfg: ExperimentConfig, levels=None) -> RunReport:
    """First eigenvalue across resolutions with observed convergence orders.

    Errors are taken against the analytic value when one exists and against the
    finest level otherwise; in the latter case the order comes from Richardson's
    three-level estimate instead of a log-log fit.
    """
    levels = tuple(int(x) for x in (levels if levels is not None else cfg.levels))
    report = _new_report(cfg, "converge")
    report.data["config"]["levels"] = list(levels)
    stage = _Stages(report)
    try:
        stage("levels", _check_levels, levels)
        exact = analytic_lambda1(cfg)
        rows = []
        for level in levels:
            sub = cfg.with_resolution(level)
            mesh, potential, _ = stage(f"mesh[{level}]", build_problem, sub)
            op = stage(f"assemble[{level}]", assemble, mesh, potential)
            first = stage(f"first_eigenvalue[{level}]", first_positive_eigenvalue, op, cfg.tol)
            rows.append({
                "level": level,
                "vertex_count": mesh.vertex_count,
                "h": mean_edge_length(mesh),
                "lambda1": first.lambda1,
            })
        rows.sort(key=lambda r: r["h"], reverse=True)
        ref = exact if exact is not None else rows[-1]["lambda1"]
        for r in rows:
            r["error"] = abs(r["lambda1"] - ref)
        for prev, cur in zip(rows, rows[1:]):
            if prev["error"] > 0 and cur["error"] > 0:
                cur["order"] = math.log(prev["error"] / cur["error"]) / math.log(prev["h"] / cur["h"])
            else:
                cur["order"] = None
        rows[0]["order"] = None
        if exact is not None:
            h = np.log([r["h"] for r in rows])
            e = np.log([r["error"] for r in rows])
            order = float(np.polyfit(h, e, 1)[0])
        else:
            l0, l1, l2 = (r["lambda1"] for r in rows[-3:])
            ratio = abs(l0 - l1) / abs(l1 - l2)
            order = math.log(ratio) / math.log(rows[-3]["h"] / rows[-2]["h"])
        report.convergence = rows
        report.data["convergence"] = {
            "reference": ref,
            "reference_kind": "analytic" if exact is not None else "finest_level",
            "estimated_order": order,
            "rows": rows,
        }
    except _Aborted:
        pass
    return report


def _check_levels(levels):
    if len(levels) < 3:
        raise ValueError(f"convergence study needs at least 3 levels, got {len(levels)}")
    dupes = sorted({x for x in levels if levels.count(x) > 1})
    if dupes:
        raise ValueError(f"duplicate resolutions: {dupes}")
