"""Writing run reports: report.json plus CSV side tables and the generated mesh."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema

from .errors import DriftlapError
from .experiments import RunReport
from .mesh import EMBEDDED_3D, write_off

_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["artifact_version", "command", "config", "timings"],
    "properties": {
        "artifact_version": {"type": "string"},
        "command": {"enum": ["mesh", "eigs", "verify-thm1", "heat", "converge"]},
        "config": {"type": "object", "required": ["surface", "seed"]},
        "timings": {"type": "object", "additionalProperties": _num},
        "error": {
            "type": "object",
            "required": ["stage", "message"],
            "properties": {"stage": {"type": "string"}, "message": {"type": "string"}},
        },
        "mesh": {
            "type": "object",
            "required": ["is_closed", "is_oriented", "euler_characteristic", "vertex_count",
                         "triangle_count", "boundary_edge_count"],
        },
        "eigen": {
            "type": "object",
            "required": ["eigenvalues", "residuals", "tolerance", "lambda1"],
            "properties": {
                "eigenvalues": {"type": "array", "items": _num},
                "residuals": {"type": "array", "items": _num},
                "tolerance": _num,
                "lambda1": _num,
            },
        },
        "conditions": {
            "type": "object",
            "required": ["K", "best_z", "best_bound", "reports"],
            "properties": {
                "K": _num,
                "best_z": _num_or_null,
                "best_bound": _num_or_null,
                "reports": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["z", "A", "K", "bound", "satisfiable"],
                        "properties": {"bound": _num_or_null, "satisfiable": {"type": "boolean"}},
                    },
                },
            },
        },
        "theorem1": {
            "type": "object",
            "required": ["verdict", "lambda1", "bound", "slack", "margin"],
            "properties": {
                "verdict": {"enum": ["pass", "fail", "bound not applicable"]},
                "lambda1": _num,
                "bound": _num_or_null,
                "slack": _num,
                "margin": _num_or_null,
            },
        },
        "theorem2": {
            "type": "object",
            "required": ["verdict", "K", "c", "tol", "runs"],
            "properties": {
                "verdict": {"enum": ["pass", "fail"]},
                "tol": _num,
                "runs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": {
                            "type": "object",
                            "required": ["passed", "worst_margin", "worst_time", "tol"],
                        },
                    },
                },
            },
        },
        "convergence": {
            "type": "object",
            "required": ["reference", "estimated_order", "rows"],
        },
    },
}


def report_document(report: RunReport, include_timings: bool = True) -> dict:
    doc = dict(report.data)
    doc["timings"] = dict(report.timings) if include_timings else {}
    return doc


def dumps_report(report: RunReport, include_timings: bool = True) -> str:
    return json.dumps(report_document(report, include_timings), sort_keys=True, indent=2, allow_nan=False) + "\n"


def validate_report(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not match REPORT_SCHEMA."""
    jsonschema.validate(doc, REPORT_SCHEMA)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in row])


def emit_report(report: RunReport, path) -> list[Path]:
    """Write report.json and whichever of trace.csv, sweep.csv, convergence.csv, mesh.off apply.

    ``path`` must not exist or must be an empty directory.
    """
    out = Path(path)
    if out.exists() and (not out.is_dir() or any(out.iterdir())):
        raise DriftlapError(f"output directory {out} already exists and is not empty")
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        target = out / "report.json"
        target.write_text(dumps_report(report))
        written.append(target)
        if report.sweep is not None:
            target = out / "sweep.csv"
            cols = ["z", "A", "K", "bound", "satisfiable"]
            _write_csv(target, cols, [[r[c] for c in cols] for r in report.sweep])
            written.append(target)
        if report.trace is not None:
            target = out / "trace.csv"
            _write_csv(target, report.trace_header, report.trace)
            written.append(target)
        if report.convergence is not None:
            target = out / "convergence.csv"
            cols = ["level", "vertex_count", "h", "lambda1", "error", "order"]
            _write_csv(target, cols, [[r.get(c) for c in cols] for r in report.convergence])
            written.append(target)
        if report.mesh is not None and report.mesh.geometry == EMBEDDED_3D:
            target = out / "mesh.off"
            write_off(report.mesh, target)
            written.append(target)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report to {out}: {exc.strerror}", str(out)) from exc
    return written
