"""Drifting heat flow ``du/dt = L_f u + c u`` and gradient-energy decay checks.

Semi-discretely the flow is ``M du/dt = -S u + c M u``.  Implicit Euler is the
working integrator; the spectral expansion is exact for the semi-discrete system
and serves as its oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .errors import DriftlapError, RepresentationError, StepRestrictionError
from .spectral import EigenResult, smallest_eigenpairs
from .weighted import WeightedOperator, energies, weighted_mean, weighted_norm_sq

IMPLICIT_EULER = "implicit_euler"
SPECTRAL = "spectral"

SOLVE_RTOL = 1e-10
REPRESENTATION_RTOL = 1e-8


@dataclass
class HeatConfig:
    c: float = 0.0
    dt: float = 1e-3
    t_end: float = 1.0
    p_list: tuple = (1.0, 2.0, 3.0, 4.0)
    integrator: str = IMPLICIT_EULER
    record_every: int = 1

    def __post_init__(self):
        self.p_list = tuple(float(p) for p in self.p_list)
        if not self.dt > 0 or not self.t_end > 0:
            raise ValueError("dt and t_end must be positive")
        if self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if not self.p_list or any(not p >= 1 for p in self.p_list):
            raise ValueError("p_list must be non-empty with every p >= 1")
        if self.integrator not in (IMPLICIT_EULER, SPECTRAL):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")


@dataclass
class EnergyTrace:
    times: list = field(default_factory=list)
    energies: dict = field(default_factory=dict)  # p -> list of E_p(t)
    weighted_means: list = field(default_factory=list)
    weighted_l2: list = field(default_factory=list)
    c: float | np.ndarray = 0.0

    @property
    def c_is_constant(self) -> bool:
        return np.ndim(self.c) == 0

    def record(self, op, t, u, p_list):
        self.times.append(float(t))
        for p, e in energies(op, u, p_list).items():
            self.energies.setdefault(p, []).append(e)
        self.weighted_means.append(weighted_mean(op, u))
        self.weighted_l2.append(weighted_norm_sq(op, u))

    def as_arrays(self):
        return np.asarray(self.times), {p: np.asarray(v) for p, v in self.energies.items()}


def _shift(op, c):
    return op.mass * c if np.ndim(c) == 0 else op.mass * np.asarray(c, dtype=float)


def _check_step(dt, c):
    if not dt > 0:
        raise ValueError("dt must be positive")
    cmax = float(np.max(c))
    if cmax > 0 and not 1.0 - dt * cmax > 0:
        raise StepRestrictionError(f"1 - dt*c = {1 - dt * cmax:.3g} must be positive for c > 0")


class ImplicitEulerStepper:
    """Factorizes ``M + dt (S - c M)`` once and reuses it for every step."""

    def __init__(self, op: WeightedOperator, dt: float, c=0.0):
        _check_step(dt, c)
        self.op = op
        self.dt = dt
        diag = op.mass - dt * _shift(op, c)
        self.system = (sp.diags(diag) + dt * op.stiffness).tocsc()
        self._solve = sla.factorized(self.system)

    def __call__(self, u):
        rhs = self.op.mass * u
        out = self._solve(rhs)
        r = self.system @ out - rhs
        scale = np.linalg.norm(rhs)
        if scale > 0 and np.linalg.norm(r) > SOLVE_RTOL * scale:
            # one step of iterative refinement before giving up
            out = out - self._solve(r)
            r = self.system @ out - rhs
            if np.linalg.norm(r) > SOLVE_RTOL * scale:
                raise DriftlapError(
                    f"implicit Euler solve residual {np.linalg.norm(r) / scale:.3g} above {SOLVE_RTOL:g}"
                )
        return out


def step_implicit_euler(op: WeightedOperator, u, dt: float, c=0.0) -> np.ndarray:
    """Solve ``(M + dt (S - c M)) u' = M u``."""
    return ImplicitEulerStepper(op, dt, c)(np.asarray(u, dtype=float))


def modal_coefficients(op: WeightedOperator, eig: EigenResult, u0) -> np.ndarray:
    u0 = np.asarray(u0, dtype=float)
    a = eig.eigenvectors.T @ (op.mass * u0)
    recon = eig.eigenvectors @ a
    err = math.sqrt(weighted_norm_sq(op, u0 - recon))
    norm = math.sqrt(weighted_norm_sq(op, u0))
    if err > REPRESENTATION_RTOL * max(norm, np.finfo(float).tiny):
        raise RepresentationError(
            f"eigenbasis of {len(eig)} pairs leaves relative reconstruction residual "
            f"{err / norm:.3g} (need <= {REPRESENTATION_RTOL:g})"
        )
    return a


def spectral_evolve(op: WeightedOperator, eig: EigenResult, u0, t: float, c: float = 0.0) -> np.ndarray:
    """Exact semi-discrete solution ``sum_i exp((c - lam_i) t) <u_i, u0>_M u_i``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    a = modal_coefficients(op, eig, u0)
    return eig.eigenvectors @ (np.exp((c - eig.eigenvalues) * t) * a)


def evolve(op: WeightedOperator, u0, cfg: HeatConfig, eig: EigenResult | None = None) -> EnergyTrace:
    """Run the flow to ``cfg.t_end`` and record energies every ``record_every`` steps."""
    u = np.array(u0, dtype=float)
    if u.shape != (op.vertex_count,) or not np.all(np.isfinite(u)):
        raise ValueError("initial data must be finite with one value per vertex")
    nsteps = max(1, int(round(cfg.t_end / cfg.dt)))
    dt = cfg.t_end / nsteps
    trace = EnergyTrace(c=cfg.c)
    trace.record(op, 0.0, u, cfg.p_list)

    if cfg.integrator == SPECTRAL:
        if np.ndim(cfg.c) != 0:
            raise ValueError("the spectral integrator needs a constant c")
        if eig is None:
            eig = smallest_eigenpairs(op, op.vertex_count, method="dense")
        a = modal_coefficients(op, eig, u)
        lam = eig.eigenvalues
        for n in range(1, nsteps + 1):
            if n % cfg.record_every == 0 or n == nsteps:
                t = n * dt
                un = eig.eigenvectors @ (np.exp((cfg.c - lam) * t) * a)
                _check_finite(un, t)
                trace.record(op, t, un, cfg.p_list)
        return trace

    step = ImplicitEulerStepper(op, dt, cfg.c)
    for n in range(1, nsteps + 1):
        u = step(u)
        if n % cfg.record_every == 0 or n == nsteps:
            _check_finite(u, n * dt)
            trace.record(op, n * dt, u, cfg.p_list)
    return trace


def _check_finite(u, t):
    if not np.all(np.isfinite(u)):
        raise DriftlapError(f"non-finite solution at t = {t:.6g}")


class DecayVerdict(NamedTuple):
    p: float
    passed: bool
    worst_margin: float
    worst_time: float
    tol: float


def decay_bound(t, p, K, c):
    """Growth factor ``exp(p (K - c) t)`` allowed for the L^p gradient energy."""
    return np.exp(p * (K - c) * np.asarray(t, dtype=float))


def verify_decay(trace: EnergyTrace, K: float, c: float, tol: float = 0.05) -> dict:
    """Check ``E_p(t) <= exp(p (K - c) t) E_p(0) (1 + tol)`` for every recorded p.

    The margin is the relative excess ``E_p(t) / (exp(p (K - c) t) E_p(0)) - 1``,
    maximized over recorded t > 0; a run passes when it is at most ``tol``.
    """
    if not trace.c_is_constant:
        raise ValueError("decay bounds only hold for constant c")
    if not np.isclose(float(trace.c), c):
        raise ValueError(f"trace was produced with c = {float(trace.c)}, not {c}")
    times, E = trace.as_arrays()
    verdicts = {}
    for p, e in E.items():
        if not e[0] > 0:
            raise ValueError(f"E_{p:g}(0) is zero; nothing to verify")
        allowed = decay_bound(times, p, K, c) * e[0]
        margin = e / allowed - 1.0
        sel = np.arange(1, len(times)) if len(times) > 1 else np.arange(1)
        i = int(sel[np.argmax(margin[sel])])
        worst = float(margin[i])
        verdicts[p] = DecayVerdict(p, worst <= tol, worst, float(times[i]), tol)
    return verdicts


def trace_rows(trace: EnergyTrace, K: float | None = None, c: float | None = None) -> tuple[list, list]:
    """Header and rows for the energy-trace CSV, with bound columns when K is given."""
    times, E = trace.as_arrays()
    ps = sorted(E)
    header = ["time"] + [f"E_{p:g}" for p in ps] + ["weighted_mean", "weighted_l2"]
    if K is not None:
        header += [f"bound_{p:g}" for p in ps]
    rows = []
    for i, t in enumerate(times):
        row = [t] + [E[p][i] for p in ps] + [trace.weighted_means[i], trace.weighted_l2[i]]
        if K is not None:
            row += [float(decay_bound(t, p, K, c) * E[p][0]) for p in ps]
        rows.append(row)
    return header, rows


def random_mean_zero(op: WeightedOperator, rng: np.random.Generator) -> np.ndarray:
    """Standard-normal vertex values projected to weighted mean zero."""
    u = rng.standard_normal(op.vertex_count)
    return u - weighted_mean(op, u)
