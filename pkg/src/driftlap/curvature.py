"""Analytic test surfaces with closed-form Bakry-Emery tensor ``Ric + Hess f``.

Each catalog surface reduces to a one-parameter family along which the tensor
and ``|grad f|^2`` vary, so the infima in the curvature conditions are taken by a
dense scan of that parameter.

Closed forms used below:

* Round sphere of radius r in dimension n: ``Ric = (n - 1)/r^2 g``.  For the
  restriction of a linear function ``l(x) = <v, x>``, ``Hess l = -(l / r^2) g``
  and ``|grad l|^2 = |v|^2 - l^2 / r^2``.  With ``f = a x_3 = a r s`` where
  ``s = x_3 / r`` this gives ``Ric + Hess f = ((n - 1)/r^2 - a s / r) g`` and
  ``|grad f|^2 = a^2 (1 - s^2)``.
* Flat torus with ``f = beta cos(k u)``, ``k = 2 pi / Lu``: ``Ric = 0``,
  ``Hess f = diag(-beta k^2 cos(k u), 0)`` and ``|grad f|^2 = beta^2 k^2 sin^2(k u)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import BoundUnavailableError
from .mesh import TriangleMesh, generate_flat_torus, generate_icosphere
from .weighted import Potential

DEFAULT_SAMPLES = 10_000
MIN_SAMPLES = 1000


@dataclass(frozen=True)
class SphereLinear:
    """Sphere of radius ``radius`` with potential ``f = slope * x_3``."""

    radius: float = 1.0
    slope: float = 0.0
    dimension: int = field(default=2, init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    kind = "sphere_linear"

    def parameter_grid(self, samples: int) -> np.ndarray:
        return np.linspace(-1.0, 1.0, samples)

    def min_eig(self, s):
        n, r = self.dimension, self.radius
        return (n - 1) / r**2 - self.slope * np.asarray(s) / r

    def grad_f_sq(self, s):
        s = np.asarray(s)
        return self.slope**2 * (1.0 - s**2)

    def potential_values(self, mesh: TriangleMesh) -> np.ndarray:
        return self.slope * mesh.vertices[:, 2]

    def make_mesh(self, subdivisions: int) -> TriangleMesh:
        return generate_icosphere(subdivisions, self.radius)

    def params(self) -> dict:
        return {"kind": self.kind, "radius": self.radius, "slope": self.slope}


@dataclass(frozen=True)
class TorusCosine:
    """Flat torus ``[0, Lu) x [0, Lv)`` with potential ``f = amplitude * cos(2 pi u / Lu)``."""

    Lu: float = 2 * np.pi
    Lv: float = 2 * np.pi
    amplitude: float = 1.0
    dimension: int = field(default=2, init=False)

    def __post_init__(self):
        if not (self.Lu > 0 and self.Lv > 0):
            raise ValueError("periods must be positive")

    kind = "torus_cosine"

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.Lu

    def parameter_grid(self, samples: int) -> np.ndarray:
        return np.linspace(0.0, self.Lu, samples, endpoint=False)

    def min_eig(self, u):
        k = self.wavenumber
        return np.minimum(-self.amplitude * k**2 * np.cos(k * np.asarray(u)), 0.0)

    def grad_f_sq(self, u):
        k = self.wavenumber
        return (self.amplitude * k) ** 2 * np.sin(k * np.asarray(u)) ** 2

    def potential_values(self, mesh: TriangleMesh) -> np.ndarray:
        return self.amplitude * np.cos(self.wavenumber * mesh.vertices[:, 0])

    def make_mesh(self, nu: int, nv: int | None = None) -> TriangleMesh:
        return generate_flat_torus(nu, nu if nv is None else nv, self.Lu, self.Lv)

    def params(self) -> dict:
        return {"kind": self.kind, "Lu": self.Lu, "Lv": self.Lv, "amplitude": self.amplitude}


AnalyticSurface = SphereLinear | TorusCosine


def surface_potential(surface: AnalyticSurface, mesh: TriangleMesh) -> Potential:
    return Potential(surface.potential_values(mesh), descriptor=surface.kind)


class ConditionReport(NamedTuple):
    z: float
    A: float
    K: float
    bound: float | None
    satisfiable: bool
    argmin_location: float
    samples_used: int

    def as_dict(self) -> dict:
        return self._asdict()


def _check_samples(samples):
    if samples < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {samples}")


def _condition2_scan(surface, z, samples):
    if not z > 0:
        raise ValueError(f"z must be positive, got {z}")
    _check_samples(samples)
    x = surface.parameter_grid(samples)
    g = surface.min_eig(x) - surface.grad_f_sq(x) / (surface.dimension * z)
    i = int(np.argmin(g))
    return float(g[i]), float(x[i])


def condition2_A(surface: AnalyticSurface, z: float, samples: int = DEFAULT_SAMPLES) -> float:
    """Largest A with ``Ric + Hess f >= |grad f|^2/(n z) + A`` on the sample grid."""
    return _condition2_scan(surface, z, samples)[0]


def condition4_K(surface: AnalyticSurface, samples: int = DEFAULT_SAMPLES) -> float:
    """Tight K with ``Ric + Hess f >= -K``; negative K means the tensor is positive."""
    _check_samples(samples)
    return float(-np.min(surface.min_eig(surface.parameter_grid(samples))))


def theorem1_bound(n: int, z: float, A: float) -> float:
    """Eigenvalue lower bound ``n (z + 1) A / (n (z + 1) - 1)``."""
    if not A > 0:
        raise BoundUnavailableError(f"bound needs A > 0, got A = {A}")
    if not z > 0:
        raise ValueError(f"z must be positive, got {z}")
    q = n * (z + 1.0)
    if not q > 1:
        raise ValueError("n (z + 1) must exceed 1")
    return q * A / (q - 1.0)


def classical_lichnerowicz(n: int, k: float) -> float:
    """``lambda_1 >= n k`` when ``Ric >= (n - 1) k``."""
    if n < 2:
        raise ValueError("dimension must be >= 2")
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    return n * k


def condition_report(surface: AnalyticSurface, z: float, samples: int = DEFAULT_SAMPLES) -> ConditionReport:
    A, where = _condition2_scan(surface, z, samples)
    K = condition4_K(surface, samples)
    ok = A > 0
    bound = theorem1_bound(surface.dimension, z, A) if ok else None
    return ConditionReport(float(z), A, K, bound, ok, where, samples)


class BoundSearch(NamedTuple):
    best_z: float | None
    best_bound: float | None
    reports: list


def optimize_bound(surface: AnalyticSurface, z_grid, samples: int = DEFAULT_SAMPLES) -> BoundSearch:
    """Strongest eigenvalue bound over a grid of z values."""
    z_grid = [float(z) for z in z_grid]
    if not z_grid:
        raise ValueError("empty z grid")
    reports = [condition_report(surface, z, samples) for z in z_grid]
    best = None
    for rep in reports:
        if rep.satisfiable and (best is None or rep.bound > best.bound):
            best = rep
    if best is None:
        return BoundSearch(None, None, reports)
    return BoundSearch(best.z, best.bound, reports)


def z_grid(count: int, z_min: float, z_max: float, log: bool = True) -> np.ndarray:
    if count < 1 or not (0 < z_min <= z_max):
        raise ValueError("z grid needs count >= 1 and 0 < z_min <= z_max")
    if log:
        return np.geomspace(z_min, z_max, count)
    return np.linspace(z_min, z_max, count)


def sweep_rows(search: BoundSearch) -> list[dict]:
    """Rows for the z-sweep CSV (columns z, A, K, bound, satisfiable)."""
    return [
        {"z": r.z, "A": r.A, "K": r.K, "bound": r.bound, "satisfiable": r.satisfiable}
        for r in search.reports
    ]
