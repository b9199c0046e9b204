"""Discrete drifting Laplacian under the weighted measure ``exp(-f) dA``.

The operator is stored as the pair ``(S, M)``: ``S`` is the weighted cotangent
stiffness matrix and ``M`` the lumped weighted mass matrix, so that
``u' S v ~ int grad u . grad v exp(-f) dA`` and ``u' M v ~ int u v exp(-f) dA``.
The drifting Laplacian ``L_f u = lap u - grad f . grad u`` is ``-M^{-1} S u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError
from .mesh import TriangleMesh, triangle_cotangents, validate

# exp(-f) overflows double precision a little beyond this
MAX_ABS_POTENTIAL = 700.0


@dataclass(frozen=True, eq=False)
class Potential:
    values: np.ndarray
    descriptor: str | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise AssemblyError("potential has non-finite values")
        if v.size and np.max(np.abs(v)) > MAX_ABS_POTENTIAL:
            raise AssemblyError(
                f"potential range exceeds +/-{MAX_ABS_POTENTIAL:g}; exp(-f) is not representable"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, mesh: TriangleMesh) -> "Potential":
        return cls(np.zeros(mesh.vertex_count), "zero")

    def shifted(self, c: float) -> "Potential":
        return Potential(self.values + c, self.descriptor)


@dataclass(frozen=True, eq=False)
class WeightedOperator:
    stiffness: sp.csr_matrix
    mass: np.ndarray  # lumped diagonal
    mesh: TriangleMesh
    potential: Potential
    triangle_weights: np.ndarray = field(repr=False)  # w_T * Area_T
    # per-triangle gradient data: grad u on T = du[:, :2] @ gradient_map[T]
    _gram_inverse: np.ndarray = field(repr=False)

    @property
    def vertex_count(self) -> int:
        return self.mesh.vertex_count

    @property
    def mass_matrix(self) -> sp.dia_matrix:
        return sp.diags(self.mass)

    def total_weight(self) -> float:
        return float(self.mass.sum())


def _check_values(op_or_mesh, u):
    n = op_or_mesh.vertex_count
    u = np.asarray(u, dtype=float)
    if u.shape[0] != n:
        raise ValueError(f"expected {n} per-vertex values, got {u.shape[0]}")
    return u


def _gram_inverses(mesh):
    e1, e2 = mesh.edge_vectors()
    g11 = np.einsum("ij,ij->i", e1, e1)
    g12 = np.einsum("ij,ij->i", e1, e2)
    g22 = np.einsum("ij,ij->i", e2, e2)
    det = g11 * g22 - g12 * g12
    inv = np.empty((len(det), 2, 2))
    inv[:, 0, 0] = g22 / det
    inv[:, 1, 1] = g11 / det
    inv[:, 0, 1] = inv[:, 1, 0] = -g12 / det
    return inv


def assemble(mesh: TriangleMesh, f: Potential | None = None) -> WeightedOperator:
    """Assemble the weighted stiffness and lumped mass matrices.

    Each triangle contributes its cotangent stiffness and one third of its area to
    each corner, scaled by ``w_T``, the average of ``exp(-f)`` over its corners.
    """
    if f is None:
        f = Potential.zero(mesh)
    if len(f.values) != mesh.vertex_count:
        raise AssemblyError(
            f"potential has {len(f.values)} values for {mesh.vertex_count} vertices"
        )
    diag = validate(mesh)
    if not diag.is_closed:
        raise AssemblyError(f"mesh is not closed ({diag.boundary_edge_count} boundary edges)")
    if not diag.is_oriented:
        raise AssemblyError("mesh orientation is inconsistent")

    areas, cot = triangle_cotangents(mesh)
    t = mesh.triangles
    vertex_weight = np.exp(-f.values)
    w = vertex_weight[t].mean(axis=1)
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise AssemblyError("non-finite or non-positive triangle weight")

    # edge (i, j) opposite corner k gets -w cot_k / 2
    i = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    j = np.concatenate([t[:, 2], t[:, 0], t[:, 1]])
    off = -0.5 * np.concatenate([w * cot[:, 0], w * cot[:, 1], w * cot[:, 2]])
    n = mesh.vertex_count
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    vals = np.concatenate([off, off, -off, -off])
    S = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    S.sum_duplicates()

    weighted_areas = w * areas
    mass = np.bincount(t.ravel(), weights=np.repeat(weighted_areas / 3.0, 3), minlength=n)
    if np.any(mass <= 0):
        raise AssemblyError("vertex with zero lumped mass (unreferenced vertex?)")
    return WeightedOperator(S, mass, mesh, f, weighted_areas, _gram_inverses(mesh))


def apply_drifting_laplacian(op: WeightedOperator, u) -> np.ndarray:
    """Discrete ``L_f u = -M^{-1} S u``."""
    u = _check_values(op, u)
    return -(op.stiffness @ u) / (op.mass if u.ndim == 1 else op.mass[:, None])


def gradient_vectors(mesh: TriangleMesh, u, gram_inverse=None) -> np.ndarray:
    """Per-triangle gradient of the piecewise-linear interpolant, as ambient 3-vectors."""
    u = _check_values(mesh, u)
    if gram_inverse is None:
        gram_inverse = _gram_inverses(mesh)
    t = mesh.triangles
    e1, e2 = mesh.edge_vectors()
    d = np.stack([u[t[:, 1]] - u[t[:, 0]], u[t[:, 2]] - u[t[:, 0]]], axis=1)
    a = np.einsum("tij,tj->ti", gram_inverse, d)
    return a[:, :1] * e1 + a[:, 1:] * e2


def gradient_norms(mesh: TriangleMesh, u, gram_inverse=None) -> np.ndarray:
    """Per-triangle ``|grad u|`` of the linear interpolant (exact for linear data)."""
    u = _check_values(mesh, u)
    if gram_inverse is None:
        gram_inverse = _gram_inverses(mesh)
    t = mesh.triangles
    d = np.stack([u[t[:, 1]] - u[t[:, 0]], u[t[:, 2]] - u[t[:, 0]]], axis=1)
    sq = np.einsum("ti,tij,tj->t", d, gram_inverse, d)
    return np.sqrt(np.maximum(sq, 0.0))


def energy(op: WeightedOperator, u, p: float) -> float:
    """Weighted gradient energy ``sum_T w_T Area_T |grad u|_T^p``."""
    if not p >= 1:
        raise ValueError(f"energy exponent must be >= 1, got {p}")
    g = gradient_norms(op.mesh, u, op._gram_inverse)
    return float(np.dot(op.triangle_weights, g**p))


def energies(op: WeightedOperator, u, p_list) -> dict[float, float]:
    """Several exponents at once, sharing one gradient evaluation."""
    g = gradient_norms(op.mesh, u, op._gram_inverse)
    out = {}
    for p in p_list:
        if not p >= 1:
            raise ValueError(f"energy exponent must be >= 1, got {p}")
        out[p] = float(np.dot(op.triangle_weights, g**p))
    return out


def weighted_mean(op: WeightedOperator, u) -> float:
    u = _check_values(op, u)
    return float(np.dot(op.mass, u) / op.mass.sum())


def weighted_norm_sq(op: WeightedOperator, u) -> float:
    u = _check_values(op, u)
    return float(np.dot(op.mass * u, u))


def read_vertex_csv(path) -> np.ndarray:
    """Read per-vertex values, one per line."""
    return np.atleast_1d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=1))


def write_vertex_csv(path, values) -> None:
    np.savetxt(path, np.asarray(values, dtype=float).reshape(-1), fmt="%.17g")
