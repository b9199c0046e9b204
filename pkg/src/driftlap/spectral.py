"""Smallest eigenpairs of the generalized problem ``S u = lam M u``.

Because ``M`` is diagonal the problem is whitened exactly into the standard
symmetric problem ``M^{-1/2} S M^{-1/2} y = lam y``.  Small meshes use a dense
LAPACK solve; large ones use ARPACK in shift-invert mode followed by a
Rayleigh-Ritz clean-up so the returned vectors are M-orthonormal to rounding.
Every result carries a residual certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from .errors import ConvergenceError, ResolutionError
from .weighted import WeightedOperator

DEFAULT_TOL = 1e-8
DENSE_LIMIT = 1200  # vertices; above this the iterative path is used by default


@dataclass(frozen=True, eq=False)
class EigenResult:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # (V, k), M-orthonormal columns
    residuals: np.ndarray
    tolerance_used: float
    method: str

    @property
    def pairs(self):
        return [(float(lam), self.eigenvectors[:, i]) for i, lam in enumerate(self.eigenvalues)]

    def __len__(self):
        return len(self.eigenvalues)


def lambda_max_estimate(op: WeightedOperator) -> float:
    """Gershgorin bound on the largest generalized eigenvalue."""
    S = op.stiffness
    row_abs = np.asarray(abs(S).sum(axis=1)).ravel()
    return float(np.max(row_abs / op.mass))


def residuals(op: WeightedOperator, eigenvalues, eigenvectors) -> np.ndarray:
    """Relative residuals ``||S u - lam M u|| / ((lam + 1) ||u||_M)``.

    The residual vector is measured in the dual norm ``||r||_{M^{-1}}``, i.e. the
    Euclidean norm of the whitened residual.
    """
    U = np.asarray(eigenvectors).reshape(op.vertex_count, -1)
    lam = np.asarray(eigenvalues, dtype=float).reshape(-1)
    R = op.stiffness @ U - op.mass[:, None] * U * lam
    rnorm = np.sqrt(np.sum(R * R / op.mass[:, None], axis=0))
    unorm = np.sqrt(np.sum(op.mass[:, None] * U * U, axis=0))
    return rnorm / ((np.abs(lam) + 1.0) * unorm)


def _fix_signs(U):
    # deterministic sign: largest-magnitude entry positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def _dense(op, k):
    d = 1.0 / np.sqrt(op.mass)
    A = op.stiffness.toarray() * d[:, None] * d[None, :]
    A = 0.5 * (A + A.T)
    vals, Y = la.eigh(A, subset_by_index=(0, k - 1))
    return vals, Y * d[:, None]


def _rayleigh_ritz(op, U):
    Shat = U.T @ (op.stiffness @ U)
    Mhat = U.T @ (op.mass[:, None] * U)
    Shat = 0.5 * (Shat + Shat.T)
    Mhat = 0.5 * (Mhat + Mhat.T)
    vals, C = la.eigh(Shat, Mhat)
    return vals, U @ C


def _iterative(op, k, tol):
    lam_max = lambda_max_estimate(op)
    sigma = -1e-6 * lam_max
    n = op.vertex_count
    v0 = np.random.default_rng(0).standard_normal(n)
    # Lanczos can drop one copy of a degenerate cluster cut by k; a guard band
    # of extra pairs keeps the wanted ones interior to the converged set.
    m = min(n - 2, k + max(4, k // 2))
    try:
        vals, U = sla.eigsh(
            op.stiffness.tocsc(),
            k=m,
            M=op.mass_matrix.tocsc(),
            sigma=sigma,
            which="LM",
            v0=v0,
            tol=min(tol * 1e-3, 1e-10),
            maxiter=50_000,
        )
    except sla.ArpackNoConvergence as exc:
        best = residuals(op, exc.eigenvalues, exc.eigenvectors) if len(exc.eigenvalues) else None
        raise ConvergenceError(f"ARPACK did not converge for k={k}", residuals=best) from exc
    order = np.argsort(vals)[:k]
    return _rayleigh_ritz(op, U[:, order])


def smallest_eigenpairs(
    op: WeightedOperator, k: int, tol: float = DEFAULT_TOL, method: str = "auto"
) -> EigenResult:
    """The ``k`` smallest generalized eigenpairs with a residual certificate.

    ``method`` is ``"dense"``, ``"iterative"`` or ``"auto"``.
    """
    n = op.vertex_count
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if not 1e-12 <= tol <= 1e-2:
        raise ValueError(f"tol must be in [1e-12, 1e-2], got {tol}")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT or k >= n // 2 else "iterative"
    if method == "iterative" and k >= n - 1:
        method = "dense"
    if method == "dense":
        vals, U = _dense(op, k)
    elif method == "iterative":
        vals, U = _iterative(op, k, tol)
    else:
        raise ValueError(f"unknown method {method!r}")

    U = _fix_signs(U)
    res = residuals(op, vals, U)
    if np.any(res > tol):
        raise ConvergenceError(
            f"{method} solve missed tolerance {tol:g}: worst residual {res.max():.3g}",
            residuals=res,
        )
    return EigenResult(np.asarray(vals), U, res, tol, method)


def rayleigh_quotient(op: WeightedOperator, u) -> float:
    u = np.asarray(u, dtype=float)
    denom = float(np.dot(op.mass * u, u))
    if not denom > 0:
        raise ValueError("Rayleigh quotient of a vector with zero M-norm")
    return float(np.dot(u, op.stiffness @ u)) / denom


@dataclass(frozen=True, eq=False)
class FirstEigenpair:
    lambda1: float
    eigenvector: np.ndarray
    lambda0: float
    threshold: float


def zero_threshold(op: WeightedOperator, tol: float, lambda0: float) -> float:
    return max(tol, 1e3 * abs(lambda0), 1e-9 * lambda_max_estimate(op))


def first_positive_eigenvalue(
    op: WeightedOperator, tol: float = DEFAULT_TOL, method: str = "auto", max_k: int = 8
) -> FirstEigenpair:
    """Smallest eigenvalue clearly above the constant mode.

    The eigenvector is projected to weighted mean zero and scaled to ``u' M u = 1``.
    """
    n = op.vertex_count
    k = min(2, n)
    while True:
        res = smallest_eigenpairs(op, k, tol, method)
        lam0 = float(res.eigenvalues[0])
        threshold = zero_threshold(op, tol, lam0)
        above = np.flatnonzero(res.eigenvalues > threshold)
        if above.size:
            i = int(above[0])
            break
        if k >= min(n, max_k):
            raise ResolutionError(
                f"no eigenvalue above the zero-mode threshold {threshold:.3g} among the "
                f"{k} smallest; is the mesh connected?"
            )
        k = min(2 * k, n, max_k)
    u = res.eigenvectors[:, i].copy()
    u -= np.dot(op.mass, u) / op.mass.sum()
    u /= np.sqrt(np.dot(op.mass * u, u))
    return FirstEigenpair(float(res.eigenvalues[i]), u, lam0, threshold)


def eigenpairs_to_csv(result: EigenResult, path) -> None:
    """One eigenvector per column; the header row holds the eigenvalues."""
    header = ",".join("%.17g" % v for v in result.eigenvalues)
    np.savetxt(path, result.eigenvectors, delimiter=",", fmt="%.17g", header=header, comments="")


def eigenpairs_from_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        header = fh.readline()
    vals = np.array([float(x) for x in header.split(",")])
    vecs = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return vals, vecs
