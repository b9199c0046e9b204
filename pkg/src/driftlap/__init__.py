"""Drifting Laplacian spectra and weighted heat flow on closed triangle meshes."""

__version__ = "0.1.0"

from .curvature import (
    SphereLinear,
    TorusCosine,
    classical_lichnerowicz,
    condition2_A,
    condition4_K,
    optimize_bound,
    theorem1_bound,
)
from .heatflow import HeatConfig, evolve, spectral_evolve, step_implicit_euler, verify_decay
from .mesh import TriangleMesh, generate_flat_torus, generate_icosphere, load_off, validate, write_off
from .spectral import first_positive_eigenvalue, rayleigh_quotient, smallest_eigenpairs
from .weighted import Potential, WeightedOperator, apply_drifting_laplacian, assemble, energy, weighted_mean

__all__ = [
    "HeatConfig",
    "Potential",
    "SphereLinear",
    "TorusCosine",
    "TriangleMesh",
    "WeightedOperator",
    "apply_drifting_laplacian",
    "assemble",
    "classical_lichnerowicz",
    "condition2_A",
    "condition4_K",
    "energy",
    "evolve",
    "first_positive_eigenvalue",
    "generate_flat_torus",
    "generate_icosphere",
    "load_off",
    "optimize_bound",
    "rayleigh_quotient",
    "smallest_eigenpairs",
    "spectral_evolve",
    "step_implicit_euler",
    "theorem1_bound",
    "validate",
    "verify_decay",
    "weighted_mean",
    "write_off",
]
