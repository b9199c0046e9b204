import sys

import numpy as np
import pytest

from driftlap.mesh import generate_flat_torus, generate_icosphere
from driftlap.weighted import Potential, assemble


@pytest.fixture(scope="session")
def spheres():
    """Unit icospheres by subdivision level, built once per session."""
    cache = {}

    def get(level):
        if level not in cache:
            cache[level] = generate_icosphere(level, 1.0)
        return cache[level]

    return get


@pytest.fixture(scope="session")
def sphere_ops(spheres):
    cache = {}

    def get(level, slope=0.0):
        key = (level, slope)
        if key not in cache:
            m = spheres(level)
            cache[key] = assemble(m, Potential(slope * m.vertices[:, 2]))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def torus64():
    return generate_flat_torus(64, 64, 2 * np.pi, 2 * np.pi)


MESH_MATRIX = [
    ("icosphere1", lambda: generate_icosphere(1, 1.0)),
    ("icosphere3", lambda: generate_icosphere(3, 1.0)),
    ("icosphere2_r2", lambda: generate_icosphere(2, 2.0)),
    ("torus8", lambda: generate_flat_torus(8, 8, 1.0, 1.0)),
    ("torus12x9", lambda: generate_flat_torus(12, 9, 2 * np.pi, 3.0)),
]


def potentials_for(mesh, rng):
    """Zero, smooth and rough potentials on ``mesh``."""
    if mesh.periods is None:
        smooth = 0.7 * mesh.vertices[:, 2] - 0.3 * mesh.vertices[:, 0] ** 2
    else:
        smooth = np.cos(2 * np.pi * mesh.vertices[:, 0] / mesh.periods[0])
    return {
        "zero": np.zeros(mesh.vertex_count),
        "smooth": smooth,
        "rough": rng.uniform(-2, 2, mesh.vertex_count),
    }


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
