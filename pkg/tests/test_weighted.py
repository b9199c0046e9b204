import numpy as np
import pytest
import scipy.sparse as sp
from conftest import MESH_MATRIX, potentials_for
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from driftlap.errors import AssemblyError
from driftlap.mesh import TriangleMesh, generate_icosphere, load_off, total_area
from driftlap.weighted import (
    Potential,
    apply_drifting_laplacian,
    assemble,
    energies,
    energy,
    gradient_norms,
    read_vertex_csv,
    weighted_mean,
    write_vertex_csv,
)

# analytic surface integrals over the unit sphere, computed by quadrature
E2_X3 = quad(lambda t: 2 * np.pi * np.sin(t) ** 3, 0, np.pi)[0]  # int (1 - x3^2) dA = 8 pi / 3
E1_X3 = quad(lambda t: 2 * np.pi * np.sin(t) ** 2, 0, np.pi)[0]  # int sin(theta) dA = pi^2


def _matrix_cases():
    rng = np.random.default_rng(11)
    for name, make in MESH_MATRIX:
        mesh = make()
        for pname, f in potentials_for(mesh, rng).items():
            yield pytest.param(mesh, f, id=f"{name}-{pname}")


MATRIX = list(_matrix_cases())


@pytest.mark.parametrize("mesh, f", MATRIX)
def test_structural_invariants(mesh, f):
    op = assemble(mesh, Potential(f))
    S = op.stiffness
    smax = abs(S).max()
    assert abs(S - S.T).max() <= 1e-12 * smax
    assert np.linalg.norm(S @ np.ones(mesh.vertex_count)) <= 1e-12 * sp.linalg.norm(S)
    assert np.all(op.mass > 0)
    assert op.mass.sum() == pytest.approx(op.triangle_weights.sum(), rel=1e-13)
    # positive semidefinite: smallest eigenvalue of the symmetric matrix is ~0
    lam_min = np.linalg.eigvalsh(S.toarray())[0]
    assert lam_min >= -1e-10 * smax


@pytest.mark.parametrize("mesh, f", MATRIX)
def test_energy2_matches_quadratic_form(mesh, f):
    op = assemble(mesh, Potential(f))
    rng = np.random.default_rng(5)
    for _ in range(100):
        u = rng.standard_normal(mesh.vertex_count)
        q = u @ (op.stiffness @ u)
        assert abs(energy(op, u, 2) - q) <= 1e-10 * (1 + q)


@pytest.mark.parametrize("mesh, f", MATRIX)
def test_potential_shift_scale_law(mesh, f):
    c = 0.731
    a = assemble(mesh, Potential(f))
    b = assemble(mesh, Potential(f + c))
    scale = np.exp(-c)
    diff = (b.stiffness - scale * a.stiffness).toarray()
    assert np.abs(diff).max() <= 1e-12 * abs(a.stiffness).max()
    np.testing.assert_allclose(b.mass, scale * a.mass, rtol=1e-12)


def test_constant_potential_scales_matrices():
    m = generate_icosphere(2)
    a = assemble(m)
    b = assemble(m, Potential(np.full(m.vertex_count, 1.5)))
    np.testing.assert_allclose(b.stiffness.toarray(), np.exp(-1.5) * a.stiffness.toarray(), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(b.mass, np.exp(-1.5) * a.mass, rtol=1e-12)


def test_mass_trace_is_mesh_area(sphere_ops, spheres):
    op = sphere_ops(4)
    assert op.mass.sum() == pytest.approx(total_area(spheres(4)), rel=1e-13)
    assert op.mass.sum() == pytest.approx(4 * np.pi, rel=0.01)
    # refinement moves it closer
    assert abs(sphere_ops(3).mass.sum() - 4 * np.pi) > abs(op.mass.sum() - 4 * np.pi)


def test_assemble_refuses_open_mesh():
    tet = load_off("OFF\n4 3 0\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n")
    with pytest.raises(AssemblyError, match="not closed"):
        assemble(tet)


def test_potential_rejections():
    m = generate_icosphere(1)
    with pytest.raises(AssemblyError):
        Potential(np.full(m.vertex_count, np.nan))
    with pytest.raises(AssemblyError, match="700"):
        Potential(np.full(m.vertex_count, -800.0))
    with pytest.raises(AssemblyError):
        assemble(m, Potential(np.zeros(5)))


def test_apply_kernel(sphere_ops):
    op = sphere_ops(3, 0.5)
    u = np.full(op.vertex_count, 3.0)
    assert np.linalg.norm(apply_drifting_laplacian(op, u)) <= 1e-12 * np.linalg.norm(u)


def test_apply_length_mismatch(sphere_ops):
    with pytest.raises(ValueError):
        apply_drifting_laplacian(sphere_ops(1), np.ones(3))


def test_apply_is_negative_semidefinite(sphere_ops):
    op = sphere_ops(3, 0.5)
    rng = np.random.default_rng(2)
    for _ in range(10):
        u = rng.standard_normal(op.vertex_count)
        lhs = u @ (op.mass * -apply_drifting_laplacian(op, u))
        assert lhs == pytest.approx(u @ (op.stiffness @ u), rel=1e-12)
        assert lhs >= 0


def test_apply_on_x3_converges(sphere_ops, spheres):
    # L(x3) = -2 x3 on the unit sphere; the typical (median) vertex error is second order.
    # At the 12 valence-5 vertices the pointwise error stays O(1) but bounded.
    medians, maxima = [], []
    for level in (3, 4, 5):
        x3 = spheres(level).vertices[:, 2]
        err = np.abs(apply_drifting_laplacian(sphere_ops(level), x3) + 2 * x3)
        medians.append(np.median(err))
        maxima.append(err.max())
    ratios = np.array(medians[:-1]) / np.array(medians[1:])
    assert np.all((ratios > 3.5) & (ratios < 5.0)), ratios
    assert max(maxima) < 0.26


def test_gradient_of_constant_is_zero(spheres):
    m = spheres(2)
    assert np.all(gradient_norms(m, np.full(m.vertex_count, 2.0)) == 0)


def test_gradient_of_linear_function_on_planar_triangle():
    m = TriangleMesh(np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]]), [[0, 1, 2]])
    assert gradient_norms(m, [0.0, 1.0, 0.0])[0] == 1.0


def test_gradient_norms_of_x3(spheres):
    m = spheres(5)
    c = m.vertices[m.triangles].mean(axis=1)
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    expected = np.sqrt(1 - c[:, 2] ** 2)  # sin(theta) at the projected barycenter
    assert np.abs(gradient_norms(m, m.vertices[:, 2]) - expected).max() < 0.02


def test_energy_of_x3(sphere_ops, spheres):
    op = sphere_ops(5)
    x3 = spheres(5).vertices[:, 2]
    assert energy(op, x3, 2) == pytest.approx(E2_X3, rel=0.01)
    assert energy(op, x3, 1) == pytest.approx(E1_X3, rel=0.01)
    assert E2_X3 == pytest.approx(8 * np.pi / 3, rel=1e-12)
    assert E1_X3 == pytest.approx(np.pi**2, rel=1e-12)


@pytest.mark.parametrize("p", [1, 1.5, 2, 3, 4])
def test_energy_of_constant(sphere_ops, p):
    assert energy(sphere_ops(2, 0.5), np.ones(162), p) == 0


def test_energy_rejects_small_p(sphere_ops):
    with pytest.raises(ValueError):
        energy(sphere_ops(1), np.ones(42), 0.5)


def test_energies_batch_matches_single(sphere_ops):
    op = sphere_ops(2, 0.5)
    u = np.random.default_rng(0).standard_normal(op.vertex_count)
    batch = energies(op, u, [1, 2, 3])
    for p in (1, 2, 3):
        assert batch[p] == energy(op, u, p)


def test_weighted_mean(sphere_ops, spheres):
    op = sphere_ops(3)
    assert weighted_mean(op, np.full(op.vertex_count, 4.25)) == pytest.approx(4.25, rel=1e-15)
    for level in (1, 3, 4):
        assert abs(weighted_mean(sphere_ops(level), spheres(level).vertices[:, 2])) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5))
def test_weighted_mean_removal(seed, shift):
    op = _tilted_sphere()
    u = np.random.default_rng(seed).standard_normal(op.vertex_count) + shift
    m = weighted_mean(op, u)
    assert abs(weighted_mean(op, u - m)) <= 1e-12 * max(1.0, np.abs(u).max())


_cache = {}


def _tilted_sphere():
    if "op" not in _cache:
        m = generate_icosphere(2)
        _cache["op"] = assemble(m, Potential(0.8 * m.vertices[:, 0]))
    return _cache["op"]


def test_vertex_csv_roundtrip(tmp_path):
    v = np.random.default_rng(1).standard_normal(17)
    write_vertex_csv(tmp_path / "f.csv", v)
    np.testing.assert_array_equal(read_vertex_csv(tmp_path / "f.csv"), v)
