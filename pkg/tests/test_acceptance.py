"""Acceptance criteria, each at its stated tolerance.

Every criterion prints one ``ACCEPTANCE <n> PASS|FAIL: ...`` line (collected into
the pytest terminal summary as well) and then asserts. Run on its own with

    pytest tests/test_acceptance.py -v
    python tests/test_acceptance.py
"""

import json
import sys
import time

import numpy as np
import pytest

from conftest import MESH_MATRIX, potentials_for
from driftlap.curvature import (
    SphereLinear,
    TorusCosine,
    condition2_A,
    condition4_K,
    surface_potential,
    theorem1_bound,
    z_grid,
)
from driftlap.experiments import (
    NOT_APPLICABLE,
    PASS,
    ExperimentConfig,
    convergence_study,
    run_eigen_experiment,
    run_heat_experiment,
    run_mesh,
)
from driftlap.heatflow import SPECTRAL, HeatConfig, ImplicitEulerStepper, evolve, random_mean_zero, spectral_evolve
from driftlap.mesh import generate_flat_torus, generate_icosphere
from driftlap.reporting import dumps_report
from driftlap.spectral import first_positive_eigenvalue, smallest_eigenpairs
from driftlap.weighted import Potential, assemble, energy, weighted_mean, weighted_norm_sq

RESULTS = {}


def _record(n, ok, detail):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS[n] = line
    print(line)
    return ok


_cache = {}


def _sphere4():
    """Criterion-1 problem: f = 0 on the subdivision-4 unit icosphere, with timing."""
    if "s4" not in _cache:
        t0 = time.perf_counter()
        mesh = generate_icosphere(4, 1.0)
        op = assemble(mesh)
        first = first_positive_eigenvalue(op)
        eig = smallest_eigenpairs(op, 5)
        _cache["s4"] = (mesh, op, first, eig, time.perf_counter() - t0)
    return _cache["s4"]


def criterion_1():
    mesh, _, first, eig, elapsed = _sphere4()
    cluster = eig.eigenvalues[1:4]
    spread = cluster.max() / cluster.min() - 1
    ok = (
        mesh.vertex_count == 2562
        and abs(first.lambda1 - 2.0) <= 0.01 * 2.0
        and spread <= 0.01
        and elapsed < 60
    )
    return _record(1, ok, f"V={mesh.vertex_count} lambda1={first.lambda1:.6f} (target 2 +-1%), "
                          f"cluster={np.round(cluster, 6).tolist()} spread={spread:.2e}, {elapsed:.2f}s (<60s)")


def criterion_2():
    b = theorem1_bound(2, 1e-9, 1.0)
    lam1 = _sphere4()[2].lambda1
    ok = abs(b - 2.0) <= 1e-5 and lam1 >= 2 * (1 - 0.02)
    return _record(2, ok, f"theorem1_bound(2,1e-9,1)={b:.9f} (|b-2|={abs(b - 2):.1e} <= 1e-5), "
                          f"lambda1={lam1:.6f} >= 1.96")


def criterion_3():
    mesh = generate_icosphere(4, 1.0)
    worst, checked = np.inf, 0
    for a in (0.25, 0.5, 0.75):
        surface = SphereLinear(1.0, a)
        lam1 = first_positive_eigenvalue(assemble(mesh, surface_potential(surface, mesh))).lambda1
        for z in (0.25, 0.5, 1.0, 2.0):
            A = condition2_A(surface, z)
            if A > 0:
                checked += 1
                worst = min(worst, lam1 / (theorem1_bound(2, z, A) * (1 - 0.02)))
    A05 = condition2_A(SphereLinear(1.0, 0.5), 1.0)
    ok = checked > 0 and worst >= 1 and abs(A05 - 0.5) <= 1e-4
    return _record(3, ok, f"{checked}/12 satisfiable cases, min lambda1/(0.98*bound)={worst:.4f} (>=1), "
                          f"A(a=0.5,z=1)={A05:.10f} (0.5 +-1e-4)")


def criterion_4():
    zs = z_grid(50, 1e-3, 1e2)
    details, ok = [], True
    for label, surface in (("TorusCosine(2pi,2pi,1)", TorusCosine(2 * np.pi, 2 * np.pi, 1.0)),
                           ("flat torus f=0", TorusCosine(2 * np.pi, 2 * np.pi, 0.0))):
        amax = max(condition2_A(surface, z) for z in zs)
        cfg = ExperimentConfig(surface="torus", amplitude=surface.amplitude, grid=(64, 64))
        d = run_eigen_experiment(cfg).data
        lam1 = d["eigen"]["lambda1"]
        good = amax <= 0 and d["theorem1"]["verdict"] == NOT_APPLICABLE and abs(lam1 - 1) <= 0.01
        ok &= good
        details.append(f"{label}: max A={amax:.3g}, verdict={d['theorem1']['verdict']!r}, lambda1={lam1:.6f}")
    return _record(4, ok, "; ".join(details))


def criterion_5():
    mesh, op, first, eig, _ = _sphere4()
    tr = evolve(op, first.eigenvector, HeatConfig(dt=0.01, t_end=1.0, integrator=SPECTRAL, record_every=1), eig)
    t, E = tr.as_arrays()
    rel = np.abs(E[2.0] / E[2.0][0] / np.exp(-2 * first.lambda1 * t) - 1).max()

    op3 = assemble(generate_icosphere(3, 1.0))
    full = smallest_eigenpairs(op3, op3.vertex_count)
    u0 = random_mean_zero(op3, np.random.default_rng(2))
    exact = spectral_evolve(op3, full, u0, 0.1)
    errs = []
    for dt in (2e-4, 1e-4, 5e-5):
        step = ImplicitEulerStepper(op3, dt)
        u = u0.copy()
        for _ in range(int(round(0.1 / dt))):
            u = step(u)
        errs.append(np.sqrt(weighted_norm_sq(op3, u - exact)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    ok = rel <= 1e-6 and bool(np.all((ratios >= 1.7) & (ratios <= 2.3)))
    return _record(5, ok, f"max |E2 ratio / exp(-2 lambda1 t) - 1|={rel:.2e} (<=1e-6) over {len(t)} times; "
                          f"implicit Euler error ratios={np.round(ratios, 3).tolist()} (in [1.7,2.3])")


def _heat_summary(rep):
    t2 = rep.data["theorem2"]
    margins = [v["worst_margin"] for run in t2["runs"] for v in run.values()]
    npass = sum(all(v["passed"] for v in run.values()) for run in t2["runs"])
    return t2, max(margins), npass


def criterion_6():
    common = dict(dt=1e-3, t_end=2.0, c=0.0, runs=10, seed=0, decay_tol=0.05, p_list=(1, 2, 3, 4))
    sphere = run_heat_experiment(ExperimentConfig(surface="sphere", slope=0.5, subdiv=4, **common))
    torus = run_heat_experiment(ExperimentConfig(surface="torus", amplitude=1.0, grid=(64, 64), **common))
    s2, s_margin, s_pass = _heat_summary(sphere)
    t2, t_margin, t_pass = _heat_summary(torus)
    ok = (
        abs(s2["K"] + 0.5) <= 1e-12 and abs(t2["K"] - 1.0) <= 1e-12
        and s2["verdict"] == PASS and t2["verdict"] == PASS
        and s_pass == 10 and t_pass == 10
    )
    return _record(6, ok, f"SphereLinear(1,0.5) K={s2['K']:g}: {s_pass}/10 runs pass p=1..4, worst margin={s_margin:.3g}; "
                          f"TorusCosine K={t2['K']:g}: {t_pass}/10 runs pass, worst margin={t_margin:.3g} (tol 0.05)")


def criterion_7():
    failures = []
    rng = np.random.default_rng(11)
    count = 0
    for name, make in MESH_MATRIX:
        mesh = make()
        for pname, f in potentials_for(mesh, rng).items():
            count += 1
            tag = f"{name}/{pname}"
            op = assemble(mesh, Potential(f))
            S = op.stiffness
            smax = abs(S).max()
            if abs(S - S.T).max() > 1e-12 * smax:
                failures.append(f"{tag}: S not symmetric")
            if np.abs(S @ np.ones(mesh.vertex_count)).max() > 1e-12 * smax:
                failures.append(f"{tag}: S*1 != 0")
            if not np.all(op.mass > 0):
                failures.append(f"{tag}: M not positive")
            shifted = assemble(mesh, Potential(f + 0.731))
            if (abs(shifted.stiffness - np.exp(-0.731) * S).max() > 1e-12 * smax
                    or np.abs(shifted.mass - np.exp(-0.731) * op.mass).max() > 1e-12 * op.mass.max()):
                failures.append(f"{tag}: shift scale law")
            for _ in range(20):
                u = rng.standard_normal(mesh.vertex_count)
                q = u @ (S @ u)
                if abs(energy(op, u, 2) - q) > 1e-10 * (1 + q):
                    failures.append(f"{tag}: E2 != u'Su")
                    break
            res = smallest_eigenpairs(op, 6)
            if np.any(res.residuals > res.tolerance_used):
                failures.append(f"{tag}: eigen residual certificate")
            U = res.eigenvectors
            if np.abs(U.T @ (op.mass[:, None] * U) - np.eye(6)).max() > 1e-8:
                failures.append(f"{tag}: M-orthonormality")
            step = ImplicitEulerStepper(op, 0.01, 0.0)
            u = rng.standard_normal(mesh.vertex_count) + 0.3
            for _ in range(10):
                nxt = step(u)
                m0, m1 = weighted_mean(op, u), weighted_mean(op, nxt)
                if abs(m1 - m0) > 1e-12 * max(abs(m0), np.abs(u).max()):
                    failures.append(f"{tag}: weighted mean drift {abs(m1 - m0):.1e}")
                    break
                u = nxt
    ok = not failures
    detail = f"{count} mesh/potential combinations, 8 invariants each"
    return _record(7, ok, detail + ("" if ok else "; failures: " + ", ".join(failures)))


def criterion_8():
    sphere = convergence_study(ExperimentConfig(surface="sphere", slope=0.0), [2, 3, 4]).data["convergence"]
    torus = convergence_study(ExperimentConfig(surface="torus", amplitude=0.0), [16, 32, 64]).data["convergence"]
    so, to = sphere["estimated_order"], torus["estimated_order"]
    s_ok, t_ok = 1.7 <= so <= 2.3, 1.7 <= to <= 2.3
    errs = ", ".join(f"{r['error']:.2e}" for r in sphere["rows"])
    return _record(8, s_ok and t_ok,
                   f"sphere levels 2,3,4 order={so:.3f} ({'ok' if s_ok else 'outside [1.7,2.3]'}; errors {errs}); "
                   f"torus 16,32,64 order={to:.3f} ({'ok' if t_ok else 'outside [1.7,2.3]'})")


def criterion_9():
    experiments = {
        "mesh": lambda: run_mesh(ExperimentConfig(surface="torus", grid=(16, 16))),
        "eigs": lambda: run_eigen_experiment(ExperimentConfig(slope=0.5, subdiv=3), theorem1=False),
        "verify-thm1": lambda: run_eigen_experiment(ExperimentConfig(slope=0.5, subdiv=3)),
        "heat": lambda: run_heat_experiment(ExperimentConfig(slope=0.5, subdiv=3, t_end=0.5, runs=3, seed=42)),
        "converge": lambda: convergence_study(ExperimentConfig(surface="torus", amplitude=0.5), [8, 16, 32]),
    }
    same = []
    for name, run in experiments.items():
        a, b = run(), run()
        ja, jb = dumps_report(a, include_timings=False), dumps_report(b, include_timings=False)
        same.append(ja.encode() == jb.encode() and "error" not in json.loads(ja) and a.trace == b.trace)
    ok = all(same)
    return _record(9, ok, f"byte-identical report.json (timings excluded) for {sum(same)}/{len(same)} "
                          f"experiments: {', '.join(experiments)}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 10)])
def test_acceptance(criterion):
    assert criterion(), RESULTS.get(int(criterion.__name__.split("_")[1]))


if __name__ == "__main__":
    outcomes = [c() for c in CRITERIA]
    sys.exit(0 if all(outcomes) else 1)
