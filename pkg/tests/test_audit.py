import math

import numpy as np
import pytest

from satnls.audit import (AuditResult, lemma_bounds, positivity_closed_form,
                          positivity_expression, radius_condition,
                          results_to_json, symmetry_audit, uniqueness_probe)
from satnls.gauge import SelfSimilarParams, profile_spec
from satnls.mesh import ComplexGridFn, DIRICHLET, build_mesh
from satnls.solver import ProblemSpec, SolveConfig, solve_saturated

from scenarios import gaussian_core


def solved(spec, schedule=(1, 2, 4, 8, 16, 32)):
    return solve_saturated(spec, SolveConfig(n_schedule=schedule))


def make_spec(mesh, a, b, v_vals=None, f=None):
    V = ComplexGridFn(mesh, v_vals) if v_vals is not None else ComplexGridFn.zeros(mesh)
    F = f if f is not None else ComplexGridFn.zeros(mesh)
    return ProblemSpec(a=a, b=b, V=V, F=F, mesh=mesh)


def forcing(mesh, amp=2.0):
    x = mesh.dof_coords
    return ComplexGridFn(mesh, amp * (1 + 0.4j) * np.exp(-((x - 0.5 * (mesh.x_lo + mesh.x_hi)) / 0.4) ** 2))


def test_lemma_bounds_zero_solution_all_pass():
    mesh = build_mesh("interval", 1, (0.0, 2.0), 48, DIRICHLET)
    spec = make_spec(mesh, a=1.0 - 0.5j, b=0.5 - 1.0j)
    rep = solved(spec)
    for res in lemma_bounds(rep, spec):
        assert res.satisfied, res
        if "skipped" not in res.details:
            assert res.margin == pytest.approx(res.rhs, abs=1e-12)


def test_lemma_bounds_gating():
    mesh = build_mesh("interval", 1, (0.0, 2.0), 64, DIRICHLET)
    # Re(b) >= 0, real nonnegative V: first bound applies, second skipped
    spec = make_spec(mesh, a=1.0 - 0.5j, b=0.5 - 1.2j,
                     v_vals=0.2 * np.ones(mesh.num_dofs, dtype=complex),
                     f=forcing(mesh))
    rep = solved(spec)
    res = {r.name: r for r in lemma_bounds(rep, spec)}
    assert "skipped" not in res["gradient-bound/nonnegative-coefficients"].details
    assert "skipped" in res["gradient-bound/small-negative-real-part"].details
    assert all(r.satisfied for r in res.values())


def test_lemma_bounds_negative_real_part_branch():
    mesh = build_mesh("interval", 1, (0.0, 2.0), 64, DIRICHLET)
    from satnls.mesh import poincare_constant

    c_p = poincare_constant(mesh)["C_P"]
    b = complex(-0.4 / c_p ** 2, -1.0)
    spec = make_spec(mesh, a=1.0 - 0.5j, b=b, f=forcing(mesh))
    rep = solved(spec)
    res = {r.name: r for r in lemma_bounds(rep, spec)}
    branch = res["gradient-bound/small-negative-real-part"]
    assert "skipped" not in branch.details
    assert branch.satisfied


def test_lemma_bounds_imaginary_coupling_and_levels():
    mesh = build_mesh("interval", 1, (0.0, 2.5), 96, DIRICHLET)
    v = (0.3 - 0.4j) * np.exp(-mesh.dof_coords)
    spec = make_spec(mesh, a=0.8 - 0.7j, b=0.2 - 1.4j, v_vals=v, f=forcing(mesh, amp=3.0))
    rep = solved(spec)
    results = lemma_bounds(rep, spec)
    names = [r.name for r in results]
    assert any(n.startswith("l2-bound/imaginary-coupling") for n in names)
    assert any(n.startswith("h1-l1-bound/dual-norm[n=") for n in names)
    for r in results:
        assert r.satisfied, r


def test_results_serialize_to_json():
    import json

    mesh = build_mesh("interval", 1, (0.0, 2.0), 32, DIRICHLET)
    spec = make_spec(mesh, a=1.0 - 0.5j, b=0.5 - 1.0j)
    rep = solved(spec)
    blob = json.dumps(results_to_json(lemma_bounds(rep, spec)))
    parsed = json.loads(blob)
    assert all("provenance" in item for item in parsed)


# ---------------------------------------------------------------------------
# symmetry


def test_symmetry_rotation_radial_exact():
    mesh = build_mesh("radial", 3, (0.0, 2.0), 32, DIRICHLET)
    spec = make_spec(mesh, a=1.0 - 0.5j, b=0.3 - 1.0j, f=forcing(mesh))
    rep = solved(spec)
    res = symmetry_audit(rep, spec, transform="rotation")
    assert res.satisfied and res.lhs == 0.0


def test_symmetry_odd_pass():
    mesh = build_mesh("interval", 1, (-2.0, 2.0), 128, DIRICHLET)
    x = mesh.dof_coords
    bumps = np.exp(-((x - 0.8) / 0.25) ** 2) - np.exp(-((x + 0.8) / 0.25) ** 2)
    spec = make_spec(mesh, a=1.0 - 0.6j, b=0.1 - 1.2j,
                     v_vals=(x ** 2).astype(complex),
                     f=ComplexGridFn(mesh, 3.0 * (1 + 0.5j) * bumps))
    rep = solved(spec)
    res = symmetry_audit(rep, spec, transform="odd")
    assert "skipped" not in res.details
    assert res.satisfied


def test_symmetry_odd_gates():
    mesh = build_mesh("interval", 1, (-2.0, 2.0), 64, DIRICHLET)
    x = mesh.dof_coords
    even_f = ComplexGridFn(mesh, np.exp(-x ** 2).astype(complex))
    spec = make_spec(mesh, a=1.0 - 0.5j, b=0.5 - 1.0j, f=even_f)
    rep = solved(spec)
    res = symmetry_audit(rep, spec, transform="odd")
    assert res.details.get("skipped") == "forcing is not odd"

    odd_f = ComplexGridFn(mesh, (x * np.exp(-x ** 2)).astype(complex))
    spec2 = make_spec(mesh, a=1.0 - 0.5j, b=0.5 - 1.0j,
                      v_vals=x.astype(complex), f=odd_f)
    rep2 = solved(spec2)
    res2 = symmetry_audit(rep2, spec2, transform="odd")
    assert res2.details.get("skipped") == "potential is not even"

    asym_mesh = build_mesh("interval", 1, (0.0, 2.0), 64, DIRICHLET)
    spec3 = make_spec(asym_mesh, a=1.0 - 0.5j, b=0.5 - 1.0j)
    res3 = symmetry_audit(solved(spec3), spec3, transform="odd")
    assert "skipped" in res3.details


# ---------------------------------------------------------------------------
# uniqueness probe


def test_radius_condition_cases():
    params = SelfSimilarParams(p=2.0 + 1.0j, n_dim=1)
    ok, _ = radius_condition(-1j, params, r=100.0)
    assert ok                                    # Re(a) = 0 case
    ok2, why = radius_condition(1.0 - 1.0j, params, r=2.0)
    # bound: 8 Im(p) + 4 * 1 * 5 = 28 >= 4
    assert ok2 and "<=" in why
    ok3, _ = radius_condition(1.0 - 0.0j, SelfSimilarParams(p=2.0 + 0j, n_dim=1), r=1.0)
    assert not ok3                               # bound is 0 < r^2


def test_positivity_matches_closed_form():
    params = SelfSimilarParams(p=2.0 + 0.8j, n_dim=1)
    mesh = build_mesh("interval", 1, (-2.0, 2.0), 64, DIRICHLET)
    for a in (-1j, 0.7 - 0.9j):
        spec = profile_spec(params, ComplexGridFn.zeros(mesh), a, mesh)
        expr = positivity_expression(spec)
        closed = positivity_closed_form(spec, params)
        assert np.abs(expr - closed).max() < 1e-13


def test_positivity_pure_imaginary_a():
    # Re(a) = 0: the expression reduces to -Im(a)(N+4)/4 > 0 everywhere
    params = SelfSimilarParams(p=2.0 + 0j, n_dim=1)
    mesh = build_mesh("interval", 1, (-2.0, 2.0), 32, DIRICHLET)
    spec = profile_spec(params, ComplexGridFn.zeros(mesh), -1j, mesh)
    expr = positivity_expression(spec)
    assert np.allclose(expr, 5.0 / 4.0)


def test_uniqueness_probe_multistart_agreement():
    params = SelfSimilarParams(p=2.0 + 0j, n_dim=1)
    mesh = build_mesh("interval", 1, (-2.0, 2.0), 160, DIRICHLET)
    spec = profile_spec(params, gaussian_core(mesh, 2.5, 0.18), -1j, mesh)
    config = SolveConfig(n_schedule=(1, 4, 16, 64, 256, 1024), picard_tol=1e-10)
    res = uniqueness_probe(spec, params, r=1.6, trials=5, config=config, seed=7)
    assert res.satisfied, res
    assert res.details["radius_condition"]
    assert res.details["min_positivity"] > 0.0
    assert res.details["closed_form_deviation"] < 1e-13


def test_uniqueness_probe_rejects_escaping_support():
    params = SelfSimilarParams(p=2.0 + 0j, n_dim=1)
    mesh = build_mesh("interval", 1, (-2.0, 2.0), 120, DIRICHLET)
    spec = profile_spec(params, gaussian_core(mesh, 2.5, 0.18), -1j, mesh)
    config = SolveConfig(n_schedule=(1, 4, 16, 64, 256), picard_tol=1e-9)
    with pytest.raises(ValueError):
        uniqueness_probe(spec, params, r=0.3, trials=2, config=config)


def test_audit_result_check_invariant():
    res = AuditResult.check("x", 1.0, 2.0, "p")
    assert res.satisfied and res.margin == 1.0
    res2 = AuditResult.check("x", 3.0, 2.0, "p")
    assert not res2.satisfied
