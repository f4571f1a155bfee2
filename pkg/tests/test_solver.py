import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from oracles import newton_solve  # noqa: E402

from satnls.mesh import (ComplexGridFn, DIRICHLET, NEUMANN, build_mesh,
                         h1_norm, norms, poincare_constant)
from satnls.saturation import RegLevel, SectionPolicy
from satnls.solver import (EXPLICIT, FROZEN, ProblemSpec, SolveConfig,
                           apriori_audit, check_admissibility,
                           dual_norm_bounds, h1l1_bound_constant,
                           null_threshold, solve_regularized, solve_saturated,
                           weak_residual)


def zero_spec(mesh, a, b):
    z = ComplexGridFn.zeros(mesh)
    return ProblemSpec(a=a, b=b, V=z, F=z, mesh=mesh)


def smooth_forcing(mesh, rng, amplitude=1.0):
    x = mesh.dof_coords
    lo, hi = mesh.x_lo, mesh.x_hi
    vals = np.zeros(x.size, dtype=complex)
    for _ in range(2):
        c = lo + (hi - lo) * rng.uniform(0.25, 0.75)
        w = (hi - lo) * rng.uniform(0.08, 0.2)
        vals += (rng.normal() + 1j * rng.normal()) * np.exp(-((x - c) / w) ** 2)
    return ComplexGridFn(mesh, amplitude * vals)


def random_admissible_spec(rng):
    """Spec satisfying the complex-potential existence route together with
    the sign conditions that make the solution unique, so the iterative
    solver and the Newton oracle must land on the same field."""
    while True:
        kind = rng.choice(["interval", "radial"])
        bc = rng.choice([DIRICHLET, DIRICHLET, NEUMANN])
        cells = int(rng.integers(8, 16))
        if kind == "interval":
            mesh = build_mesh("interval", 1, (0.0, float(rng.uniform(1.0, 3.0))), cells, bc)
        else:
            mesh = build_mesh("radial", int(rng.integers(1, 4)),
                              (0.0, float(rng.uniform(1.0, 2.5))), cells, bc)
        sgn = -1.0 if rng.random() < 0.5 else 1.0
        a = complex(rng.uniform(0.2, 1.5), sgn * rng.uniform(0.0, 1.2))
        b = complex(rng.uniform(-0.2, 1.0), sgn * rng.uniform(0.4, 2.0))
        v_re = rng.uniform(0.0, 0.6, size=mesh.num_dofs)
        v_im = sgn * rng.uniform(0.0, 0.6, size=mesh.num_dofs)
        V = ComplexGridFn(mesh, v_re + 1j * v_im)
        F = smooth_forcing(mesh, rng, amplitude=rng.uniform(0.5, 3.0))
        spec = ProblemSpec(a=a, b=b, V=V, F=F, mesh=mesh)
        unique = (a.real >= 0.0 and
                  np.all((a * np.conj(b + V.values)).real >= 0.0))
        if unique and check_admissibility(spec).thm_complex_potential_applies:
            return spec


# ---------------------------------------------------------------------------
# admissibility and threshold


def test_admissibility_negative_real_a():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 8, DIRICHLET)
    rep = check_admissibility(zero_spec(mesh, a=-1.0 + 0j, b=1j))
    assert not rep.a_in_A
    assert not rep.thm_complex_potential_applies


def test_admissibility_profile_sign_check():
    # with b = -i(N+2p)/4 = -5i/4 the coupling Im(a)Im(b) >= 0 fails for a=i
    # and holds for a=-i
    mesh = build_mesh("interval", 1, (-2.0, 2.0), 16, DIRICHLET)
    x = mesh.dof_coords
    V = ComplexGridFn(mesh, -(x ** 2) / 16.0)
    F = ComplexGridFn.zeros(mesh)
    b = -1.25j
    bad = ProblemSpec(a=1j, b=b, V=V, F=F, mesh=mesh)
    good = ProblemSpec(a=-1j, b=b, V=V, F=F, mesh=mesh)
    assert not check_admissibility(bad).thm_complex_potential_applies
    assert check_admissibility(good).thm_complex_potential_applies


def test_admissibility_finite_measure_route():
    mesh = build_mesh("interval", 1, (0.0, 2.0), 32, DIRICHLET)
    c_p = poincare_constant(mesh)["C_P"]
    x = mesh.dof_coords
    V = ComplexGridFn(mesh, (x ** 2).astype(complex))
    F = ComplexGridFn.zeros(mesh)
    spec = ProblemSpec(a=0.5 + 0j, b=complex(-0.5 / c_p ** 2, 0.0), V=V, F=F, mesh=mesh)
    rep = check_admissibility(spec)
    assert rep.b_in_B and rep.thm_finite_measure_applies


def test_null_threshold_reference_value():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 8, DIRICHLET)
    assert null_threshold(zero_spec(mesh, a=1.0 + 0j, b=1j)) == pytest.approx(2.0)


def test_null_threshold_rejects_bad_coefficients():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 8, DIRICHLET)
    with pytest.raises(ArithmeticError):
        null_threshold(zero_spec(mesh, a=-1.0 + 0j, b=1j))
    with pytest.raises(ValueError):
        null_threshold(zero_spec(mesh, a=1.0 + 0j, b=1.0 + 0j))


# ---------------------------------------------------------------------------
# oracle equivalence


@pytest.mark.parametrize("linearization", [FROZEN, EXPLICIT])
def test_oracle_equivalence_20_random_specs(linearization):
    rng = np.random.default_rng(2024)
    config = SolveConfig(picard_tol=1e-13, picard_max_iters=8000,
                         linearization=linearization)
    for trial in range(20):
        spec = random_admissible_spec(rng)
        n = int(rng.choice([2, 4, 8]))
        delta = 0 if spec.mesh.bc == DIRICHLET else 1
        reg = RegLevel(n, delta)
        u_it, trace = solve_regularized(spec, reg, config, full_output=True)
        assert trace.converged, f"trial {trial} did not converge"
        u_or = newton_solve(spec, reg)
        scale = max(float(np.linalg.norm(u_or.values)), 1e-30)
        rel = float(np.linalg.norm(u_it.values - u_or.values)) / scale
        assert rel <= 1e-8, f"trial {trial}: {rel:.2e}"


def test_zero_forcing_fixed_point():
    mesh = build_mesh("interval", 1, (0.0, 2.0), 16, DIRICHLET)
    spec = zero_spec(mesh, a=1.0 - 0.4j, b=-0.7j)
    u, trace = solve_regularized(spec, RegLevel(4), SolveConfig(), full_output=True)
    assert trace.converged and trace.iterations == 1
    assert np.all(u.values == 0)


def test_nonconvergence_is_flagged():
    rng = np.random.default_rng(5)
    spec = random_admissible_spec(rng)
    config = SolveConfig(picard_tol=1e-15, picard_max_iters=2)
    _, trace = solve_regularized(spec, RegLevel(4, 0 if spec.mesh.bc == DIRICHLET else 1),
                                 config, full_output=True)
    assert not trace.converged


def test_linear_breakdown_raises():
    # a = 0 removes the saturating shift: pure Neumann Laplacian is singular
    mesh = build_mesh("interval", 1, (0.0, 1.0), 8, NEUMANN)
    z = ComplexGridFn.zeros(mesh)
    F = ComplexGridFn(mesh, np.ones(mesh.num_dofs, dtype=complex))
    spec = ProblemSpec(a=0.0 + 0j, b=0.0 + 0j, V=z, F=F, mesh=mesh)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ArithmeticError):
            solve_regularized(spec, RegLevel(2, 0), SolveConfig(linearization=EXPLICIT))


# ---------------------------------------------------------------------------
# null solution theorem


def null_case_spec(norm_inf_factor=0.5):
    mesh = build_mesh("interval", 1, (0.0, 3.0), 96, DIRICHLET)
    z = ComplexGridFn.zeros(mesh)
    base = ProblemSpec(a=1.0 + 0j, b=1j, V=z, F=z, mesh=mesh)
    m_thr = null_threshold(base)
    x = mesh.dof_coords
    f_vals = np.exp(1j * x) * np.exp(-((x - 1.5) ** 2))
    f_vals *= norm_inf_factor / (m_thr * np.abs(f_vals).max())
    return base.with_forcing(ComplexGridFn(mesh, f_vals)), m_thr


def test_null_theorem_small_forcing_gives_zero():
    spec, _ = null_case_spec(norm_inf_factor=0.5)
    rep = solve_saturated(spec, SolveConfig(n_schedule=(1, 2, 4, 8, 16, 32)))
    assert rep.converged
    assert h1_norm(rep.u) <= 1e-6 * norms(spec.F)["L2"]
    assert np.allclose(rep.U.values, spec.F.values / spec.a, atol=1e-12)


def test_null_theorem_negative_control():
    spec, m_thr = null_case_spec(norm_inf_factor=60.0)
    rep = solve_saturated(spec, SolveConfig(n_schedule=(1, 2, 4, 8, 16, 32)))
    assert norms(spec.F)["Linf"] > 1.0 / m_thr
    assert h1_norm(rep.u) > 1e-3


# ---------------------------------------------------------------------------
# weak residual


def manufactured_fields(cells):
    """Smooth exact pair on (0, pi) with |u| > 0 everywhere; the forcing is
    derived symbolically so the weak defect isolates discretization error."""
    import sympy as sy

    a, b = 0.8 - 0.6j, 0.5 + 1.2j
    xs = sy.symbols("x", real=True)
    u_sym = sy.exp(sy.I * xs) * (2 + sy.cos(xs))
    v_sym = sy.Rational(3, 10) * xs ** 2
    f_sym = (-sy.diff(u_sym, xs, 2) + (a) * sy.exp(sy.I * xs)
             + (b) * u_sym + v_sym * u_sym)
    u_fn = sy.lambdify(xs, u_sym, "numpy")
    f_fn = sy.lambdify(xs, f_sym, "numpy")
    mesh = build_mesh("interval", 1, (0.0, math.pi), cells, DIRICHLET)
    x = mesh.dof_coords
    u = ComplexGridFn(mesh, u_fn(x))
    U = ComplexGridFn(mesh, np.exp(1j * x))
    V = ComplexGridFn(mesh, 0.3 * x ** 2 + 0j)
    F = ComplexGridFn(mesh, f_fn(x))
    return u, U, ProblemSpec(a=a, b=b, V=V, F=F, mesh=mesh)


def test_weak_residual_manufactured_second_order():
    res = []
    for cells in (64, 128, 256):
        u, U, spec = manufactured_fields(cells)
        res.append(weak_residual((u, U), spec, num_tests=16, seed=1))
    assert res[0] / res[2] > 8.0          # about O(h^2) overall
    assert res[2] < 2e-3


def test_weak_residual_null_pair_exact():
    spec, _ = null_case_spec()
    u = ComplexGridFn.zeros(spec.mesh)
    U = ComplexGridFn(spec.mesh, spec.F.values / spec.a)
    assert weak_residual((u, U), spec, num_tests=8, seed=0) < 1e-14


def test_weak_residual_negative_control():
    u, U, spec = manufactured_fields(64)
    rng = np.random.default_rng(0)
    junk = ComplexGridFn(spec.mesh, rng.normal(size=spec.mesh.num_dofs).astype(complex))
    assert weak_residual((junk, U), spec, num_tests=8, seed=0) > 1e-2


# ---------------------------------------------------------------------------
# identities and bounds on converged solves


@pytest.fixture(scope="module")
def converged_report():
    rng = np.random.default_rng(77)
    mesh = build_mesh("interval", 1, (0.0, 2.5), 128, DIRICHLET)
    V = ComplexGridFn(mesh, 0.2 * mesh.dof_coords - 0.5j * np.ones(mesh.num_dofs))
    F = smooth_forcing(mesh, rng, amplitude=4.0)
    spec = ProblemSpec(a=1.0 - 0.8j, b=0.3 - 1.1j, V=V, F=F, mesh=mesh)
    return solve_saturated(spec, SolveConfig(n_schedule=(1, 2, 4, 8, 16, 32, 64)))


def test_energy_identities_on_converged_solve(converged_report):
    rep = converged_report
    assert rep.converged
    audit = rep.bound_audit
    tol = 10.0 * rep.weak_residual * max(h1_norm(rep.u), 1e-30) + 1e-12
    assert audit.identity_real.residual <= tol
    assert audit.identity_imag.residual <= tol
    for check in audit.level_identities:
        assert check.satisfied, check
    for check in audit.level_inequalities:
        assert check.satisfied, check


def test_apriori_bounds_on_converged_solve(converged_report):
    audit = converged_report.bound_audit
    assert audit.h1l1_bound.satisfied
    assert audit.dual_bound.satisfied
    assert 0.0 < audit.dual_norm_lo <= audit.dual_norm_hi


def test_apriori_audit_zero_solution():
    spec, _ = null_case_spec()
    u = ComplexGridFn.zeros(spec.mesh)
    U = ComplexGridFn(spec.mesh, spec.F.values / spec.a)
    audit = apriori_audit((u, U), spec)
    assert audit.identity_real.residual < 1e-12
    assert audit.identity_imag.residual < 1e-12
    assert audit.h1l1_bound.satisfied and audit.dual_bound.satisfied


def test_h1l1_constant_case_split():
    # Re(a) > 0 branch and the Re(a) <= 0 branch both produce finite constants
    assert h1l1_bound_constant(1.0 + 0j, 1j, 0.0) >= 1.0
    assert h1l1_bound_constant(-0.5 - 1.0j, -2j, 0.3) >= 1.0
    with pytest.raises(ValueError):
        h1l1_bound_constant(1.0, 1.0 + 0j, 0.0)
    with pytest.raises(ValueError):
        h1l1_bound_constant(-1.0 + 0j, 1j, 0.0)


def test_dual_norm_bracket_orders():
    spec, _ = null_case_spec()
    lo, hi = dual_norm_bounds(spec.F, num_tests=32, seed=3)
    assert 0.0 < lo <= hi <= norms(spec.F)["L2"] * (1 + 1e-12)


# ---------------------------------------------------------------------------
# structure of solve_saturated


def test_solve_saturated_zero_forcing_trivial():
    mesh = build_mesh("interval", 1, (0.0, 2.0), 32, DIRICHLET)
    spec = zero_spec(mesh, a=1.0 - 0.5j, b=-0.9j)
    rep = solve_saturated(spec, SolveConfig(n_schedule=(1, 2, 4)))
    assert rep.converged
    assert np.all(rep.u.values == 0) and np.all(rep.U.values == 0)
    assert rep.weak_residual == 0.0


def test_schedule_independence():
    rng = np.random.default_rng(31)
    mesh = build_mesh("interval", 1, (0.0, 2.5), 96, DIRICHLET)
    V = ComplexGridFn.zeros(mesh)
    F = smooth_forcing(mesh, rng, amplitude=3.0)
    spec = ProblemSpec(a=1.0 - 0.5j, b=0.2 - 1.0j, V=V, F=F, mesh=mesh)
    cfg_a = SolveConfig(n_schedule=(1, 2, 4, 8, 16, 32, 64), continuation_tol=1e-3)
    cfg_b = SolveConfig(n_schedule=(1, 3, 9, 27, 81), continuation_tol=1e-3)
    rep_a = solve_saturated(spec, cfg_a)
    rep_b = solve_saturated(spec, cfg_b)
    diff = h1_norm(rep_a.u - rep_b.u)
    scale = max(h1_norm(rep_a.u), 1e-30)
    assert diff / scale <= 2.0 * cfg_a.continuation_tol


def test_odd_symmetry_1d():
    mesh = build_mesh("interval", 1, (-2.0, 2.0), 128, DIRICHLET)
    x = mesh.dof_coords
    bumps = np.exp(-((x - 0.8) / 0.25) ** 2) - np.exp(-((x + 0.8) / 0.25) ** 2)
    F = ComplexGridFn(mesh, 3.0 * (1.0 + 0.5j) * bumps)
    V = ComplexGridFn.zeros(mesh)
    spec = ProblemSpec(a=1.0 - 0.6j, b=0.1 - 1.2j, V=V, F=F, mesh=mesh)
    cfg = SolveConfig(n_schedule=(1, 2, 4, 8, 16, 32))
    rep = solve_saturated(spec, cfg)
    assert rep.converged
    full = rep.u.full()
    assert np.abs(full).max() > 0.05          # genuinely nontrivial
    asym = np.abs(full + full[::-1]).max() / np.abs(full).max()
    assert asym <= 10.0 * cfg.continuation_tol


def test_mesh_refinement_second_order():
    def solve_at(cells):
        mesh = build_mesh("interval", 1, (0.0, 2.0), cells, DIRICHLET)
        x = mesh.dof_coords
        F = ComplexGridFn(mesh, 3.0 * np.exp(-((x - 1.0) / 0.3) ** 2) * (1 + 0.5j))
        V = ComplexGridFn(mesh, 0.1 * x.astype(complex))
        spec = ProblemSpec(a=1.0 - 0.7j, b=0.4 - 1.3j, V=V, F=F, mesh=mesh)
        return solve_saturated(spec, SolveConfig(n_schedule=(1, 2, 4, 8, 16, 32, 64))).u

    u_h = solve_at(64)
    u_h2 = solve_at(128)
    u_h4 = solve_at(256)
    # compare on shared nodes (every second / fourth fine node)
    d1 = np.abs(u_h2.full()[::2] - u_h.full()).max()
    d2 = np.abs(u_h4.full()[::2] - u_h2.full()).max()
    assert d1 / d2 > 2.5


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(n_schedule=(4, 2))
    with pytest.raises(ValueError):
        SolveConfig(damping=0.0)
    with pytest.raises(ValueError):
        SolveConfig(picard_tol=-1.0)
    with pytest.raises(ValueError):
        SolveConfig(linearization="secret")
