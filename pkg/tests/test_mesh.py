import math

import numpy as np
import pytest

from satnls.mesh import (ComplexGridFn, DIRICHLET, NEUMANN, build_mesh, duality,
                         gradient_pairing, h1_norm, h1_seminorm, laplacian,
                         lq_norm, norms, poincare_constant, smallest_eigenvalue)


def test_build_mesh_interval_spacing():
    mesh = build_mesh("interval", 1, (0.0, math.pi), 64, DIRICHLET)
    assert mesh.h == pytest.approx(math.pi / 64)
    assert mesh.num_dofs == 63
    assert np.all(np.diff(mesh.nodes) > 0)


def test_build_mesh_radial_nodes():
    mesh = build_mesh("radial", 3, (0.0, 10.0), 100, DIRICHLET)
    assert mesh.nodes[1] == pytest.approx(0.1)
    assert mesh.dof_index[0] == 0          # r = 0 is a dof
    assert mesh.num_dofs == 100


@pytest.mark.parametrize("kind,n_dim,extent,cells,bc", [
    ("interval", 1, (0.0, 0.0), 64, DIRICHLET),
    ("interval", 1, (1.0, 0.5), 64, DIRICHLET),
    ("interval", 1, (0.0, 1.0), 3, DIRICHLET),
    ("radial", 3, (0.5, 2.0), 16, DIRICHLET),
    ("interval", 2, (0.0, 1.0), 16, DIRICHLET),
])
def test_build_mesh_rejects_bad_input(kind, n_dim, extent, cells, bc):
    with pytest.raises(ValueError):
        build_mesh(kind, n_dim, extent, cells, bc)


def test_laplacian_quadratic_interval():
    mesh = build_mesh("interval", 1, (0.0, math.pi), 64, DIRICHLET)
    u = ComplexGridFn.from_callable(mesh, lambda x: x * (math.pi - x))
    lap_u = laplacian(mesh).apply(u)
    assert np.allclose(lap_u.values, 2.0, atol=1e-10)


def test_laplacian_constant_neumann():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 32, NEUMANN)
    u = ComplexGridFn(mesh, np.full(mesh.num_dofs, 3.0 - 2.0j))
    lap_u = laplacian(mesh).apply(u)
    assert np.allclose(lap_u.values, 0.0, atol=1e-12)


def test_laplacian_radial_quadratic_exact():
    # -Lap(R^2 - r^2) = 2N, reproduced exactly by the flux-form stencil
    for n_dim in (1, 2, 3):
        mesh = build_mesh("radial", n_dim, (0.0, 2.0), 40, DIRICHLET)
        u = ComplexGridFn.from_callable(mesh, lambda r: 4.0 - r ** 2)
        lap_u = laplacian(mesh).apply(u)
        assert np.allclose(lap_u.values, 2.0 * n_dim, atol=1e-10), n_dim


def test_smallest_eigenvalue_interval():
    mesh = build_mesh("interval", 1, (0.0, math.pi), 128, DIRICHLET)
    lam = smallest_eigenvalue(mesh)
    assert lam == pytest.approx(1.0, abs=5e-4)   # O(h^2)


def test_smallest_eigenvalue_radial_ball():
    # first Dirichlet eigenvalue of the ball of radius R in N=3 is (pi/R)^2
    mesh = build_mesh("radial", 3, (0.0, 2.0), 256, DIRICHLET)
    lam = smallest_eigenvalue(mesh)
    assert lam == pytest.approx((math.pi / 2.0) ** 2, rel=1e-3)


def test_laplacian_hermitian_positive_definite_every_mesh():
    meshes = [
        build_mesh("interval", 1, (0.0, 2.0), 24, DIRICHLET),
        build_mesh("radial", 1, (0.0, 1.5), 24, DIRICHLET),
        build_mesh("radial", 2, (0.0, 1.5), 24, DIRICHLET),
        build_mesh("radial", 3, (0.0, 1.5), 24, DIRICHLET),
    ]
    for mesh in meshes:
        stiff = laplacian(mesh).stiffness().toarray()
        assert np.allclose(stiff, stiff.T.conj(), atol=1e-12)
        assert smallest_eigenvalue(mesh) > 0.0


def test_stiffness_pairing_matches_h1_seminorm():
    rng = np.random.default_rng(7)
    for kind, n_dim in [("interval", 1), ("radial", 3)]:
        mesh = build_mesh(kind, n_dim, (0.0, 1.0), 20, DIRICHLET)
        vals = rng.normal(size=mesh.num_dofs) + 1j * rng.normal(size=mesh.num_dofs)
        u = ComplexGridFn(mesh, vals)
        op = laplacian(mesh)
        pairing = np.real(np.conj(u.values) @ (mesh.quad_weights * op.apply(u).values))
        assert pairing == pytest.approx(h1_seminorm(u) ** 2, rel=1e-12)


def test_norms_zero_field():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 16, DIRICHLET)
    res = norms(ComplexGridFn.zeros(mesh))
    assert res == {"L1": 0.0, "L2": 0.0, "Linf": 0.0, "H1_seminorm": 0.0}


def test_norms_unit_constant():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 50, NEUMANN)
    res = norms(ComplexGridFn(mesh, np.ones(mesh.num_dofs)))
    assert res["L1"] == pytest.approx(1.0, abs=1e-12)
    assert res["L2"] == pytest.approx(1.0, abs=1e-12)
    assert res["Linf"] == 1.0
    assert res["H1_seminorm"] == 0.0


def test_norms_sine_analytic():
    mesh = build_mesh("interval", 1, (0.0, math.pi), 256, DIRICHLET)
    f = ComplexGridFn.from_callable(mesh, np.sin)
    res = norms(f)
    assert res["L2"] ** 2 == pytest.approx(math.pi / 2.0, abs=1e-4)
    assert res["L1"] == pytest.approx(2.0, abs=1e-4)
    assert res["H1_seminorm"] ** 2 == pytest.approx(math.pi / 2.0, abs=1e-3)


def test_quadrature_second_order_convergence():
    errs = []
    for cells in (32, 64, 128):
        mesh = build_mesh("radial", 3, (0.0, 1.0), cells, NEUMANN)
        f = ComplexGridFn.from_callable(mesh, lambda r: np.cos(r))
        # int_0^1 cos(r) 4 pi r^2 dr = 4 pi [ (r^2-2) sin r + 2 r cos r ]_0^1
        exact = 4.0 * math.pi * ((1 - 2) * math.sin(1.0) + 2 * math.cos(1.0))
        approx = float(np.sum(mesh.quad_weights * f.values.real))
        errs.append(abs(approx - exact))
    assert errs[0] / errs[1] > 3.0
    assert errs[1] / errs[2] > 3.0


def test_duality_examples():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 32, NEUMANN)
    one = ComplexGridFn(mesh, np.ones(mesh.num_dofs))
    rng = np.random.default_rng(3)
    f = ComplexGridFn(mesh, rng.normal(size=mesh.num_dofs).astype(complex))
    assert duality(f, ComplexGridFn(mesh, 1j * f.values)) == pytest.approx(0.0, abs=1e-14)
    assert duality(one, one) == pytest.approx(1.0, abs=1e-12)
    g = ComplexGridFn(mesh, rng.normal(size=mesh.num_dofs).astype(complex))
    assert duality(f, g) == pytest.approx(duality(g, f))


def test_duality_bilinear_and_bounded():
    rng = np.random.default_rng(11)
    mesh = build_mesh("interval", 1, (0.0, 2.0), 40, DIRICHLET)
    for _ in range(20):
        f = ComplexGridFn(mesh, rng.normal(size=mesh.num_dofs)
                          + 1j * rng.normal(size=mesh.num_dofs))
        g = ComplexGridFn(mesh, rng.normal(size=mesh.num_dofs)
                          + 1j * rng.normal(size=mesh.num_dofs))
        s, t = rng.normal(), rng.normal()
        lhs = duality(ComplexGridFn(mesh, s * f.values + t * g.values), g)
        assert lhs == pytest.approx(s * duality(f, g) + t * duality(g, g), rel=1e-10)
        assert abs(duality(f, g)) <= norms(f)["L2"] * norms(g)["L2"] * (1 + 1e-12)


def test_duality_mesh_mismatch():
    mesh_a = build_mesh("interval", 1, (0.0, 1.0), 16, DIRICHLET)
    mesh_b = build_mesh("interval", 1, (0.0, 1.0), 32, DIRICHLET)
    with pytest.raises(ValueError):
        duality(ComplexGridFn.zeros(mesh_a), ComplexGridFn.zeros(mesh_b))


def test_poincare_interval_pi():
    mesh = build_mesh("interval", 1, (0.0, math.pi), 256, DIRICHLET)
    res = poincare_constant(mesh)
    assert res["C_P"] == pytest.approx(1.0, abs=1e-3)
    assert res["C_H1"] == pytest.approx(1.0 + res["C_P"])
    assert res["C_L1"] == pytest.approx(res["C_P"] * math.sqrt(math.pi))


def test_poincare_interval_general_length():
    length = 2.7
    mesh = build_mesh("interval", 1, (0.0, length), 256, DIRICHLET)
    assert poincare_constant(mesh)["C_P"] == pytest.approx(length / math.pi, rel=1e-3)


def test_poincare_rejects_neumann():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 16, NEUMANN)
    with pytest.raises(ValueError):
        poincare_constant(mesh)


def test_poincare_holds_for_random_fields():
    rng = np.random.default_rng(5)
    mesh = build_mesh("interval", 1, (0.0, 3.0), 48, DIRICHLET)
    consts = poincare_constant(mesh)
    measure = mesh.domain_measure
    for _ in range(100):
        u = ComplexGridFn(mesh, rng.normal(size=mesh.num_dofs)
                          + 1j * rng.normal(size=mesh.num_dofs))
        res = norms(u)
        grad = res["H1_seminorm"]
        assert res["L2"] <= consts["C_P"] * grad * (1 + 1e-12)
        assert res["L1"] <= math.sqrt(measure) * res["L2"] * (1 + 1e-12)
        assert res["L1"] <= consts["C_L1"] * grad * (1 + 1e-12)
        assert h1_norm(u) <= consts["C_H1"] * grad * (1 + 1e-12)


def test_gradient_pairing_consistent():
    mesh = build_mesh("interval", 1, (0.0, math.pi), 200, DIRICHLET)
    u = ComplexGridFn.from_callable(mesh, np.sin)
    assert gradient_pairing(u, u) == pytest.approx(h1_seminorm(u) ** 2, rel=1e-12)


def test_lq_norm_limits():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 64, NEUMANN)
    f = ComplexGridFn(mesh, np.full(mesh.num_dofs, 2.0j))
    assert lq_norm(f, 2) == pytest.approx(2.0, abs=1e-12)
    assert lq_norm(f, math.inf) == 2.0


def test_gridfn_rejects_nan():
    mesh = build_mesh("interval", 1, (0.0, 1.0), 16, DIRICHLET)
    vals = np.zeros(mesh.num_dofs, dtype=complex)
    vals[3] = np.nan
    with pytest.raises(ValueError):
        ComplexGridFn(mesh, vals)
