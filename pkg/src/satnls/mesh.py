"""Meshes, discrete operators and quadrature.

Two mesh kinds cover the desk-scale geometries: a 1-D interval, and a ball in
R^N reduced to the radius r under radial symmetry.  Quadrature weights are the
exact cell measures (with the surface factor |S^{N-1}| r^{N-1} in the radial
case), chosen so that the discrete Dirichlet form satisfies the exact
summation-by-parts identity  <Lu, u>_w = |grad u|^2  used by all energy
identities downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

INTERVAL = "interval"
RADIAL = "radial"
DIRICHLET = "dirichlet"
NEUMANN = "neumann"


def sphere_area(n_dim: int) -> float:
    """Surface measure of the unit sphere in R^N (2, 2*pi, 4*pi for N=1,2,3)."""
    return 2.0 * math.pi ** (n_dim / 2.0) / math.gamma(n_dim / 2.0)


@dataclass(frozen=True)
class Mesh:
    """Uniform 1-D grid with boundary-condition tag and quadrature data.

    Degrees of freedom exclude nodes pinned by the Dirichlet condition; for a
    radial mesh the origin r=0 is an interior point and always a dof.  All
    arrays are fixed at construction; instances are safe to share.
    """

    kind: str
    dimension: int
    x_lo: float
    x_hi: float
    num_cells: int
    bc: str
    h: float
    nodes: np.ndarray = field(repr=False)          # all nodes, incl. boundary
    dof_index: np.ndarray = field(repr=False)      # node index of each dof
    quad_weights: np.ndarray = field(repr=False)   # exact cell measure per dof
    edge_weights: np.ndarray = field(repr=False)   # measure density * h per edge

    @property
    def num_dofs(self) -> int:
        return self.dof_index.size

    @property
    def dof_coords(self) -> np.ndarray:
        return self.nodes[self.dof_index]

    @property
    def domain_measure(self) -> float:
        """|Omega|: interval length, or the volume of the ball B(0, x_hi)."""
        if self.kind == INTERVAL:
            return self.x_hi - self.x_lo
        return sphere_area(self.dimension) * self.x_hi ** self.dimension / self.dimension

    def full_values(self, values: np.ndarray) -> np.ndarray:
        """Embed a dof vector into the full node set (zeros at pinned nodes)."""
        full = np.zeros(self.nodes.size, dtype=np.complex128)
        full[self.dof_index] = values
        return full

    def same_as(self, other: "Mesh") -> bool:
        return (
            self.kind == other.kind
            and self.dimension == other.dimension
            and self.num_cells == other.num_cells
            and self.bc == other.bc
            and math.isclose(self.x_lo, other.x_lo)
            and math.isclose(self.x_hi, other.x_hi)
        )


def build_mesh(kind: str, n_dim: int, extent: tuple[float, float],
               num_cells: int, bc: str) -> Mesh:
    """Construct a mesh on ``extent`` with ``num_cells`` uniform cells.

    Radial meshes must start at r=0 (the origin carries the zero-flux
    regularity condition); intervals are one-dimensional.
    """
    x_lo, x_hi = float(extent[0]), float(extent[1])
    if kind not in (INTERVAL, RADIAL):
        raise ValueError(f"unknown mesh kind {kind!r}")
    if bc not in (DIRICHLET, NEUMANN):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if num_cells < 4:
        raise ValueError(f"num_cells must be >= 4, got {num_cells}")
    if not x_hi > x_lo:
        raise ValueError(f"extent must be increasing, got ({x_lo}, {x_hi})")
    if kind == INTERVAL and n_dim != 1:
        raise ValueError("interval meshes are one-dimensional")
    if kind == RADIAL:
        if n_dim < 1:
            raise ValueError(f"dimension must be positive, got {n_dim}")
        if x_lo != 0.0:
            raise ValueError("radial meshes start at r = 0")

    h = (x_hi - x_lo) / num_cells
    nodes = x_lo + h * np.arange(num_cells + 1)
    nodes[-1] = x_hi

    if kind == RADIAL:
        sigma = sphere_area(n_dim)
        volume = lambda r: sigma * r ** n_dim / n_dim
        density = lambda r: sigma * r ** (n_dim - 1)
    else:
        volume = lambda x: x
        density = lambda x: np.ones_like(x)

    edge_mid = 0.5 * (nodes[:-1] + nodes[1:])
    cell_bounds = np.concatenate(([nodes[0]], edge_mid, [nodes[-1]]))
    cell_measure = volume(cell_bounds[1:]) - volume(cell_bounds[:-1])
    edge_weights = np.asarray(density(edge_mid), dtype=float) * h

    if bc == NEUMANN:
        dof_index = np.arange(num_cells + 1)
    elif kind == RADIAL:
        dof_index = np.arange(num_cells)          # r = 0 is interior
    else:
        dof_index = np.arange(1, num_cells)

    return Mesh(kind=kind, dimension=n_dim, x_lo=x_lo, x_hi=x_hi,
                num_cells=num_cells, bc=bc, h=h, nodes=nodes,
                dof_index=dof_index, quad_weights=cell_measure[dof_index],
                edge_weights=edge_weights)


class ComplexGridFn:
    """Complex-valued field sampled at the mesh degrees of freedom."""

    __slots__ = ("mesh", "values")

    def __init__(self, mesh: Mesh, values: np.ndarray):
        values = np.asarray(values, dtype=np.complex128)
        if values.shape != (mesh.num_dofs,):
            raise ValueError(
                f"expected {mesh.num_dofs} values, got shape {values.shape}")
        if not np.all(np.isfinite(values.real) & np.isfinite(values.imag)):
            raise ValueError("grid function contains non-finite entries")
        self.mesh = mesh
        self.values = values

    @classmethod
    def zeros(cls, mesh: Mesh) -> "ComplexGridFn":
        return cls(mesh, np.zeros(mesh.num_dofs, dtype=np.complex128))

    @classmethod
    def from_callable(cls, mesh: Mesh, f) -> "ComplexGridFn":
        return cls(mesh, np.asarray(f(mesh.dof_coords), dtype=np.complex128))

    def copy(self) -> "ComplexGridFn":
        return ComplexGridFn(self.mesh, self.values.copy())

    def full(self) -> np.ndarray:
        return self.mesh.full_values(self.values)

    def __add__(self, other: "ComplexGridFn") -> "ComplexGridFn":
        require_same_mesh(self, other)
        return ComplexGridFn(self.mesh, self.values + other.values)

    def __sub__(self, other: "ComplexGridFn") -> "ComplexGridFn":
        require_same_mesh(self, other)
        return ComplexGridFn(self.mesh, self.values - other.values)

    def __mul__(self, scalar: complex) -> "ComplexGridFn":
        return ComplexGridFn(self.mesh, self.values * scalar)

    __rmul__ = __mul__


def require_same_mesh(*fns) -> Mesh:
    mesh = fns[0].mesh
    for fn in fns[1:]:
        if not mesh.same_as(fn.mesh):
            raise ValueError("grid functions live on different meshes")
    return mesh


@dataclass(frozen=True)
class DiscreteOperator:
    """Sparse operator over mesh dofs, self-adjoint w.r.t. the quadrature
    inner product when ``self_adjoint`` is set."""

    mesh: Mesh
    matrix: sp.csr_matrix = field(repr=False)
    self_adjoint: bool = True

    def apply(self, f: ComplexGridFn) -> ComplexGridFn:
        if not self.mesh.same_as(f.mesh):
            raise ValueError("operator and field live on different meshes")
        return ComplexGridFn(f.mesh, self.matrix @ f.values)

    def stiffness(self) -> sp.csr_matrix:
        """W @ A: the symmetric bilinear-form matrix of the operator."""
        return sp.diags(self.mesh.quad_weights) @ self.matrix


def laplacian(mesh: Mesh) -> DiscreteOperator:
    """Second-order negative Laplacian honoring the mesh boundary condition.

    Assembled in conservative (flux) form: A = W^{-1} S with S the symmetric
    edge-based stiffness matrix, so A is self-adjoint and positive definite in
    the quadrature inner product for Dirichlet data.  At r=0 the zero-flux
    symmetry cell reproduces the limit stencil  -Lap u -> -N u''(0).
    """
    n_nodes = mesh.nodes.size
    dof_of_node = -np.ones(n_nodes, dtype=int)
    dof_of_node[mesh.dof_index] = np.arange(mesh.num_dofs)

    rows, cols, vals = [], [], []
    coeff = mesh.edge_weights / mesh.h ** 2
    for e in range(mesh.num_cells):
        i, j = dof_of_node[e], dof_of_node[e + 1]
        c = coeff[e]
        if i >= 0:
            rows.append(i); cols.append(i); vals.append(c)
        if j >= 0:
            rows.append(j); cols.append(j); vals.append(c)
        if i >= 0 and j >= 0:
            rows.extend((i, j)); cols.extend((j, i)); vals.extend((-c, -c))
    stiff = sp.coo_matrix((vals, (rows, cols)),
                          shape=(mesh.num_dofs, mesh.num_dofs)).tocsr()
    inv_w = sp.diags(1.0 / mesh.quad_weights)
    matrix = (inv_w @ stiff).tocsr().astype(np.complex128)
    return DiscreteOperator(mesh=mesh, matrix=matrix, self_adjoint=True)


def norms(f: ComplexGridFn) -> dict[str, float]:
    """Quadrature L1, L2, sup norm and H1 seminorm of a grid function."""
    w = f.mesh.quad_weights
    mod = np.abs(f.values)
    return {
        "L1": float(np.sum(w * mod)),
        "L2": float(np.sqrt(np.sum(w * mod ** 2))),
        "Linf": float(mod.max(initial=0.0)),
        "H1_seminorm": h1_seminorm(f),
    }


def h1_seminorm(f: ComplexGridFn) -> float:
    """Edge-quadrature norm of the gradient; for Dirichlet data this equals
    sqrt(<Lu, u>_w) of the discrete negative Laplacian exactly."""
    full = f.full()
    slope = np.diff(full) / f.mesh.h
    return float(np.sqrt(np.sum(f.mesh.edge_weights * np.abs(slope) ** 2)))


def h1_norm(f: ComplexGridFn) -> float:
    l2 = float(np.sqrt(np.sum(f.mesh.quad_weights * np.abs(f.values) ** 2)))
    return math.hypot(l2, h1_seminorm(f))


def lq_norm(f: ComplexGridFn, q: float) -> float:
    """L^q quadrature norm, q in (0, inf]."""
    mod = np.abs(f.values)
    if q == math.inf:
        return float(mod.max(initial=0.0))
    return float(np.sum(f.mesh.quad_weights * mod ** q) ** (1.0 / q))


def node_gradient(f: ComplexGridFn) -> np.ndarray:
    """Pointwise gradient at all nodes: central stencil inside, one-sided
    second-order stencil at the ends."""
    full = f.full()
    return _array_gradient(full, f.mesh.h)


def _array_gradient(full: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(full)
    g[1:-1] = (full[2:] - full[:-2]) / (2.0 * h)
    g[0] = (-3.0 * full[0] + 4.0 * full[1] - full[2]) / (2.0 * h)
    g[-1] = (3.0 * full[-1] - 4.0 * full[-2] + full[-3]) / (2.0 * h)
    return g


def duality(F: ComplexGridFn, v: ComplexGridFn) -> float:
    """Real duality pairing  Re  int F conj(v) dx  by quadrature."""
    mesh = require_same_mesh(F, v)
    return float(np.real(np.sum(mesh.quad_weights * F.values * np.conj(v.values))))


def gradient_pairing(u: ComplexGridFn, v: ComplexGridFn) -> float:
    """Re int grad(u) . conj(grad(v)) dx via the edge quadrature."""
    mesh = require_same_mesh(u, v)
    du = np.diff(u.full()) / mesh.h
    dv = np.diff(v.full()) / mesh.h
    return float(np.real(np.sum(mesh.edge_weights * du * np.conj(dv))))


def smallest_eigenvalue(mesh: Mesh) -> float:
    """Smallest eigenvalue of the negative Laplacian in the quadrature inner
    product (generalized problem S x = lambda W x)."""
    stiff = laplacian(mesh).stiffness().real
    w = mesh.quad_weights
    n = mesh.num_dofs
    if n <= 900:
        import scipy.linalg
        d = 1.0 / np.sqrt(w)
        sym = d[:, None] * stiff.toarray() * d[None, :]
        return float(scipy.linalg.eigh(sym, eigvals_only=True,
                                       subset_by_index=[0, 0])[0])
    vals = spla.eigsh(stiff.tocsc(), k=1, M=sp.diags(w).tocsc(),
                      sigma=0.0, which="LM", return_eigenvectors=False)
    return float(vals[0])


def poincare_constant(mesh: Mesh) -> dict[str, float]:
    """Best discrete constant C_P with ||w||_L2 <= C_P ||grad w||_L2 on
    Dirichlet fields, together with the derived constants C_P |Omega|^(1/2)
    (for the L1-gradient bound) and 1 + C_P (for the full H1 norm)."""
    if mesh.bc != DIRICHLET:
        raise ValueError("Poincare constant requires a Dirichlet mesh")
    lam = smallest_eigenvalue(mesh)
    if lam <= 0.0:
        raise ArithmeticError("discrete spectrum is not positive")
    c_p = 1.0 / math.sqrt(lam)
    return {
        "C_P": c_p,
        "C_L1": c_p * math.sqrt(mesh.domain_measure),
        "C_H1": 1.0 + c_p,
    }
