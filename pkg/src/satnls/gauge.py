"""Self-similar machinery.

A profile phi determines the whole space-time field u(t,x) = t^(p/2)
phi(x/sqrt(t)) with Re(p) = 2.  The quadratic-phase gauge  g = phi
exp(-i|x|^2/8)  removes the drift term x.grad(phi) from the profile equation
and leaves a stationary problem with zeroth-order coefficient
b = -i(N+2p)/4 and potential -|x|^2/16, which the solver module handles.
This module provides the transform, the reconstruction of u(t) from the
profile, the scaling group, and residual checks of the evolution equation on
reconstructed fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import (ComplexGridFn, DIRICHLET, Mesh, build_mesh, laplacian,
                   lq_norm, _array_gradient)
from .solver import ProblemSpec


@dataclass(frozen=True)
class SelfSimilarParams:
    """Exponent p (Re(p) = 2 exactly) and space dimension."""

    p: complex
    n_dim: int

    def __post_init__(self):
        if self.p.real != 2.0:
            raise ValueError(f"self-similar exponent needs Re(p) = 2, got {self.p}")
        if self.n_dim < 1:
            raise ValueError("dimension must be positive")


def _tpow(t: float, exponent: complex) -> complex:
    """Principal complex power t^exponent for t > 0."""
    if t <= 0.0:
        raise ValueError(f"time must be positive, got {t}")
    return complex(np.exp(exponent * math.log(t)))


@dataclass
class SpaceTimeField:
    """Field u(t,x) = t^(p/2) phi(x/sqrt(t)) carried by its profile."""

    profile: ComplexGridFn
    params: SelfSimilarParams

    def at(self, t: float, target_mesh: Mesh | None = None) -> ComplexGridFn:
        return reconstruct(self.profile, self.params, t,
                           target_mesh or scaled_mesh(self.profile.mesh, math.sqrt(t)))


def gauge_forward(phi: ComplexGridFn) -> ComplexGridFn:
    """Multiply by the unit-modulus factor exp(-i|x|^2/8)."""
    x = phi.mesh.dof_coords
    return ComplexGridFn(phi.mesh, phi.values * np.exp(-0.125j * x ** 2))


def gauge_inverse(g: ComplexGridFn) -> ComplexGridFn:
    x = g.mesh.dof_coords
    return ComplexGridFn(g.mesh, g.values * np.exp(0.125j * x ** 2))


def profile_spec(params: SelfSimilarParams, F: ComplexGridFn, a: complex,
                 mesh: Mesh) -> ProblemSpec:
    """Stationary problem satisfied by the gauge-transformed profile.

    The coefficients are b = -i(N+2p)/4 (so Im(b) = -(N+4)/4 < 0),
    V = -|x|^2/16, and the right-hand side -F exp(-i|x|^2/8).  Requires
    Im(a) <= 0 so that the sign coupling Im(a)Im(b) >= 0 holds.
    """
    if params.p.real != 2.0:
        raise ValueError("profile problem needs Re(p) = 2")
    if a.imag > 0.0:
        raise ValueError("profile problem needs Im(a) <= 0")
    if mesh.bc != DIRICHLET:
        raise ValueError("profile problem is posed with Dirichlet data")
    if mesh.dimension != params.n_dim:
        raise ValueError("mesh dimension does not match the profile dimension")
    if not mesh.same_as(F.mesh):
        raise ValueError("forcing must live on the profile mesh")
    b = -0.25j * (params.n_dim + 2.0 * params.p)
    x = mesh.dof_coords
    V = ComplexGridFn(mesh, -(x.astype(complex) ** 2) / 16.0)
    rhs = ComplexGridFn(mesh, -F.values * np.exp(-0.125j * x ** 2))
    return ProblemSpec(a=a, b=b, V=V, F=rhs, mesh=mesh, selfsim=params)


def scaled_mesh(mesh: Mesh, factor: float) -> Mesh:
    """Same topology on the dilated extent (node x maps to factor*x)."""
    if factor <= 0.0:
        raise ValueError("scale factor must be positive")
    return build_mesh(mesh.kind, mesh.dimension,
                      (mesh.x_lo * factor, mesh.x_hi * factor),
                      mesh.num_cells, mesh.bc)


def _interp_profile(profile: ComplexGridFn, coords: np.ndarray) -> np.ndarray:
    """Linear interpolation with zero extension outside the profile mesh."""
    xs = profile.mesh.nodes
    full = profile.full()
    re = np.interp(coords, xs, full.real, left=0.0, right=0.0)
    im = np.interp(coords, xs, full.imag, left=0.0, right=0.0)
    return re + 1j * im


def reconstruct(phi: ComplexGridFn, params: SelfSimilarParams, t: float,
                target_mesh: Mesh) -> ComplexGridFn:
    """Sample u(t, x) = t^(p/2) phi(x/sqrt(t)) on the target mesh."""
    amp = _tpow(t, params.p / 2.0)
    coords = target_mesh.dof_coords / math.sqrt(t)
    return ComplexGridFn(target_mesh, amp * _interp_profile(phi, coords))


def reconstruct_section(Phi: ComplexGridFn, params: SelfSimilarParams, t: float,
                        target_mesh: Mesh) -> ComplexGridFn:
    """Sample U(t, x) = t^((p-2)/2) Phi(x/sqrt(t))."""
    amp = _tpow(t, (params.p - 2.0) / 2.0)
    coords = target_mesh.dof_coords / math.sqrt(t)
    return ComplexGridFn(target_mesh, amp * _interp_profile(Phi, coords))


def forcing_at(F: ComplexGridFn, params: SelfSimilarParams, t: float,
               target_mesh: Mesh) -> ComplexGridFn:
    """Sample f(t, x) = t^((p-2)/2) F(x/sqrt(t))."""
    return reconstruct_section(F, params, t, target_mesh)


def rescale(field: SpaceTimeField, lam: float) -> SpaceTimeField:
    """Apply u_lam(t,x) = lam^(-p) u(lam^2 t, lam x) and return the result in
    profile form.  For genuinely self-similar fields this is the identity, a
    fact the caller can verify nodewise since the evaluation lands exactly on
    the profile nodes."""
    if lam <= 0.0:
        raise ValueError("rescaling factor must be positive")
    params = field.params
    mesh = field.profile.mesh
    amp = complex(np.exp(-params.p * math.log(lam))) * _tpow(lam ** 2, params.p / 2.0)
    coords = (lam * mesh.dof_coords) / math.sqrt(lam ** 2)
    new_profile = ComplexGridFn(mesh, amp * _interp_profile(field.profile, coords))
    return SpaceTimeField(profile=new_profile, params=params)


def rescale_section(Phi: ComplexGridFn, params: SelfSimilarParams, lam: float) -> ComplexGridFn:
    """Section analog with weight lam^-(p-2)."""
    if lam <= 0.0:
        raise ValueError("rescaling factor must be positive")
    mesh = Phi.mesh
    amp = complex(np.exp(-(params.p - 2.0) * math.log(lam))) * _tpow(lam ** 2, (params.p - 2.0) / 2.0)
    coords = (lam * mesh.dof_coords) / math.sqrt(lam ** 2)
    return ComplexGridFn(mesh, amp * _interp_profile(Phi, coords))


def transform_profile(v: ComplexGridFn, params: SelfSimilarParams, lam: float) -> ComplexGridFn:
    """Pure spatial rescaling T_lam(v) = lam^(-p) v(lam x) on v's own mesh;
    nonzero fixed points would have to violate the L^q norm scaling
    ||T_lam v|| = lam^(-2-N/q) ||v||, so only v = 0 is invariant."""
    if lam <= 0.0:
        raise ValueError("rescaling factor must be positive")
    amp = complex(np.exp(-params.p * math.log(lam)))
    coords = lam * v.mesh.dof_coords
    return ComplexGridFn(v.mesh, amp * _interp_profile(v, coords))


# ---------------------------------------------------------------------------
# residuals of the evolution equation on reconstructed fields


def evolution_residual(phi: ComplexGridFn, Phi: ComplexGridFn,
                       params: SelfSimilarParams, a: complex,
                       F: ComplexGridFn, t: float, dt: float,
                       target_mesh: Mesh | None = None,
                       fields: bool = False):
    """L2 norm of  i du/dt + Lap u - a U - f  at time t, with a centered
    difference in time over three reconstructions and the mesh Laplacian in
    space.

    By default the evaluation mesh is the profile mesh dilated by sqrt(t), so
    the central slice samples the profile exactly at nodes and interpolation
    enters only through the t +/- dt slices.  Keep dt at or below the profile
    spacing: the piecewise-linear interpolation errors of the two side slices
    cancel to O(h^2) only while their query points stay within one cell of a
    node (offset x dt / 2t < h), otherwise an O(h^2/dt) term appears.
    """
    if t - dt <= 0.0:
        raise ValueError("need t - dt > 0 for the centered time stencil")
    mesh = target_mesh or scaled_mesh(phi.mesh, math.sqrt(t))
    u_minus = reconstruct(phi, params, t - dt, mesh)
    u_mid = reconstruct(phi, params, t, mesh)
    u_plus = reconstruct(phi, params, t + dt, mesh)
    dudt = (u_plus.values - u_minus.values) / (2.0 * dt)
    lap_u = -(laplacian(mesh).matrix @ u_mid.values)
    sect = reconstruct_section(Phi, params, t, mesh)
    f_t = forcing_at(F, params, t, mesh)
    resid = 1j * dudt + lap_u - a * sect.values - f_t.values
    res_norm = float(np.sqrt(np.sum(mesh.quad_weights * np.abs(resid) ** 2)))
    if fields:
        return res_norm, ComplexGridFn(mesh, resid), u_mid
    return res_norm


def componentwise_residual(phi: ComplexGridFn, Phi: ComplexGridFn,
                           params: SelfSimilarParams, a: complex,
                           F: ComplexGridFn, t: float, dt: float,
                           target_mesh: Mesh | None = None) -> dict[str, float]:
    """The evolution equation split into its two real equations, with
    a = lambda - i mu acting on (u_R, u_I) through the saturation section.

    Returns the L2 norms of both real residuals and the gap of the exact
    recombination  complex residual = -(res_R + i res_I).
    """
    if t - dt <= 0.0:
        raise ValueError("need t - dt > 0 for the centered time stencil")
    mesh = target_mesh or scaled_mesh(phi.mesh, math.sqrt(t))
    u_minus = reconstruct(phi, params, t - dt, mesh)
    u_mid = reconstruct(phi, params, t, mesh)
    u_plus = reconstruct(phi, params, t + dt, mesh)
    dudt = (u_plus.values - u_minus.values) / (2.0 * dt)
    lap_u = -(laplacian(mesh).matrix @ u_mid.values)
    sect = reconstruct_section(Phi, params, t, mesh).values
    f_t = forcing_at(F, params, t, mesh).values

    a_u = a * sect
    res_r = dudt.imag - lap_u.real + a_u.real + f_t.real
    res_i = -dudt.real - lap_u.imag + a_u.imag + f_t.imag
    complex_resid = 1j * dudt + lap_u - a_u - f_t
    gap = complex_resid + (res_r + 1j * res_i)

    w = mesh.quad_weights
    l2 = lambda v: float(np.sqrt(np.sum(w * np.abs(v) ** 2)))
    return {"res_R": l2(res_r), "res_I": l2(res_i),
            "complex": l2(complex_resid), "identity_gap": l2(gap)}


# ---------------------------------------------------------------------------
# norms of reconstructed fields, continuity and scaling laws


def sobolev_seminorms(u: ComplexGridFn, q: float, order: int) -> list[float]:
    """[||u||_q, ||du||_q, ||d2u||_q][:order+1] with nodal finite differences
    in the mesh coordinate."""
    res = [lq_norm(u, q)]
    if order >= 1:
        grad = _array_gradient(u.full(), u.mesh.h)
        res.append(lq_norm(ComplexGridFn(u.mesh, grad[u.mesh.dof_index]), q))
    if order >= 2:
        full = u.full()
        sec = np.zeros_like(full)
        sec[1:-1] = (full[2:] - 2.0 * full[1:-1] + full[:-2]) / u.mesh.h ** 2
        sec[0], sec[-1] = sec[1], sec[-2]
        res.append(lq_norm(ComplexGridFn(u.mesh, sec[u.mesh.dof_index]), q))
    return res


def norm_scaling_factors(params: SelfSimilarParams, t: float, q: float) -> list[float]:
    """Exact factors [t^(1+N/2q), t^(1/2+N/2q), t^(N/2q)] relating the L^q
    norms of u(t), grad u(t), and second derivatives to those of the
    profile."""
    n_over = params.n_dim / (2.0 * q) if q != math.inf else 0.0
    return [t ** (1.0 + n_over), t ** (0.5 + n_over), t ** n_over]


def time_continuity_check(phi: ComplexGridFn, params: SelfSimilarParams,
                          q: float, m: int, t: float,
                          t_sequence: list[float]) -> dict:
    """Distances ||u(t_k) - u(t)||_(W^m,q) along the sequence, plus the
    relative defect of the exact gradient/second-derivative scaling laws at
    time t (zero up to interpolation error)."""
    if t <= 0.0:
        raise ValueError("time must be positive")
    mesh = scaled_mesh(phi.mesh, math.sqrt(max([t] + list(t_sequence))))
    u_t = reconstruct(phi, params, t, mesh)
    base = sobolev_seminorms(u_t, q, m)
    distances = []
    for t_k in t_sequence:
        u_k = reconstruct(phi, params, t_k, mesh)
        diff = ComplexGridFn(mesh, u_k.values - u_t.values)
        distances.append(float(np.sum(np.array(sobolev_seminorms(diff, q, m)))))

    factors = norm_scaling_factors(params, t, q)
    profile_norms = sobolev_seminorms(phi, q, min(m, 2))
    scaling_errors = []
    for k in range(min(m, 2) + 1):
        expected = factors[k] * profile_norms[k]
        got = base[k]
        scale = max(abs(expected), 1e-300)
        scaling_errors.append(abs(got - expected) / scale)
    return {"distances": distances, "scaling_errors": scaling_errors}
