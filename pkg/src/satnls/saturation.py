"""The saturating nonlinearity u/|u|, its bounded sections, and the
Lipschitz regularizations used for continuation.

For each level n the complex signum is smoothed into ``regularized_sign``
(slope n at the origin, exact signum above modulus n) and the identity is
clamped into ``modulus_clamp`` (radial clamp at modulus n).  Both admit the
diagonal factorizations  g(z) = sign_factor(|z|) z  and
h(z) = clamp_factor(|z|) z  that the semi-implicit solver freezes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import ComplexGridFn, laplacian, require_same_mesh

ZERO_FILL = "zero-fill"
FORCING_CONTINUATION = "forcing-continuation"


@dataclass(frozen=True)
class RegLevel:
    """Regularization level: smoothing index n and the zeroth-order shift
    delta in {0, 1} moved into the linear part of the operator."""

    n: int
    delta: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"regularization index must be >= 1, got {self.n}")
        if self.delta not in (0, 1):
            raise ValueError(f"delta must be 0 or 1, got {self.delta}")


@dataclass(frozen=True)
class SectionPolicy:
    """How to extend u/|u| across the zero set of u.

    ``tau_supp`` is relative to sup|u|: nodes with |u| below the threshold
    count as part of the zero set.  ``zero-fill`` puts 0 there;
    ``forcing-continuation`` derives the fill from the equation residual and
    clamps it into the unit disk.
    """

    tag: str = FORCING_CONTINUATION
    tau_supp: float = 1e-8

    def __post_init__(self):
        if self.tag not in (ZERO_FILL, FORCING_CONTINUATION):
            raise ValueError(f"unknown section policy {self.tag!r}")
        if not self.tau_supp > 0.0:
            raise ValueError("tau_supp must be positive")


def regularized_sign(z, n: int):
    """Lipschitz surrogate of z/|z|:  z / (|z| + (n-|z|)/n^2)  for |z| <= n
    and exactly z/|z| above.  Continuous, |result| <= 1, vanishes at z = 0."""
    z = np.asarray(z, dtype=np.complex128)
    s = np.abs(z)
    lower = z / (s + (n - s) / n ** 2)
    upper = z / np.maximum(s, 1.0)
    out = np.where(s <= n, lower, upper)
    return out if out.ndim else complex(out)


def modulus_clamp(z, n: float):
    """Radial clamp onto the disk of radius n: identity for |z| <= n, else
    n z/|z|."""
    z = np.asarray(z, dtype=np.complex128)
    s = np.abs(z)
    out = np.where(s <= n, z, n * z / np.maximum(s, 1.0))
    return out if out.ndim else complex(out)


def sign_factor(s, n: int):
    """Diagonal factor with  regularized_sign(z) = sign_factor(|z|) z."""
    s = np.asarray(s, dtype=float)
    lower = 1.0 / (s + (n - s) / n ** 2)
    upper = 1.0 / np.maximum(s, 1.0)
    return np.where(s <= n, lower, upper)


def clamp_factor(s, n: float):
    """Diagonal factor with  modulus_clamp(z) = clamp_factor(|z|) z; equals 1
    at s = 0 where the clamp is the identity."""
    s = np.asarray(s, dtype=float)
    return np.where(s <= n, 1.0, n / np.maximum(s, 1.0))


def regularized_nonlinearity(u: ComplexGridFn, spec, reg: RegLevel) -> ComplexGridFn:
    """Pointwise  a g_n(u) + (b - delta + V) h_n(u)  for the problem
    coefficients carried by ``spec``."""
    require_same_mesh(u, spec.V)
    vals = (spec.a * regularized_sign(u.values, reg.n)
            + (spec.b - reg.delta + spec.V.values)
            * modulus_clamp(u.values, reg.n))
    return ComplexGridFn(u.mesh, vals)


def sign_pairing(w: ComplexGridFn, n: int) -> float:
    """Quadrature of Re(g_n(w) conj(w)): the truncated L1-type quantity
    entering the level-n energy identities."""
    vals = np.real(regularized_sign(w.values, n) * np.conj(w.values))
    return float(np.sum(w.mesh.quad_weights * vals))


def clamp_pairing(w: ComplexGridFn, n: int) -> float:
    """Quadrature of Re(h_n(w) conj(w)): the truncated L2-type quantity."""
    vals = np.real(modulus_clamp(w.values, n) * np.conj(w.values))
    return float(np.sum(w.mesh.quad_weights * vals))


def weighted_clamp_pairing(w: ComplexGridFn, n: int, weight: np.ndarray) -> float:
    """Quadrature of weight * Re(h_n(w) conj(w)) for a real nodal weight."""
    vals = np.real(modulus_clamp(w.values, n) * np.conj(w.values))
    return float(np.sum(w.mesh.quad_weights * weight * vals))


def section_threshold(u: ComplexGridFn, policy: SectionPolicy) -> float:
    """Absolute modulus threshold below which a node counts as dead."""
    peak = float(np.abs(u.values).max(initial=0.0))
    return policy.tau_supp * peak if peak > 0.0 else policy.tau_supp


def saturated_section(u: ComplexGridFn, policy: SectionPolicy, spec,
                      with_report: bool = False):
    """Bounded section U with |U| <= 1 and U = u/|u| wherever |u| exceeds the
    policy threshold.

    On the zero set the fill is 0 (``zero-fill``) or the value forced by the
    equation itself, U = (F - (-Lap u + b u + V u))/a, clamped into the unit
    disk (``forcing-continuation``).  The residual-derived fill makes the
    completed pair (u, U) satisfy the equation on the dead set whenever the
    unclamped fill already lies in the disk.
    """
    mesh = u.mesh
    tau = section_threshold(u, policy)
    s = np.abs(u.values)
    alive = s > tau

    vals = np.zeros(mesh.num_dofs, dtype=np.complex128)
    vals[alive] = u.values[alive] / s[alive]

    clamped = False
    if policy.tag == FORCING_CONTINUATION and not np.all(alive):
        if spec.a == 0:
            raise ValueError("forcing-continuation fill requires a != 0")
        lap_u = laplacian(mesh).matrix @ u.values
        fill = (spec.F.values - (lap_u + (spec.b + spec.V.values) * u.values)) / spec.a
        mag = np.abs(fill)
        over = mag > 1.0
        clamped = bool(np.any(over & ~alive))
        fill[over] = fill[over] / mag[over]
        vals[~alive] = fill[~alive]

    section = ComplexGridFn(mesh, vals)
    if with_report:
        return section, {"tau_abs": tau, "fill_clamped": clamped,
                         "dead_nodes": int(np.sum(~alive))}
    return section
