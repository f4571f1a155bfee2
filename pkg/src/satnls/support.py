"""Support detection and the dead-core verification toolkit.

Compact sets are unions of closed intervals in the mesh coordinate (radii for
radial meshes).  Support is threshold-based: a node is inside the support
when |u| exceeds tau; the dilation K(eps) is the set of points within
distance eps of K.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mesh import ComplexGridFn, build_mesh, lq_norm, sphere_area
from .saturation import SectionPolicy
from .solver import ProblemSpec, SolveConfig, solve_saturated

log = logging.getLogger("satnls.support")

Interval = tuple[float, float]


def dist_to_set(x: float, intervals: list[Interval]) -> float:
    """Distance from a coordinate to a union of closed intervals."""
    best = math.inf
    for lo, hi in intervals:
        if x < lo:
            best = min(best, lo - x)
        elif x > hi:
            best = min(best, x - hi)
        else:
            return 0.0
    return best


def dilate(intervals: list[Interval], eps: float) -> list[Interval]:
    return [(lo - eps, hi + eps) for lo, hi in intervals]


def relative_tau(u: ComplexGridFn, rel: float = 1e-8) -> float:
    peak = float(np.abs(u.values).max(initial=0.0))
    return rel * peak if peak > 0.0 else rel


@dataclass
class SupportReport:
    rho_support: float
    components: list[Interval]
    contained_in_K_eps: bool
    K: list[Interval]
    epsilon: float
    tau_abs: float
    max_outside: float                 # sup |u| off K(eps), 0 when empty
    component_homes: list[int | None] = field(default_factory=list)
    # index of the K-interval whose eps-dilation contains each component


def support_report(u: ComplexGridFn, tau_supp: float | None,
                   K: list[Interval], eps: float) -> SupportReport:
    """Threshold support of u, its connected components (intervals of the
    mesh coordinate), and the containment verdict against K(eps)."""
    if tau_supp is None:
        tau_supp = relative_tau(u)
    x = u.mesh.dof_coords
    mod = np.abs(u.values)
    above = mod > tau_supp

    components: list[Interval] = []
    homes: list[int | None] = []
    idx = np.flatnonzero(above)
    if idx.size:
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks, [idx.size - 1]))
        for s, e in zip(starts, ends):
            lo, hi = float(x[idx[s]]), float(x[idx[e]])
            components.append((lo, hi))
            home = None
            for j, (klo, khi) in enumerate(K):
                if klo - eps <= lo and hi <= khi + eps:
                    home = j
                    break
            homes.append(home)

    if u.mesh.kind == "radial":
        rho = float(x[above].max(initial=0.0))
    else:
        rho = float(np.abs(x[above]).max(initial=0.0))

    dist = np.array([dist_to_set(float(c), K) for c in x])
    outside = above & (dist > eps)
    contained = not bool(outside.any())
    max_outside = float(mod[dist > eps].max(initial=0.0)) if np.any(dist > eps) else 0.0
    return SupportReport(rho_support=rho, components=components,
                         contained_in_K_eps=contained, K=list(K), epsilon=eps,
                         tau_abs=tau_supp, max_outside=max_outside,
                         component_homes=homes)


# ---------------------------------------------------------------------------
# local ball energies


@dataclass
class LocalEnergyProbe:
    x0: float
    rho: float                       # snapped to the node grid
    grad_sq: float
    l1: float
    l2_sq: float
    potential_re: float
    potential_im: float
    forcing: complex                 # int_B F conj(g)
    flux: complex                    # int_S g conj(grad g . nu)
    res_real: float
    res_imag: float

    @property
    def smallness_lhs(self) -> float:
        return self.grad_sq + self.l2_sq + self.l1


def _one_sided_gradient(full: np.ndarray, i: int, h: float, direction: int) -> complex:
    """Second-order one-sided derivative at node i, stencil reaching inward
    (direction=+1 uses nodes to the right, -1 to the left)."""
    if direction > 0:
        return (-3.0 * full[i] + 4.0 * full[i + 1] - full[i + 2]) / (2.0 * h)
    return (3.0 * full[i] - 4.0 * full[i - 1] + full[i - 2]) / (2.0 * h)


def local_energy(g: ComplexGridFn, spec: ProblemSpec, x0: float, rho: float) -> LocalEnergyProbe:
    """Evaluate both local energy identities on the ball B(x0, rho).

    All terms are node-aligned quadratures (the ball is snapped to the node
    grid); the boundary flux uses one-sided gradient stencils reaching into
    the ball.  Both residuals vanish up to O(h^2) + solver tolerance on
    solutions of the stationary problem.
    """
    mesh = g.mesh
    nodes = mesh.nodes
    h = mesh.h
    if mesh.kind == "radial":
        if abs(x0) > 1e-14:
            raise ValueError("radial probes are centered at the origin")
        lo_t, hi_t = 0.0, rho
    else:
        lo_t, hi_t = x0 - rho, x0 + rho
    if lo_t < nodes[0] - 1e-12 or hi_t > nodes[-1] + 1e-12:
        raise ValueError("probe ball escapes the mesh")
    i_lo = int(round((lo_t - nodes[0]) / h))
    i_hi = int(round((hi_t - nodes[0]) / h))
    i_lo = max(i_lo, 0)
    i_hi = min(i_hi, nodes.size - 1)
    if i_hi - i_lo < 2:
        raise ValueError("probe ball too small for the mesh spacing")

    full = g.full()
    full_f = mesh.full_values(spec.F.values)
    full_v = mesh.full_values(spec.V.values)
    xs = nodes[i_lo:i_hi + 1]
    gs = full[i_lo:i_hi + 1]

    if mesh.kind == "radial":
        sigma = sphere_area(mesh.dimension)
        density = sigma * xs ** (mesh.dimension - 1)
    else:
        density = np.ones_like(xs)
    w = density * h
    w[0] *= 0.5
    w[-1] *= 0.5

    mod = np.abs(gs)
    l1 = float(np.sum(w * mod))
    l2_sq = float(np.sum(w * mod ** 2))
    vs = full_v[i_lo:i_hi + 1]
    pot_re = float(np.sum(w * vs.real * mod ** 2))
    pot_im = float(np.sum(w * vs.imag * mod ** 2))
    forc = complex(np.sum(w * full_f[i_lo:i_hi + 1] * np.conj(gs)))

    edge_mid = 0.5 * (xs[:-1] + xs[1:])
    if mesh.kind == "radial":
        edge_density = sigma * edge_mid ** (mesh.dimension - 1)
    else:
        edge_density = np.ones_like(edge_mid)
    slopes = np.diff(gs) / h
    grad_sq = float(np.sum(edge_density * h * np.abs(slopes) ** 2))

    # boundary flux  int_S g conj(grad g).nu dsigma
    flux = 0.0 + 0.0j
    if mesh.kind == "radial":
        if i_hi < nodes.size - 1 or mesh.bc != "dirichlet":
            gp = _one_sided_gradient(full, i_hi, h, -1)
            flux += sigma * nodes[i_hi] ** (mesh.dimension - 1) * full[i_hi] * np.conj(gp)
        # r = 0 end carries no sphere
    else:
        gp_hi = _one_sided_gradient(full, i_hi, h, -1)
        flux += full[i_hi] * np.conj(gp_hi)
        gp_lo = _one_sided_gradient(full, i_lo, h, +1)
        flux += full[i_lo] * np.conj(gp_lo) * (-1.0)

    a, b = spec.a, spec.b
    res_real = abs(grad_sq + a.real * l1 + b.real * l2_sq + pot_re
                   - forc.real - flux.real)
    res_imag = abs(a.imag * l1 + b.imag * l2_sq + pot_im
                   - forc.imag + flux.imag)
    return LocalEnergyProbe(x0=x0, rho=(nodes[i_hi] - nodes[i_lo]) / 2.0
                            if mesh.kind != "radial" else nodes[i_hi],
                            grad_sq=grad_sq, l1=l1, l2_sq=l2_sq,
                            potential_re=pot_re, potential_im=pot_im,
                            forcing=forc, flux=flux,
                            res_real=res_real, res_imag=res_imag)


# ---------------------------------------------------------------------------
# threshold scan


def _outside_mask(mesh, region: list[Interval]) -> np.ndarray:
    return np.array([dist_to_set(float(c), region) > 0.0 for c in mesh.dof_coords])


def _scan_cell(args):
    spec, config, policy, K, eps, core_scale, tail_scale, core, tail = args
    f_vals = core_scale * core + tail_scale * tail
    cell_spec = spec.with_forcing(ComplexGridFn(spec.mesh, f_vals))
    off_k = _outside_mask(spec.mesh, K)
    row = {"core_scale": core_scale, "tail_scale": tail_scale,
           "l2_scale": lq_norm(cell_spec.F, 2.0),
           "tail_sup": float(np.abs(f_vals[off_k]).max(initial=0.0))}
    try:
        rep = solve_saturated(cell_spec, config, policy)
        sup = support_report(rep.u, relative_tau(rep.u, policy.tau_supp), K, eps)
        row.update(contained=sup.contained_in_K_eps, rho_support=sup.rho_support,
                   iterations=sum(t.iterations for t in rep.levels),
                   converged=rep.converged, failed=False)
    except ArithmeticError as exc:   # solver breakdown is recorded, not fatal
        log.warning("scan cell (%g, %g) failed: %s", core_scale, tail_scale, exc)
        row.update(contained=False, rho_support=math.nan, iterations=0,
                   converged=False, failed=True)
    return row


def dead_core_scan(base_spec: ProblemSpec, tail: ComplexGridFn,
                   K: list[Interval], eps: float,
                   core_scales, tail_scales,
                   config: SolveConfig | None = None,
                   policy: SectionPolicy | None = None,
                   jobs: int = 1) -> list[dict]:
    """Containment map over forcing scalings F = s_core F_core + s_tail F_tail.

    ``base_spec.F`` is the core profile (must vanish outside K); ``tail``
    must vanish on K.  Returns one row per grid cell, in deterministic
    (core, tail) order; failed solves are recorded with ``failed=True``.
    """
    config = config or SolveConfig()
    policy = policy or SectionPolicy()
    off_k = _outside_mask(base_spec.mesh, K)
    core_peak = float(np.abs(base_spec.F.values).max(initial=0.0))
    if core_peak > 0.0 and \
            float(np.abs(base_spec.F.values[off_k]).max(initial=0.0)) > 1e-3 * core_peak:
        raise ValueError("core forcing must be concentrated in the compact region")
    tail_peak = float(np.abs(tail.values).max(initial=0.0))
    if tail_peak > 0.0 and \
            float(np.abs(tail.values[~off_k]).max(initial=0.0)) > 1e-6 * tail_peak:
        raise ValueError("tail forcing must vanish on the core region")
    cells = [(base_spec, config, policy, K, eps, float(cs), float(ts),
              base_spec.F.values, tail.values)
             for cs in core_scales for ts in tail_scales]
    if not cells:
        raise ValueError("scan grid is empty")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_scan_cell, cells))
    else:
        rows = [_scan_cell(c) for c in cells]
    rows.sort(key=lambda r: (r["core_scale"], r["tail_scale"]))
    return rows


def containment_frontier(rows: list[dict]) -> dict[float, float]:
    """Largest contained core scale for each tail scale (empirical stand-in
    for the theorem's smallness thresholds)."""
    frontier: dict[float, float] = {}
    for row in rows:
        if row.get("failed") or not row["contained"]:
            continue
        ts = row["tail_scale"]
        frontier[ts] = max(frontier.get(ts, 0.0), row["core_scale"])
    return frontier


def downward_closed(rows: list[dict]) -> bool:
    """Whether the contained region is downward closed in (core, tail) scale
    within the scan grid."""
    by_key = {(r["core_scale"], r["tail_scale"]): r["contained"]
              for r in rows if not r.get("failed")}
    for (cs, ts), contained in by_key.items():
        if not contained:
            continue
        for (cs2, ts2), contained2 in by_key.items():
            if cs2 <= cs and ts2 <= ts and not contained2:
                return False
    return True


# ---------------------------------------------------------------------------
# multi-bump and support expansion


def multi_bump(spec: ProblemSpec, K: list[Interval], eps: float,
               config: SolveConfig | None = None,
               policy: SectionPolicy | None = None) -> SupportReport:
    """Solve a spec whose forcing is carried by several disjoint compacts and
    report the component structure of the solution support."""
    for i, (lo1, hi1) in enumerate(K):
        for lo2, hi2 in K[i + 1:]:
            gap = max(lo2 - hi1, lo1 - hi2)
            if gap <= 2.0 * eps:
                raise ValueError("compact components must be separated by more than 2 eps")
    policy = policy or SectionPolicy()
    rep = solve_saturated(spec, config or SolveConfig(), policy)
    return support_report(rep.u, relative_tau(rep.u, policy.tau_supp), K, eps)


def support_expansion(phi: ComplexGridFn, params, t_list,
                      tau_rel: float = 1e-8, eval_cells: int | None = None):
    """Detected support radius of the reconstruction u(t) for each t.

    The evaluation meshes are fresh (not aligned with the profile nodes), so
    the sqrt(t) dilation law is verified within one mesh cell.  Returns
    (rows, slope) with rows = [(t, rho)] and the fitted log-log slope.
    """
    from .gauge import reconstruct  # local import: gauge depends on solver only

    mesh = phi.mesh
    rows = []
    for t in sorted(t_list):
        factor = math.sqrt(t)
        cells = eval_cells or int(mesh.num_cells * 1.37) + 1
        if mesh.kind == "radial":
            extent = (0.0, mesh.x_hi * factor)
        else:
            extent = (mesh.x_lo * factor, mesh.x_hi * factor)
        eval_mesh_t = build_mesh(mesh.kind, mesh.dimension, extent, cells, mesh.bc)
        u_t = reconstruct(phi, params, t, eval_mesh_t)
        tau = relative_tau(u_t, tau_rel)
        rep = support_report(u_t, tau, [(extent[0], extent[1])], math.inf)
        rows.append((t, rep.rho_support))
    ts = np.array([r[0] for r in rows])
    rhos = np.array([r[1] for r in rows])
    if np.all(rhos > 0.0) and ts.size >= 2:
        slope = float(np.polyfit(np.log(ts), np.log(rhos), 1)[0])
    else:
        slope = math.nan
    return rows, slope
