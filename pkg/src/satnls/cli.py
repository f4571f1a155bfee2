"""Command-line surface: batch solves, self-similar studies, containment
scans, and re-audits of stored artifacts.

Configs are versioned JSON (``schema_version: 1``); complex numbers are
two-element arrays [re, im].  Fields persist as CSV with columns
(index, coordinate, re, im); every run writes its resolved config next to
its outputs so that ``satnls audit`` can recompute all checks from disk.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import _svg
from .audit import lemma_bounds, results_to_json, symmetry_audit
from .gauge import (SelfSimilarParams, evolution_residual, gauge_inverse,
                    norm_scaling_factors, profile_spec, reconstruct,
                    scaled_mesh)
from .mesh import ComplexGridFn, Mesh, build_mesh, lq_norm, norms
from .saturation import SectionPolicy
from .solver import (ProblemSpec, SolveConfig, apriori_audit,
                     check_admissibility, solve_saturated, weak_residual)
from .support import (dead_core_scan, downward_closed, relative_tau,
                      support_expansion, support_report)

log = logging.getLogger("satnls.cli")

SCHEMA_VERSION = 1
_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config parsing


def _need(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing key '{where}.{key}'")
    return block[key]


def _as_complex(value, where: str) -> complex:
    if not (isinstance(value, (list, tuple)) and len(value) == 2
            and all(isinstance(v, (int, float)) for v in value)):
        raise ConfigError(f"'{where}' must be a two-element [re, im] array")
    return complex(value[0], value[1])


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    version = _need(cfg, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    _need(cfg, "problem", "")
    return cfg


def build_domain(block: dict) -> Mesh:
    kind = _need(block, "kind", "problem.domain")
    extent = _need(block, "extent", "problem.domain")
    cells = _need(block, "num_cells", "problem.domain")
    bc = _need(block, "bc", "problem.domain")
    n_dim = block.get("N", 1)
    try:
        return build_mesh(kind, n_dim, tuple(extent), cells, bc)
    except ValueError as exc:
        raise ConfigError(f"problem.domain: {exc}") from exc


def _shape_values(desc: dict, mesh: Mesh, where: str) -> np.ndarray:
    shape = _need(desc, "shape", where)
    x = mesh.dof_coords
    amp = _as_complex(desc.get("amplitude", [1.0, 0.0]), f"{where}.amplitude")
    if shape == "gaussian":
        center = float(_need(desc, "center", where))
        width = float(_need(desc, "width", where))
        if width <= 0:
            raise ConfigError(f"'{where}.width' must be positive")
        return amp * np.exp(-((x - center) / width) ** 2 / 2.0)
    if shape == "indicator":
        center = float(_need(desc, "center", where))
        width = float(_need(desc, "width", where))
        if width <= 0:
            raise ConfigError(f"'{where}.width' must be positive")
        return amp * (np.abs(x - center) <= width).astype(complex)
    if shape == "two-bump":
        centers = _need(desc, "centers", where)
        width = float(_need(desc, "width", where))
        if width <= 0 or len(centers) != 2:
            raise ConfigError(f"'{where}' needs two centers and a positive width")
        return amp * (np.exp(-((x - centers[0]) / width) ** 2 / 2.0)
                      + np.exp(-((x - centers[1]) / width) ** 2 / 2.0))
    if shape == "file":
        field = load_field(Path(_need(desc, "path", where)), mesh)
        return field.values
    raise ConfigError(f"unknown shape '{shape}' in '{where}'")


def build_forcing(desc: dict, mesh: Mesh, K: list | None) -> ComplexGridFn:
    vals = _shape_values(desc, mesh, "problem.F")
    eta = desc.get("tail", 0.0)
    if eta:
        if K is None:
            raise ConfigError("'problem.F.tail' needs 'support.K'")
        eta_c = _as_complex(eta, "problem.F.tail") if isinstance(eta, list) else complex(eta)
        from .support import dist_to_set
        off = np.array([dist_to_set(float(c), [tuple(k) for k in K]) > 0.0
                        for c in mesh.dof_coords])
        vals = vals + eta_c * off
    return ComplexGridFn(mesh, vals)


def build_potential(desc: dict | None, mesh: Mesh) -> ComplexGridFn:
    if desc is None or desc.get("kind", "zero") == "zero":
        return ComplexGridFn.zeros(mesh)
    kind = desc["kind"]
    x = mesh.dof_coords
    if kind == "constant":
        c = _as_complex(_need(desc, "value", "problem.V"), "problem.V.value")
        return ComplexGridFn(mesh, np.full(mesh.num_dofs, c))
    if kind == "quadratic":
        c = _as_complex(_need(desc, "coefficient", "problem.V"), "problem.V.coefficient")
        return ComplexGridFn(mesh, c * x ** 2)
    if kind == "file":
        return load_field(Path(_need(desc, "path", "problem.V")), mesh)
    raise ConfigError(f"unknown potential kind '{kind}'")


def build_problem(cfg: dict):
    """Resolve the problem block into (spec, params, base_forcing, mesh)."""
    prob = cfg["problem"]
    mesh = build_domain(_need(prob, "domain", "problem"))
    a = _as_complex(_need(prob, "a", "problem"), "problem.a")
    support = cfg.get("support", {})
    K = support.get("K")
    F = build_forcing(_need(prob, "F", "problem"), mesh, K)

    has_b = "b" in prob
    has_ss = "selfsim" in prob
    if has_b == has_ss:
        raise ConfigError("exactly one of 'problem.b' or 'problem.selfsim' is required")
    if has_ss:
        ss = prob["selfsim"]
        p = _as_complex(_need(ss, "p", "problem.selfsim"), "problem.selfsim.p")
        n_dim = int(_need(ss, "N", "problem.selfsim"))
        if prob.get("V") not in (None, {"kind": "zero"}):
            raise ConfigError("'problem.V' is derived for self-similar problems")
        try:
            params = SelfSimilarParams(p=p, n_dim=n_dim)
            spec = profile_spec(params, F, a, mesh)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return spec, params, F, mesh
    b = _as_complex(prob["b"], "problem.b")
    V = build_potential(prob.get("V"), mesh)
    return ProblemSpec(a=a, b=b, V=V, F=F, mesh=mesh), None, F, mesh


def build_solve_config(cfg: dict, seed: int | None) -> SolveConfig:
    block = dict(cfg.get("solver", {}))
    if "n_schedule" in block:
        schedule = tuple(block.pop("n_schedule"))
        block.pop("n_max", None)
    else:
        n_max = block.pop("n_max", 1024)
        schedule = tuple(2 ** k for k in range(max(int(n_max), 1).bit_length()))
    if seed is not None:
        block["seed"] = seed
    try:
        return SolveConfig(n_schedule=schedule, **block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver block: {exc}") from exc


def build_policy(cfg: dict) -> SectionPolicy:
    support = cfg.get("support", {})
    try:
        return SectionPolicy(tau_supp=support.get("tau_supp", 1e-8))
    except ValueError as exc:
        raise ConfigError(f"support block: {exc}") from exc


# ---------------------------------------------------------------------------
# persistence


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def save_field(path: Path, fn: ComplexGridFn) -> None:
    lines = ["index,coordinate,re,im"]
    for i, (c, v) in enumerate(zip(fn.mesh.dof_coords, fn.values)):
        lines.append(f"{i},{float(c)!r},{float(v.real)!r},{float(v.imag)!r}")
    path.write_text("\n".join(lines) + "\n")


def load_field(path: Path, mesh: Mesh) -> ComplexGridFn:
    if not path.exists():
        raise ConfigError(f"field file not found: {path}")
    rows = path.read_text().strip().splitlines()[1:]
    if len(rows) != mesh.num_dofs:
        raise ConfigError(f"{path}: expected {mesh.num_dofs} rows, found {len(rows)}")
    vals = np.empty(mesh.num_dofs, dtype=complex)
    for row in rows:
        i_s, _c, re_s, im_s = row.split(",")
        vals[int(i_s)] = complex(float(re_s), float(im_s))
    return ComplexGridFn(mesh, vals)


def compute_audits(u: ComplexGridFn, U: ComplexGridFn, spec: ProblemSpec,
                   config: SolveConfig, which: list[str]) -> dict:
    """Audit payload recomputable from persisted fields alone."""
    out: dict = {}
    wr = weak_residual((u, U), spec, num_tests=config.num_test_fields,
                       seed=config.seed)
    out["weak_residual"] = wr
    if "identities" in which:
        audit = apriori_audit((u, U), spec, seed=config.seed)
        out["identities"] = [
            {"name": c.name, "residual": c.residual, "tolerance": c.tolerance,
             "satisfied": c.satisfied}
            for c in (audit.identity_real, audit.identity_imag)]
        out["bounds_core"] = [
            {"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "satisfied": c.satisfied}
            for c in (audit.h1l1_bound, audit.dual_bound)]
    shim = SimpleNamespace(u=u, U=U, level_fields=[], levels=[], config=config)
    if "bounds" in which:
        out["bounds"] = results_to_json(lemma_bounds(shim, spec, seed=config.seed))
    if "symmetry" in which:
        out["symmetry"] = [symmetry_audit(shim, spec, transform=t).to_dict()
                           for t in ("odd", "rotation")]
    return out


def _report_payload(rep, adm, sup_rep) -> dict:
    payload = {
        "converged": rep.converged,
        "weak_residual": rep.weak_residual,
        "continuation_gap": rep.continuation_gap,
        "saturated_limit_declared": rep.saturated_limit_declared,
        "polish": rep.polish_info,
        "section": rep.section_info,
        "levels": [{"n": t.n, "delta": t.delta, "iterations": t.iterations,
                    "converged": t.converged, "rel_update": t.rel_update,
                    "residual": t.residual} for t in rep.levels],
        "level_identities": [
            {"name": c.name, "residual": c.residual, "tolerance": c.tolerance,
             "satisfied": c.satisfied} for c in rep.bound_audit.level_identities],
        "admissibility": {
            "a_in_A": adm.a_in_A, "b_in_B": adm.b_in_B,
            "finite_measure_route": adm.thm_finite_measure_applies,
            "complex_potential_route": adm.thm_complex_potential_applies,
            "reasons": adm.reasons},
        "norms_u": norms(rep.u),
    }
    if sup_rep is not None:
        payload["support"] = {
            "rho_support": sup_rep.rho_support,
            "components": sup_rep.components,
            "contained_in_K_eps": sup_rep.contained_in_K_eps,
            "max_outside": sup_rep.max_outside,
            "tau_abs": sup_rep.tau_abs,
        }
    return payload


# ---------------------------------------------------------------------------
# commands


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solve_common(cfg: dict, args):
    spec, params, F_base, mesh = build_problem(cfg)
    config = build_solve_config(cfg, args.seed)
    policy = build_policy(cfg)
    rep = solve_saturated(spec, config, policy)
    adm = check_admissibility(spec)
    support = cfg.get("support", {})
    sup_rep = None
    if support.get("K"):
        K = [tuple(k) for k in support["K"]]
        eps = support.get("epsilon", 0.0)
        sup_rep = support_report(rep.u, relative_tau(rep.u, policy.tau_supp), K, eps)
    return spec, params, F_base, config, policy, rep, adm, sup_rep


def _write_solve_artifacts(out: Path, cfg: dict, spec, config, rep, adm, sup_rep):
    formats = cfg.get("output", {}).get("formats", ["csv", "json", "svg"])
    cfg = {**cfg, "solver": {**cfg.get("solver", {}), "seed": config.seed}}
    _dump_json(out / "config.json", cfg)
    if "csv" in formats:
        save_field(out / "u.csv", rep.u)
        save_field(out / "U.csv", rep.U)
        save_field(out / "F.csv", spec.F)
        save_field(out / "V.csv", spec.V)
    _dump_json(out / "report.json", _report_payload(rep, adm, sup_rep))
    which = cfg.get("audit", {}).get("which", ["identities", "bounds", "symmetry"])
    _dump_json(out / "audits.json",
               compute_audits(rep.u, rep.U, spec, config, which))
    if "svg" in formats:
        x = spec.mesh.dof_coords
        _svg.line_plot(out / "solution.svg", x, np.abs(rep.u.values),
                       title="solution modulus", xlabel="x", ylabel="|u|",
                       extra_series=[(x, np.abs(spec.F.values), "indianred")])


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    out = _prepare_out(args)
    spec, _params, _F, config, _policy, rep, adm, sup_rep = _solve_common(cfg, args)
    _write_solve_artifacts(out, cfg, spec, config, rep, adm, sup_rep)
    log.info("solve: converged=%s weak_residual=%.3e", rep.converged, rep.weak_residual)
    return 0 if rep.converged else 2


def cmd_selfsimilar(args) -> int:
    cfg = load_config(args.config)
    if "selfsim" not in cfg.get("problem", {}):
        raise ConfigError("missing key 'problem.selfsim'")
    out = _prepare_out(args)
    spec, params, F_base, config, policy, rep, adm, sup_rep = _solve_common(cfg, args)
    _write_solve_artifacts(out, cfg, spec, config, rep, adm, sup_rep)

    phi = gauge_inverse(rep.u)
    Phi = gauge_inverse(rep.U)
    save_field(out / "profile.csv", phi)
    save_field(out / "section.csv", Phi)

    times = args.times or [1.0]
    rows, slope = support_expansion(phi, params, times, tau_rel=policy.tau_supp)
    lines = ["t,rho_support"] + [f"{t!r},{rho!r}" for t, rho in rows]
    (out / "expansion.csv").write_text("\n".join(lines) + "\n")

    scaling = {"expansion_slope": slope,
               "expansion_rows": [{"t": t, "rho": rho} for t, rho in rows],
               "norm_factors": {}}
    base_l2 = norms(phi)["L2"]
    for t in times:
        u_t = reconstruct(phi, params, t, scaled_mesh(phi.mesh, math.sqrt(t)))
        measured = norms(u_t)["L2"] / max(base_l2, 1e-300)
        expected = norm_scaling_factors(params, t, 2.0)[0]
        scaling["norm_factors"][f"{t!r}"] = {"measured": measured,
                                             "expected": expected}

    refine = args.refine or 0
    base_cells = spec.mesh.num_cells
    residual_rows = []
    for j in range(refine + 1):
        factor = 2 ** (refine - j)
        cells_j = max(64, base_cells // factor)
        # dt tied to the spacing keeps the linear-interpolation noise of the
        # time stencil at O(h^2), so halving contracts the residual by ~4
        dt_j = 0.5 * (spec.mesh.x_hi - spec.mesh.x_lo) / cells_j
        if j == refine and cells_j == base_cells:
            rep_j, spec_j = rep, spec
        else:
            sub_cfg = json.loads(json.dumps(cfg))
            sub_cfg["problem"]["domain"]["num_cells"] = cells_j
            spec_j, params_j, _fb, mesh_j = build_problem(sub_cfg)
            rep_j = solve_saturated(spec_j, config, policy)
        phi_j = gauge_inverse(rep_j.u)
        Phi_j = gauge_inverse(rep_j.U)
        f_base_j = ComplexGridFn(spec_j.mesh,
                                 -spec_j.F.values * np.exp(0.125j * spec_j.mesh.dof_coords ** 2))
        res = evolution_residual(phi_j, Phi_j, params, spec.a, f_base_j,
                                 t=1.0, dt=dt_j)
        residual_rows.append({"level": j, "cells": cells_j, "dt": dt_j,
                              "residual": res})
    scaling["evolution_residuals"] = residual_rows
    _dump_json(out / "scaling.json", scaling)

    formats = cfg.get("output", {}).get("formats", ["csv", "json", "svg"])
    if "svg" in formats and len(rows) > 1 and all(r > 0 for _, r in rows):
        _svg.line_plot(out / "expansion.svg", [t for t, _ in rows],
                       [r for _, r in rows], title="support radius vs time",
                       xlabel="t", ylabel="rho", logx=True, logy=True)
    log.info("selfsimilar: slope=%.4f converged=%s", slope, rep.converged)
    return 0 if rep.converged else 2


def cmd_scan(args) -> int:
    cfg = load_config(args.config)
    scan_block = cfg.get("scan")
    if not scan_block:
        raise ConfigError("missing key 'scan'")
    core_scales = _need(scan_block, "core_scales", "scan")
    tail_scales = _need(scan_block, "tail_scales", "scan")
    if not core_scales or not tail_scales:
        raise ConfigError("'scan' grid is empty")
    support = cfg.get("support", {})
    if not support.get("K"):
        raise ConfigError("missing key 'support.K'")
    K = [tuple(k) for k in support["K"]]
    eps = support.get("epsilon", 0.0)

    out = _prepare_out(args)
    spec, params, F_base, config, policy = _solve_parts(cfg, args)
    tail_value = scan_block.get("tail_value", [1.0, 0.0])
    eta = _as_complex(tail_value, "scan.tail_value")
    from .support import dist_to_set
    off = np.array([dist_to_set(float(c), K) > 0.0 for c in spec.mesh.dof_coords])
    tail = ComplexGridFn(spec.mesh, eta * off)

    rows = dead_core_scan(spec, tail, K, eps, core_scales, tail_scales,
                          config=config, policy=policy, jobs=args.jobs or 1)
    header = "l2_scale,tail_scale,contained,rho_support,iterations"
    lines = [header]
    for r in rows:
        lines.append(f"{r['l2_scale']!r},{r['tail_scale']!r},"
                     f"{int(r['contained'])},{r['rho_support']!r},{r['iterations']}")
    _dump_json(out / "config.json", cfg)
    (out / "scan.csv").write_text("\n".join(lines) + "\n")
    _dump_json(out / "scan.json", {"rows": rows, "downward_closed": downward_closed(rows)})

    formats = cfg.get("output", {}).get("formats", ["csv", "json", "svg"])
    if "svg" in formats:
        cells = {(r["core_scale"], r["tail_scale"]):
                 ("seagreen" if r["contained"] else "indianred") for r in rows}
        _svg.heatmap(out / "scan.svg", [r["core_scale"] for r in rows],
                     [r["tail_scale"] for r in rows], cells,
                     title="containment map", xlabel="core scale",
                     ylabel="tail scale")
    return 0


def _solve_parts(cfg, args):
    spec, params, F_base, mesh = build_problem(cfg)
    return spec, params, F_base, build_solve_config(cfg, args.seed), build_policy(cfg)


def cmd_audit(args) -> int:
    art = Path(args.artifacts)
    cfg_path = art / "config.json"
    if not cfg_path.exists():
        raise ConfigError(f"no stored run in {art}")
    cfg = load_config(cfg_path)
    spec, params, _F, mesh = build_problem(cfg)
    config = build_solve_config(cfg, None)
    u = load_field(art / "u.csv", mesh)
    U = load_field(art / "U.csv", mesh)
    which = cfg.get("audit", {}).get("which", ["identities", "bounds", "symmetry"])
    payload = compute_audits(u, U, spec, config, which)
    _dump_json(art / "audits_recheck.json", payload)
    stored = art / "audits.json"
    identical = stored.exists() and stored.read_bytes() == (art / "audits_recheck.json").read_bytes()
    log.info("audit recheck: identical=%s", identical)
    print(f"audit recheck written; identical to stored: {identical}")
    return 0


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parse_times(text: str) -> list[float]:
    try:
        times = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --t list: {exc}") from exc
    if not times or any(t <= 0 for t in times):
        raise ConfigError("--t needs positive, comma-separated times")
    return times


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="satnls",
                     description="saturated Schrodinger profiles: solve and verify")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker processes for scans")

    p_solve = sub.add_parser("solve", help="solve the stationary problem")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_ss = sub.add_parser("selfsimilar", help="profile solve + reconstruction study")
    common(p_ss)
    p_ss.add_argument("--t", dest="times_raw", default="1,4,9",
                      help="comma list of reconstruction times")
    p_ss.add_argument("--refine", type=int, default=0,
                      help="evolution-residual refinement levels")
    p_ss.set_defaults(func=cmd_selfsimilar)

    p_scan = sub.add_parser("scan", help="containment scan over forcing scales")
    common(p_scan)
    p_scan.set_defaults(func=cmd_scan)

    p_audit = sub.add_parser("audit", help="recompute audits from stored artifacts")
    p_audit.add_argument("artifacts", help="artifact directory of a prior run")
    p_audit.set_defaults(func=cmd_audit)
    return parser


def main(argv=None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("SATNLS_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(name)s %(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "times_raw", None) is not None:
            args.times = _parse_times(args.times_raw)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ArithmeticError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
