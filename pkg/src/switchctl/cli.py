"""Experiment orchestration: config ingestion, subcommands, artifact emission.

Subcommands
    validate    hypothesis report (JSON)
    solve       one (epsilon, delta) NPDS solve
    limits      continuation ladders and certified fields
    regions     region map CSV plus decomposition report
    simulate    Monte Carlo policy value estimate
    crosscheck  solver/simulator identity check with pass/fail

Exit codes: 0 pass, 2 certified-check failure, 1 error.  Configs are strict
JSON: unknown keys are errors.  Regime indices are 0-based everywhere.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import artifacts
from .catalog import CatalogFn
from .control import FeedbackPolicy
from .errors import ConfigError, SwitchctlError
from .grid import Grid, RegimeField, interpolate, write_field_csv
from .limits import (
    ContinuationParams,
    check_region_decomposition,
    continuation_delta,
    continuation_epsilon,
    extract_regions,
    residual_esd5,
    residual_pc1,
    write_regions_csv,
)
from .mc import SimParams, simulate_policy
from .npds import SolveParams, compute_vtilde, residual_npds, solve_npds
from .problem import (
    Domain,
    ProblemSpec,
    RegimeCoefficients,
    SwitchingCosts,
    diagonal_a,
)

SUBCOMMANDS = ("validate", "solve", "limits", "regions", "simulate", "crosscheck")


@dataclass
class ExperimentConfig:
    spec: ProblemSpec
    grid_nodes: tuple[int, ...]
    solve_params: SolveParams
    continuation: ContinuationParams
    region_tol: float
    pc1_tol: float
    grad_tol: float
    sim: SimParams
    x0: np.ndarray
    regime0: int
    crosscheck_threshold: float
    out_dir: str


def _strict(block: dict, allowed: set[str], where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _need(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing key {key!r} in {where}")
    return block[key]


def _entry(raw, where: str) -> CatalogFn:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a catalog entry object")
    try:
        return CatalogFn.from_dict(raw)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad catalog entry at {where}: {exc}") from exc


def _parse_domain(block: dict) -> Domain:
    _strict(block, {"kind", "lower", "upper", "center", "radius"}, "problem.domain")
    kind = _need(block, "kind", "problem.domain")
    try:
        if kind == "disk":
            return Domain("disk", (), (), center=tuple(_need(block, "center", "domain")),
                          radius=float(_need(block, "radius", "domain")))
        lower = block.get("lower")
        upper = block.get("upper")
        if kind == "interval":
            lower = [lower] if np.isscalar(lower) else lower
            upper = [upper] if np.isscalar(upper) else upper
        return Domain(kind, tuple(lower), tuple(upper))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad domain: {exc}") from exc


def _parse_coefficients(raw, d: int, idx: int) -> RegimeCoefficients:
    where = f"problem.coefficients[{idx}]"
    _strict(raw, {"a", "b", "c", "h", "g"}, where)
    a_raw = _need(raw, "a", where)
    if all(isinstance(r, dict) for r in a_raw):
        if len(a_raw) != d:
            raise ConfigError(f"{where}.a needs {d} diagonal entries")
        a = diagonal_a([_entry(r, f"{where}.a[{i}]") for i, r in enumerate(a_raw)])
    else:
        if len(a_raw) != d or any(len(row) != d for row in a_raw):
            raise ConfigError(f"{where}.a must be {d}x{d}")
        a = tuple(
            tuple(_entry(v, f"{where}.a[{i}][{j}]") for j, v in enumerate(row))
            for i, row in enumerate(a_raw)
        )
    b_raw = _need(raw, "b", where)
    if len(b_raw) != d:
        raise ConfigError(f"{where}.b needs {d} entries")
    return RegimeCoefficients(
        a=a,
        b=tuple(_entry(v, f"{where}.b[{i}]") for i, v in enumerate(b_raw)),
        c=_entry(_need(raw, "c", where), f"{where}.c"),
        h=_entry(_need(raw, "h", where), f"{where}.h"),
        g=_entry(_need(raw, "g", where), f"{where}.g"),
    )


def load_config(path: str, seed_override: int | None = None, out_override: str | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    _strict(raw, {"schema_version", "problem", "grid", "solver", "simulation", "crosscheck", "output"}, "config")

    prob = _need(raw, "problem", "config")
    _strict(prob, {"domain", "regimes", "coefficients", "switching_costs"}, "problem")
    domain = _parse_domain(_need(prob, "domain", "problem"))
    m = int(_need(prob, "regimes", "problem"))
    coeffs_raw = _need(prob, "coefficients", "problem")
    if len(coeffs_raw) != m:
        raise ConfigError("problem.coefficients length must equal regimes")
    coeffs = tuple(
        _parse_coefficients(c, domain.dimension, i) for i, c in enumerate(coeffs_raw)
    )
    theta = np.asarray(_need(prob, "switching_costs", "problem"), dtype=float)
    if theta.shape != (m, m):
        raise ConfigError(f"switching_costs must be {m}x{m}")
    try:
        spec = ProblemSpec(domain, m, coeffs, SwitchingCosts(theta))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    grid_block = _need(raw, "grid", "config")
    _strict(grid_block, {"nodes"}, "grid")
    nodes = tuple(int(n) for n in _need(grid_block, "nodes", "grid"))
    if len(nodes) != domain.dimension:
        raise ConfigError("grid.nodes length must equal the domain dimension")

    sol = _need(raw, "solver", "config")
    _strict(
        sol,
        {"epsilon", "delta", "relaxation", "tolerance", "max_iterations",
         "continuation", "region_tol", "pc1_tol", "grad_tol"},
        "solver",
    )
    try:
        solve_params = SolveParams(
            epsilon=float(_need(sol, "epsilon", "solver")),
            delta=float(_need(sol, "delta", "solver")),
            relaxation=float(sol.get("relaxation", 0.5)),
            max_iterations=int(sol.get("max_iterations", 200_000)),
            tolerance=float(sol.get("tolerance", 1e-9)),
        )
        cont_block = sol.get("continuation", {})
        _strict(
            cont_block,
            {"delta0", "epsilon0", "shrink", "stop", "max_rungs", "grad_slack"},
            "solver.continuation",
        )
        continuation = ContinuationParams(
            delta0=float(cont_block.get("delta0", 0.5)),
            epsilon0=float(cont_block.get("epsilon0", 0.5)),
            shrink=float(cont_block.get("shrink", 0.5)),
            stop=float(cont_block.get("stop", 1e-4)),
            max_rungs=int(cont_block.get("max_rungs", 40)),
            grad_slack=float(cont_block.get("grad_slack", 5e-3)),
            solve_tolerance=float(sol.get("tolerance", 1e-9)),
            relaxation=float(sol.get("relaxation", 0.5)),
            max_iterations=int(sol.get("max_iterations", 200_000)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad solver block: {exc}") from exc
    region_tol = float(sol.get("region_tol", 10.0 * continuation.stop))
    pc1_tol = float(sol.get("pc1_tol", 1e-3))
    grad_tol = float(sol.get("grad_tol", 5e-3))

    sim_block = _need(raw, "simulation", "config")
    _strict(
        sim_block,
        {"dt", "paths", "seed", "x0", "regime0", "t_max", "tail_tol", "zero_diffusion"},
        "simulation",
    )
    seed = int(sim_block.get("seed", 0)) if seed_override is None else int(seed_override)
    try:
        sim = SimParams(
            dt=float(_need(sim_block, "dt", "simulation")),
            n_paths=int(_need(sim_block, "paths", "simulation")),
            seed=seed,
            t_max=(None if sim_block.get("t_max") is None else float(sim_block["t_max"])),
            tail_tol=float(sim_block.get("tail_tol", 1e-6)),
            zero_diffusion=bool(sim_block.get("zero_diffusion", False)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad simulation block: {exc}") from exc
    x0 = np.atleast_1d(np.asarray(_need(sim_block, "x0", "simulation"), dtype=float))
    regime0 = int(sim_block.get("regime0", 0))
    if not 0 <= regime0 < m:
        raise ConfigError("simulation.regime0 out of range")

    cc = raw.get("crosscheck", {})
    _strict(cc, {"threshold_abs"}, "crosscheck")
    threshold = float(cc.get("threshold_abs", 2e-2))

    out_block = raw.get("output", {})
    _strict(out_block, {"dir"}, "output")
    out_dir = out_override or out_block.get("dir", "switchctl-out")

    return ExperimentConfig(
        spec=spec,
        grid_nodes=nodes,
        solve_params=solve_params,
        continuation=continuation,
        region_tol=region_tol,
        pc1_tol=pc1_tol,
        grad_tol=grad_tol,
        sim=sim,
        x0=x0,
        regime0=regime0,
        crosscheck_threshold=threshold,
        out_dir=out_dir,
    )


def _esd5_tol(grid: Grid) -> float:
    # certification tolerance scales with the grid: 1e-3 * (1 + h / 1e-3)
    return 1e-3 * (1.0 + max(grid.spacing) / 1e-3)


def _validated(cfg: ExperimentConfig, out: Path, quiet: bool) -> tuple[bool, dict]:
    report = cfg.spec.validate()
    payload = {"report": report.to_dict()}
    artifacts.write_json(out / "validation.json", payload)
    if not quiet:
        status = "pass" if report.passed else "FAIL"
        print(f"validate: {status} ({len(report.issues)} issue(s)) -> {out/'validation.json'}")
    return report.passed, payload


def _cmd_validate(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    ok, _ = _validated(cfg, out, quiet)
    return 0 if ok else 2


def _cmd_solve(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    ok, _ = _validated(cfg, out, quiet)
    if not ok:
        return 2
    grid = Grid(cfg.spec.domain, cfg.grid_nodes)
    result = solve_npds(cfg.solve_params, cfg.spec, grid)
    write_field_csv(result.u, out / "u_epsdelta.csv")
    write_field_csv(result.vtilde, out / "vtilde.csv")
    res = residual_npds(result.u, cfg.solve_params, cfg.spec, grid)
    payload = {
        "solve": result.to_dict(),
        "epsilon": cfg.solve_params.epsilon,
        "delta": cfg.solve_params.delta,
        "tolerance": cfg.solve_params.tolerance,
        "residual_sup": float(np.max(np.abs(res))),
        "grid_nodes": list(cfg.grid_nodes),
    }
    artifacts.write_json(out / "solve.json", payload)
    if not quiet:
        print(
            f"solve: {result.iterations} iterations, residual {payload['residual_sup']:.3e} "
            f"-> {out/'u_epsdelta.csv'}"
        )
    return 0


def _run_limits(cfg: ExperimentConfig, grid: Grid):
    u_eps = continuation_delta(cfg.solve_params.epsilon, cfg.continuation, cfg.spec, grid)
    u_lim = continuation_epsilon(cfg.continuation, cfg.spec, grid)
    return u_eps, u_lim


def _cmd_limits(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    ok, _ = _validated(cfg, out, quiet)
    if not ok:
        return 2
    grid = Grid(cfg.spec.domain, cfg.grid_nodes)
    u_eps, u_lim = _run_limits(cfg, grid)
    write_field_csv(u_eps.u, out / "u_eps.csv")
    write_field_csv(u_lim.u, out / "u_limit.csv")
    pc1 = residual_pc1(u_eps.u, cfg.solve_params.epsilon, cfg.spec, grid)
    esd5 = residual_esd5(u_lim.u, cfg.spec, grid)
    esd5_tol = _esd5_tol(grid)
    grad_sup = float(np.max(esd5.terms["gradient"][:, grid.interior]))
    passes = (
        u_eps.certified
        and u_lim.certified
        and pc1.passes(cfg.pc1_tol)
        and esd5.passes(esd5_tol)
        and grad_sup <= cfg.grad_tol
    )
    payload = {
        "delta_ladder": u_eps.ladder_dict(),
        "epsilon_ladder": u_lim.ladder_dict(),
        "pc1": pc1.to_dict(),
        "pc1_tol": cfg.pc1_tol,
        "esd5": esd5.to_dict(),
        "esd5_tol": esd5_tol,
        "gradient_slack_sup": grad_sup,
        "grad_tol": cfg.grad_tol,
        "passed": passes,
    }
    artifacts.write_json(out / "limits.json", payload)
    if not quiet:
        print(
            f"limits: certified={u_eps.certified}/{u_lim.certified} "
            f"pc1=({pc1.sup_max:.2e},{pc1.sup_neg:.2e}) "
            f"esd5=({esd5.sup_max:.2e},{esd5.sup_neg:.2e}) grad={grad_sup:.2e}"
        )
    return 0 if passes else 2


def _cmd_regions(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    ok, _ = _validated(cfg, out, quiet)
    if not ok:
        return 2
    grid = Grid(cfg.spec.domain, cfg.grid_nodes)
    u_eps = continuation_delta(cfg.solve_params.epsilon, cfg.continuation, cfg.spec, grid)
    regions = extract_regions(u_eps.u, cfg.spec, grid, cfg.region_tol)
    report = check_region_decomposition(regions, u_eps.u, cfg.spec, cfg.region_tol)
    write_regions_csv(regions, out / "regions.csv")
    payload = {
        "delta_ladder": u_eps.ladder_dict(),
        "region_tol": cfg.region_tol,
        "counts": regions.region_counts(),
        "decomposition": report.to_dict(),
    }
    artifacts.write_json(out / "regions.json", payload)
    if not quiet:
        print(
            f"regions: counts={regions.region_counts()} "
            f"violators={len(report.violators)}"
        )
    return 0 if (u_eps.certified and report.passed) else 2


def _policy_for(cfg: ExperimentConfig, grid: Grid):
    u_eps = continuation_delta(cfg.solve_params.epsilon, cfg.continuation, cfg.spec, grid)
    policy = FeedbackPolicy.build(
        u_eps.u, cfg.solve_params.epsilon, cfg.spec, grid, switch_tol=cfg.region_tol
    )
    return u_eps, policy


def _cmd_simulate(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    ok, _ = _validated(cfg, out, quiet)
    if not ok:
        return 2
    grid = Grid(cfg.spec.domain, cfg.grid_nodes)
    u_eps, policy = _policy_for(cfg, grid)
    est = simulate_policy(policy, cfg.x0, cfg.regime0, cfg.sim, cfg.spec, grid)
    payload = {"estimate": est.to_dict(), "x0": cfg.x0.tolist(), "regime0": cfg.regime0}
    artifacts.write_json(out / "estimate.json", payload)
    if not quiet:
        print(
            f"simulate: mean={est.mean:.6g} se={est.standard_error:.3g} "
            f"paths={est.n_paths} backend={est.backend}"
        )
    return 0


def _cmd_crosscheck(cfg: ExperimentConfig, out: Path, quiet: bool) -> int:
    ok, _ = _validated(cfg, out, quiet)
    if not ok:
        return 2
    grid = Grid(cfg.spec.domain, cfg.grid_nodes)
    u_eps, policy = _policy_for(cfg, grid)
    write_field_csv(u_eps.u, out / "u_eps.csv")
    est = simulate_policy(policy, cfg.x0, cfg.regime0, cfg.sim, cfg.spec, grid)
    pde_value = interpolate(u_eps.u, cfg.regime0, cfg.x0)
    diff = abs(est.mean - pde_value)
    threshold = max(3.0 * est.standard_error, cfg.crosscheck_threshold)
    passed = bool(u_eps.certified and diff <= threshold)
    payload = {
        "pde_value": pde_value,
        "estimate": est.to_dict(),
        "abs_diff": diff,
        "threshold": threshold,
        "x0": cfg.x0.tolist(),
        "regime0": cfg.regime0,
        "delta_ladder_certified": u_eps.certified,
        "passed": passed,
    }
    artifacts.write_json(out / "crosscheck.json", payload)
    if not quiet:
        print(
            f"crosscheck: |mc - pde| = {diff:.4g} vs threshold {threshold:.4g} "
            f"({'pass' if passed else 'FAIL'})"
        )
    return 0 if passed else 2


_RUNNERS = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "limits": _cmd_limits,
    "regions": _cmd_regions,
    "simulate": _cmd_simulate,
    "crosscheck": _cmd_crosscheck,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="switchctl",
        description="Penalized HJB solver and Monte Carlo simulator for "
        "mixed singular/switching control",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="override the simulation seed")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        out = artifacts.ensure_dir(cfg.out_dir)
        return _RUNNERS[args.command](cfg, out, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SwitchctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
