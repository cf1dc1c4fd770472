"""Continuation to the double penalization limit, residual certification,
and region extraction.

The switching penalty is removed first (delta ladder inside each epsilon
rung, warm-started), then the gradient penalty (epsilon ladder).  A ladder
stops when successive rungs differ by less than the stop threshold in
sup norm; the epsilon ladder additionally requires the gradient constraint
slack max(|grad u| - g) to fall under ``grad_slack``, because early rungs
can agree in value while the constraint is still far from binding.  If the
rung cap is hit first, the best iterate is returned flagged non-certified.

Residual reports check the two complementarity systems: the
epsilon-penalized two-term system for u^eps, and the three-term
variational system for the final limit.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, RegimeField, generator_raw, node_gradients
from .npds import SolveParams, compute_vtilde, solve_npds
from .penalty import Penalty
from .problem import ProblemSpec

LABELS = ("continuation", "switching", "gradient_binding")
CONTINUATION, SWITCHING, GRADIENT_BINDING = 0, 1, 2


@dataclass
class ContinuationParams:
    """Ladder schedule for the double limit delta -> 0, then epsilon -> 0."""

    delta0: float = 0.5
    epsilon0: float = 0.5
    shrink: float = 0.5
    stop: float = 1e-4
    max_rungs: int = 40
    grad_slack: float = 5e-3  # epsilon-ladder certification of |grad u| <= g
    solve_tolerance: float = 1e-9
    relaxation: float = 0.5
    max_iterations: int = 200_000

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.stop <= 0 or self.grad_slack <= 0:
            raise ValueError("thresholds must be positive")


@dataclass
class Rung:
    epsilon: float
    delta: float
    iterations: int
    residual_sup: float
    sup_diff: float | None
    relaxation_used: float

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "iterations": self.iterations,
            "residual_sup": self.residual_sup,
            "sup_diff": self.sup_diff,
            "relaxation_used": self.relaxation_used,
        }


@dataclass
class ContinuationResult:
    u: RegimeField
    rungs: list[Rung]
    certified: bool
    vtilde: RegimeField

    def ladder_dict(self) -> dict:
        return {
            "certified": self.certified,
            "rungs": [r.to_dict() for r in self.rungs],
        }


def _grad_slack(u: RegimeField, spec: ProblemSpec, grid: Grid) -> float:
    tab = grid.coeff_tables(spec)
    worst = -np.inf
    for ell in range(spec.regimes):
        grads = node_gradients(u.values[ell], grid)
        gn = np.sqrt(np.sum(grads * grads, axis=1))
        worst = max(worst, float(np.max((gn - tab.g[ell])[grid.interior])))
    return worst


def continuation_delta(
    epsilon: float,
    params: ContinuationParams,
    spec: ProblemSpec,
    grid: Grid,
    warm_start: RegimeField | None = None,
) -> ContinuationResult:
    """Remove the switching penalty at fixed epsilon: solve along a
    shrinking delta ladder with warm starts until successive rungs agree.

    With one regime the switching penalty is absent and a single solve is
    returned certified.
    """
    rungs: list[Rung] = []
    delta = params.delta0
    rho = params.relaxation
    prev: RegimeField | None = None
    result = None
    for _ in range(params.max_rungs):
        sp = SolveParams(
            epsilon=epsilon,
            delta=delta,
            relaxation=rho,
            max_iterations=params.max_iterations,
            tolerance=params.solve_tolerance,
        )
        result = solve_npds(sp, spec, grid, warm_start=prev if prev is not None else warm_start)
        # reuse the rung's working relaxation, with headroom to recover
        rho = min(params.relaxation, 2.0 * result.relaxation_used)
        diff = result.u.sup_diff(prev) if prev is not None else None
        rungs.append(
            Rung(epsilon, delta, result.iterations, result.residual_sup, diff, result.relaxation_used)
        )
        if spec.regimes == 1:
            return ContinuationResult(result.u, rungs, True, result.vtilde)
        if diff is not None and diff < params.stop:
            return ContinuationResult(result.u, rungs, True, result.vtilde)
        prev = result.u
        delta *= params.shrink
    return ContinuationResult(result.u, rungs, False, result.vtilde)


def continuation_epsilon(
    params: ContinuationParams,
    spec: ProblemSpec,
    grid: Grid,
) -> ContinuationResult:
    """Full double limit: a delta ladder inside each epsilon rung.

    Certification requires both rung agreement in sup norm and the gradient
    constraint slack under ``params.grad_slack`` (the limit object must
    satisfy |grad u| <= g; value agreement alone can fire while the penalty
    is still in its shallow zone).
    """
    rungs: list[Rung] = []
    epsilon = params.epsilon0
    rho = params.relaxation
    prev: RegimeField | None = None
    inner = None
    for _ in range(params.max_rungs):
        inner_params = ContinuationParams(
            delta0=params.delta0,
            epsilon0=params.epsilon0,
            shrink=params.shrink,
            stop=params.stop,
            max_rungs=params.max_rungs,
            grad_slack=params.grad_slack,
            solve_tolerance=params.solve_tolerance,
            relaxation=rho,
            max_iterations=params.max_iterations,
        )
        inner = continuation_delta(epsilon, inner_params, spec, grid, warm_start=prev)
        rho = min(params.relaxation, 2.0 * inner.rungs[-1].relaxation_used)
        diff = inner.u.sup_diff(prev) if prev is not None else None
        last = inner.rungs[-1]
        rungs.append(Rung(epsilon, last.delta, last.iterations, last.residual_sup, diff, last.relaxation_used))
        if inner.certified and diff is not None and diff < params.stop:
            if _grad_slack(inner.u, spec, grid) <= params.grad_slack:
                return ContinuationResult(inner.u, rungs, True, inner.vtilde)
        prev = inner.u
        epsilon *= params.shrink
    return ContinuationResult(inner.u, rungs, False, inner.vtilde)


def switching_value_tables(u: RegimeField, spec: ProblemSpec) -> np.ndarray:
    """M_l u at every node: min over k != l of u_k + theta_{l,k}; +inf for m=1."""
    m = spec.regimes
    theta = spec.costs.matrix
    out = np.full_like(u.values, np.inf)
    for ell in range(m):
        for kappa in range(m):
            if kappa == ell:
                continue
            out[ell] = np.minimum(out[ell], u.values[kappa] + theta[ell, kappa])
    return out


@dataclass
class ComplementarityReport:
    """Per-node complementarity diagnostics for one variational system."""

    terms: dict[str, np.ndarray]  # per-regime arrays (m, N), interior only
    sup_max: float  # sup over nodes of max(terms)  (should be <= tol)
    sup_neg: float  # sup over nodes of -max(terms) (should be <= tol)

    def passes(self, tol: float) -> bool:
        return self.sup_max <= tol and self.sup_neg <= tol

    def to_dict(self) -> dict:
        return {"sup_max": self.sup_max, "sup_neg": self.sup_neg}


def _max_terms(terms: list[np.ndarray], interior: np.ndarray) -> tuple[float, float]:
    stacked = np.maximum.reduce(terms)
    vals = stacked[:, interior]
    return float(vals.max()), float((-vals).max())


def residual_pc1(
    u_eps: RegimeField, epsilon: float, spec: ProblemSpec, grid: Grid
) -> ComplementarityReport:
    """Check max{[c-D]u + psi_eps(|grad u|^2-g^2) - h, u - Mu} = 0."""
    tab = grid.coeff_tables(spec)
    pen = Penalty(epsilon)
    m = spec.regimes
    a_term = np.zeros_like(u_eps.values)
    for ell in range(m):
        grads = node_gradients(u_eps.values[ell], grid)
        gn2 = np.sum(grads * grads, axis=1)
        a_term[ell] = (
            tab.c[ell] * u_eps.values[ell]
            - generator_raw(u_eps.values[ell], ell, spec, grid)
            + pen.psi(gn2 - tab.g[ell] ** 2)
            - tab.h[ell]
        )
    terms = [a_term]
    if m > 1:
        b_term = u_eps.values - switching_value_tables(u_eps, spec)
        terms.append(b_term)
    interior = grid.interior
    sup_max, sup_neg = _max_terms(terms, interior)
    named = {"pde": a_term}
    if m > 1:
        named["switching"] = terms[1]
    return ComplementarityReport(named, sup_max, sup_neg)


def residual_esd5(u: RegimeField, spec: ProblemSpec, grid: Grid) -> ComplementarityReport:
    """Check max{[c-D]u - h, |grad u| - g, u - Mu} = 0 for the limit field."""
    tab = grid.coeff_tables(spec)
    m = spec.regimes
    t1 = np.zeros_like(u.values)
    t2 = np.zeros_like(u.values)
    for ell in range(m):
        t1[ell] = (
            tab.c[ell] * u.values[ell]
            - generator_raw(u.values[ell], ell, spec, grid)
            - tab.h[ell]
        )
        grads = node_gradients(u.values[ell], grid)
        t2[ell] = np.sqrt(np.sum(grads * grads, axis=1)) - tab.g[ell]
    terms = [t1, t2]
    if m > 1:
        terms.append(u.values - switching_value_tables(u, spec))
    sup_max, sup_neg = _max_terms(terms, grid.interior)
    named = {"pde": t1, "gradient": t2}
    if m > 1:
        named["switching"] = terms[2]
    return ComplementarityReport(named, sup_max, sup_neg)


@dataclass
class RegionMap:
    """Per-regime, per-node classification into the three control regions."""

    grid: Grid
    labels: np.ndarray  # (m, N) int8, valid at interior nodes
    switch_mask: np.ndarray  # (m, N) bool: u - Mu >= -tol
    grad_mask: np.ndarray  # (m, N) bool: |grad u| - g >= -tol
    targets: dict[tuple[int, int], list[int]]  # (regime, node) -> achieving kappas
    tol: float

    def label_name(self, ell: int, node: int) -> str:
        return LABELS[self.labels[ell, node]]

    def switching_nodes(self, ell: int) -> np.ndarray:
        return np.flatnonzero((self.labels[ell] == SWITCHING) & self.grid.interior)

    def region_counts(self) -> dict[str, list[int]]:
        out = {name: [] for name in LABELS}
        for ell in range(self.labels.shape[0]):
            inner = self.labels[ell][self.grid.interior]
            for code, name in enumerate(LABELS):
                out[name].append(int(np.sum(inner == code)))
        return out


def extract_regions(
    u_eps: RegimeField, spec: ProblemSpec, grid: Grid, tol: float
) -> RegionMap:
    """Classify interior nodes: switching where u - Mu >= -tol, gradient
    binding where |grad u| - g >= -tol, continuation otherwise.

    Switching takes precedence in the single label; both raw masks are kept
    so overlaps near region interfaces stay visible.
    """
    tab = grid.coeff_tables(spec)
    m = spec.regimes
    theta = spec.costs.matrix
    labels = np.zeros_like(u_eps.values, dtype=np.int8)
    mu = switching_value_tables(u_eps, spec)
    switch_mask = (u_eps.values - mu) >= -tol if m > 1 else np.zeros_like(labels, dtype=bool)
    grad_mask = np.zeros_like(switch_mask)
    for ell in range(m):
        grads = node_gradients(u_eps.values[ell], grid)
        gn = np.sqrt(np.sum(grads * grads, axis=1))
        grad_mask[ell] = (gn - tab.g[ell]) >= -tol
    labels[grad_mask] = GRADIENT_BINDING
    labels[switch_mask] = SWITCHING
    labels[:, ~grid.interior] = CONTINUATION

    targets: dict[tuple[int, int], list[int]] = {}
    for ell in range(m):
        for node in np.flatnonzero(switch_mask[ell] & grid.interior):
            close = [
                kappa
                for kappa in range(m)
                if kappa != ell
                and abs(
                    u_eps.values[ell, node]
                    - u_eps.values[kappa, node]
                    - theta[ell, kappa]
                )
                <= tol
            ]
            targets[(ell, int(node))] = close
    return RegionMap(grid, labels, switch_mask & grid.interior, grad_mask & grid.interior, targets, tol)


@dataclass
class DecompositionReport:
    """Switching-region decomposition check: every switching node of regime l
    must reach some regime k at exact cost (|u_l - u_k - theta| <= tol) that
    is itself in continuation (u_k - Mu_k < -tol) at that node."""

    violators: list[tuple[int, int]]
    n_switching: int
    tol: float

    @property
    def passed(self) -> bool:
        return not self.violators

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_switching": self.n_switching,
            "violators": [list(v) for v in self.violators],
            "tol": self.tol,
        }


def check_region_decomposition(
    regions: RegionMap,
    u_eps: RegimeField,
    spec: ProblemSpec,
    tol: float,
) -> DecompositionReport:
    m = spec.regimes
    theta = spec.costs.matrix
    mu = switching_value_tables(u_eps, spec)
    violators: list[tuple[int, int]] = []
    n_switch = 0
    for ell in range(m):
        for node in regions.switching_nodes(ell):
            n_switch += 1
            ok = False
            for kappa in range(m):
                if kappa == ell:
                    continue
                gap = u_eps.values[ell, node] - u_eps.values[kappa, node] - theta[ell, kappa]
                kappa_continuation = (u_eps.values[kappa, node] - mu[kappa, node]) < -tol
                if abs(gap) <= tol and kappa_continuation:
                    ok = True
                    break
            if not ok:
                violators.append((ell, int(node)))
    return DecompositionReport(violators, n_switch, tol)


def write_regions_csv(regions: RegionMap, path) -> None:
    """One row per interior node and regime: coordinates, label, targets."""
    grid = regions.grid
    coord_cols = [f"x{ax + 1}" for ax in range(grid.dimension)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(coord_cols + ["regime", "label", "targets"])
        for ell in range(regions.labels.shape[0]):
            for node in np.flatnonzero(grid.interior):
                row = [f"{c:.17g}" for c in grid.coords[node]]
                row.append(str(ell))
                row.append(regions.label_name(ell, int(node)))
                kap = regions.targets.get((ell, int(node)), [])
                row.append(";".join(str(k) for k in kap))
                writer.writerow(row)
