"""Nonlinear penalized Dirichlet system solver at fixed (epsilon, delta).

The system couples m scalar unknowns u_l through

    [c_l - D_l] u_l + psi_eps(|grad u_l|^2 - g_l^2)
                    + sum_{k != l} psi_delta(u_l - u_k - theta_{l,k}) = h_l

with u_l = 0 on the boundary.  The solver runs a damped Picard iteration on
the fixed-point map whose inner step is the linear Dirichlet system with
all nonlinearities frozen at the previous iterate.  Two safeguards keep the
plain map practical at small penalty scales:

  * the switching penalty's frozen slope is moved to the left-hand side as
    a non-negative diagonal shift (same fixed points; the inner problem
    stays a linear Dirichlet solve, and the map no longer needs a
    relaxation factor of order delta once psi_delta is active);
  * the relaxation factor is halved on stall, restarting from the best
    iterate seen.

Convergence requires both a small sup-norm update and a system residual
below ten times the iteration tolerance, so the reported residual is
meaningful by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LinearSolveFailure, NoConvergence, NotValidatedError
from .grid import Grid, RegimeField, generator_raw, node_gradients
from .penalty import Penalty
from .problem import ProblemSpec


@dataclass
class SolveParams:
    """Knobs of one NPDS solve."""

    epsilon: float
    delta: float
    relaxation: float = 0.5
    max_iterations: int = 200_000
    tolerance: float = 1e-9
    linear_tol: float = 1e-12  # applies to the iterative fallback solver

    def __post_init__(self):
        if self.epsilon <= 0 or self.delta <= 0:
            raise ValueError("epsilon and delta must be positive")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class SolveResult:
    u: RegimeField
    iterations: int
    final_update: float
    residual_sup: float
    vtilde: RegimeField
    relaxation_used: float = 0.5

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_update": self.final_update,
            "residual_sup": self.residual_sup,
            "relaxation_used": self.relaxation_used,
        }


def assemble_operator(spec: ProblemSpec, grid: Grid, ell: int) -> sp.csr_matrix:
    """Sparse matrix of c_l - D_l with identity rows at boundary/exterior.

    Matches ``apply_generator`` stencil for stencil, so A @ u equals
    c*u - D u at interior rows for any field that vanishes on exterior
    nodes.  With diagonal diffusion the result is an M-matrix: off-diagonal
    entries are non-positive and rows are diagonally dominant with strict
    surplus c > 0.
    """
    tab = grid.coeff_tables(spec)
    d = grid.dimension
    n = grid.n_nodes
    strides = (grid.shape[1], 1) if d == 2 else (1,)
    interior = np.flatnonzero(grid.interior)

    rows = [interior]
    cols = [interior]
    diag = tab.c[ell][interior].copy()
    data_extra = []

    for ax in range(d):
        h = grid.spacing[ax]
        a_ax = tab.a[ell, ax, ax][interior]
        b_ax = tab.b[ell, ax][interior]
        bp = np.maximum(b_ax, 0.0)
        bm = np.minimum(b_ax, 0.0)
        diag += 2.0 * a_ax / (h * h) + (bp - bm) / h
        rows.append(interior)
        cols.append(interior + strides[ax])
        data_extra.append(-a_ax / (h * h) + bm / h)
        rows.append(interior)
        cols.append(interior - strides[ax])
        data_extra.append(-a_ax / (h * h) - bp / h)

    if d == 2 and not tab.diagonal:
        import warnings

        warnings.warn(
            "non-diagonal diffusion uses a non-monotone mixed-derivative stencil",
            stacklevel=2,
        )
        hx, hy = grid.spacing
        a01 = tab.a[ell, 0, 1][interior]
        w = a01 / (2.0 * hx * hy)
        for si, sj, sign in ((+1, +1, -1.0), (-1, -1, -1.0), (+1, -1, +1.0), (-1, +1, +1.0)):
            rows.append(interior)
            cols.append(interior + si * strides[0] + sj * strides[1])
            data_extra.append(sign * w)

    not_interior = np.flatnonzero(~grid.interior)
    rows.append(not_interior)
    cols.append(not_interior)

    data = np.concatenate([diag] + data_extra + [np.ones(not_interior.size)])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


class _RegimeSolvers:
    """Per-regime operators with cached base LU factorizations."""

    def __init__(self, spec: ProblemSpec, grid: Grid):
        self.grid = grid
        self.matrices = [assemble_operator(spec, grid, ell) for ell in range(spec.regimes)]
        self._base_lu = [None] * spec.regimes

    def _lu(self, ell: int):
        if self._base_lu[ell] is None:
            self._base_lu[ell] = spla.splu(self.matrices[ell].tocsc())
        return self._base_lu[ell]

    def solve(self, ell: int, rhs: np.ndarray, shift: np.ndarray | None = None) -> np.ndarray:
        try:
            if shift is None:
                out = self._lu(ell).solve(rhs)
            else:
                shifted = (self.matrices[ell] + sp.diags(shift)).tocsc()
                out = spla.splu(shifted).solve(rhs)
        except RuntimeError as exc:  # singular factorization
            raise LinearSolveFailure(str(exc)) from exc
        if not np.all(np.isfinite(out)):
            raise LinearSolveFailure("linear Dirichlet solve produced non-finite values")
        return out


def _operators(spec: ProblemSpec, grid: Grid) -> _RegimeSolvers:
    key = ("operators", id(spec))
    if key not in grid._cache:
        grid._cache[key] = _RegimeSolvers(spec, grid)
    return grid._cache[key]


def solve_linear_dirichlet(source: RegimeField, spec: ProblemSpec, grid: Grid) -> RegimeField:
    """Solve [c_l - D_l] v_l = source_l in the interior, v_l = 0 on the boundary."""
    if not spec.validated:
        raise NotValidatedError("validate the ProblemSpec before solving")
    ops = _operators(spec, grid)
    out = np.zeros_like(source.values)
    mask = grid.interior
    for ell in range(source.m):
        rhs = np.where(mask, source.values[ell], 0.0)
        out[ell] = ops.solve(ell, rhs)
    return RegimeField(grid, out)


def compute_vtilde(spec: ProblemSpec, grid: Grid) -> RegimeField:
    """Unpenalized Dirichlet solution with source h; the a-priori upper bound."""
    tab = grid.coeff_tables(spec)
    return solve_linear_dirichlet(RegimeField(grid, tab.h.copy()), spec, grid)


def residual_npds(
    u: RegimeField, params: SolveParams, spec: ProblemSpec, grid: Grid
) -> np.ndarray:
    """Pointwise system residual per regime at interior nodes (0 elsewhere)."""
    return _residual_raw(u.values, params, spec, grid)


def _residual_raw(
    values: np.ndarray, params: SolveParams, spec: ProblemSpec, grid: Grid
) -> np.ndarray:
    tab = grid.coeff_tables(spec)
    pen_e = Penalty(params.epsilon)
    pen_d = Penalty(params.delta)
    theta = spec.costs.matrix
    out = np.zeros_like(values)
    for ell in range(spec.regimes):
        grads = node_gradients(values[ell], grid)
        gn2 = np.sum(grads * grads, axis=1)
        r = (
            tab.c[ell] * values[ell]
            - generator_raw(values[ell], ell, spec, grid)
            + pen_e.psi(gn2 - tab.g[ell] ** 2)
            - tab.h[ell]
        )
        for kappa in range(spec.regimes):
            if kappa == ell:
                continue
            r += pen_d.psi(values[ell] - values[kappa] - theta[ell, kappa])
        out[ell] = np.where(grid.interior, r, 0.0)
    return out


def solve_npds(
    params: SolveParams,
    spec: ProblemSpec,
    grid: Grid,
    warm_start: RegimeField | None = None,
) -> SolveResult:
    """Damped Picard iteration on the frozen-nonlinearity fixed-point map.

    u_{k+1} = (1 - rho) u_k + rho T[u_k], where T[w] solves the linear
    Dirichlet system with source h - psi_eps(|grad w|^2 - g^2)
    - sum psi_delta(w_l - w_k - theta) and the switching penalty's frozen
    slope as a diagonal shift.  Starts from ``warm_start`` or vtilde; stops
    when the sup-norm update drops below tolerance and the residual is
    within 10x tolerance.  Bound violations are reported, never clamped.
    """
    if not spec.validated:
        raise NotValidatedError("validate the ProblemSpec before solving")
    m = spec.regimes
    tab = grid.coeff_tables(spec)
    ops = _operators(spec, grid)
    pen_e = Penalty(params.epsilon)
    pen_d = Penalty(params.delta)
    theta = spec.costs.matrix
    mask = grid.interior

    vtilde = compute_vtilde(spec, grid)
    u = (warm_start.values if warm_start is not None else vtilde.values).copy()

    rho = params.relaxation
    rho_floor = params.relaxation / 2.0**14
    best_upd = np.inf
    best_u = u.copy()
    since_best = 0
    upd = np.inf

    for it in range(1, params.max_iterations + 1):
        t_of_u = np.empty_like(u)
        for ell in range(m):
            grads = node_gradients(u[ell], grid)
            gn2 = np.sum(grads * grads, axis=1)
            src = tab.h[ell] - pen_e.psi(gn2 - tab.g[ell] ** 2)
            lam = np.zeros(grid.n_nodes)
            for kappa in range(m):
                if kappa == ell:
                    continue
                gap = u[ell] - u[kappa] - theta[ell, kappa]
                src -= pen_d.psi(gap)
                lam += pen_d.psi_prime(gap)
            lam = np.where(mask, lam, 0.0)
            src = np.where(mask, src + lam * u[ell], 0.0)
            t_of_u[ell] = ops.solve(ell, src, lam if lam.any() else None)

        unew = (1.0 - rho) * u + rho * t_of_u
        upd = float(np.max(np.abs(unew - u)))
        u = unew

        if upd < best_upd * 0.999:
            best_upd = upd
            best_u = u.copy()
            since_best = 0
        else:
            since_best += 1

        if upd < params.tolerance:
            res = float(np.max(np.abs(_residual_raw(u, params, spec, grid))))
            if res <= 10.0 * params.tolerance:
                return SolveResult(
                    u=RegimeField(grid, u),
                    iterations=it,
                    final_update=upd,
                    residual_sup=res,
                    vtilde=vtilde,
                    relaxation_used=rho,
                )
            if upd == 0.0:
                # bitwise fixed point that still misses the residual target
                raise NoConvergence(
                    f"fixed point reached with residual {res:g} above 10x tolerance",
                    it,
                    upd,
                )

        stall_window = max(40, int(8.0 / rho))
        if since_best >= stall_window or upd > max(1e3 * best_upd, 1e9):
            if rho <= rho_floor:
                raise NoConvergence(
                    f"stalled at relaxation floor after {it} iterations "
                    f"(last update {upd:g})",
                    it,
                    upd,
                )
            rho *= 0.5
            u = best_u.copy()
            since_best = 0

    raise NoConvergence(
        f"no convergence after {params.max_iterations} iterations "
        f"(last update {upd:g})",
        params.max_iterations,
        upd,
    )
