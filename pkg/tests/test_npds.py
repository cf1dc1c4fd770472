"""Linear Dirichlet solves, the a-priori bound field, and the NPDS solver."""
import numpy as np
import pytest

import instances
from switchctl.grid import Grid, RegimeField, gradient_norm
from switchctl.npds import (
    SolveParams,
    compute_vtilde,
    residual_npds,
    solve_linear_dirichlet,
    solve_npds,
)


def analytic_bvp(x):
    """v - v'' = 1 on (0,1), v(0) = v(1) = 0."""
    return 1.0 - (np.exp(x) + np.exp(1.0 - x)) / (1.0 + np.e)


def test_linear_zero_source(d1):
    spec, grid = d1
    out = solve_linear_dirichlet(RegimeField.zeros(grid, 2), spec, grid)
    assert np.allclose(out.values, 0.0)


def test_linear_analytic_bvp(d1):
    spec, grid = d1
    src = RegimeField(grid, np.ones((2, grid.n_nodes)))
    out = solve_linear_dirichlet(src, spec, grid)
    exact = analytic_bvp(grid.coords[:, 0])
    h = grid.spacing[0]
    assert np.max(np.abs(out.values[0] - exact)) <= 2.0 * h * h


def test_linear_positivity(d1):
    spec, grid = d1
    rng = np.random.default_rng(1)
    src = RegimeField(grid, rng.uniform(0.0, 2.0, size=(2, grid.n_nodes)))
    out = solve_linear_dirichlet(src, spec, grid)
    assert np.min(out.values) >= -1e-10  # discrete maximum principle


def test_vtilde_matches_bvp_and_nonnegative(d1):
    spec, grid = d1
    vt = compute_vtilde(spec, grid)
    exact = analytic_bvp(grid.coords[:, 0])
    assert np.max(np.abs(vt.values[0] - exact)) <= 5e-5
    assert np.max(np.abs(vt.values[1] - 0.5 * exact)) <= 5e-5  # h2 = 0.5
    assert np.min(vt.values) >= -1e-10


def test_vtilde_zero_cost():
    spec = instances.single_regime_spec(h=0.0)
    grid = instances.d1_grid(51)
    vt = compute_vtilde(spec, grid)
    assert np.allclose(vt.values, 0.0)


def test_residual_zero_everything():
    spec = instances.single_regime_spec(h=0.0)
    grid = instances.d1_grid(51)
    params = SolveParams(0.1, 0.1)
    res = residual_npds(RegimeField.zeros(grid, 1), params, spec, grid)
    assert np.allclose(res, 0.0)


def test_residual_at_vtilde_nonnegative(d1):
    spec, grid = d1
    params = SolveParams(0.1, 0.1)
    vt = compute_vtilde(spec, grid)
    res = residual_npds(vt, params, spec, grid)
    # vtilde solves the unpenalized system, so only penalties remain
    assert np.min(res) >= -1e-9


def test_solve_zero_data_one_iteration():
    spec = instances.make_spec(
        instances.UNIT_INTERVAL,
        [instances.regime_1d(h=0.0), instances.regime_1d(h=0.0)],
        [[0.0, 0.3], [0.3, 0.0]],
    )
    grid = instances.d1_grid(101)
    result = solve_npds(SolveParams(0.1, 0.1), spec, grid)
    assert result.iterations == 1
    assert np.allclose(result.u.values, 0.0)


def test_solve_main_instance(d1_solve):
    params, result, _ = d1_solve
    assert result.residual_sup <= 1e-8
    assert result.final_update < params.tolerance
    assert np.min(result.u.values) >= -1e-8
    assert np.max(result.u.values - result.vtilde.values) <= 1e-8


def test_solve_residual_within_ten_tolerances(d1, d1_solve):
    spec, grid = d1
    params, result, _ = d1_solve
    res = residual_npds(result.u, params, spec, grid)
    assert np.max(np.abs(res)) <= 10.0 * params.tolerance


def test_symmetric_regimes_match_single():
    spec2 = instances.symmetric_spec()
    spec1 = instances.single_regime_spec(h=1.0)
    grid = instances.d1_grid(201)
    params = SolveParams(0.1, 0.1, tolerance=1e-9)
    r2 = solve_npds(params, spec2, grid)
    r1 = solve_npds(params, spec1, grid)
    assert np.max(np.abs(r2.u.values[0] - r2.u.values[1])) <= 1e-8
    assert np.max(np.abs(r2.u.values[0] - r1.u.values[0])) <= 1e-6


def test_grid_self_convergence():
    spec = instances.d1_spec()
    coarse = instances.d1_grid(201)
    fine = instances.d1_grid(1601)
    params = SolveParams(0.1, 0.1, tolerance=1e-9)
    rc = solve_npds(params, spec, coarse)
    rf = solve_npds(params, spec, fine)
    diff = np.max(np.abs(rf.u.values[:, ::8] - rc.u.values))
    assert diff <= 5e-3


def test_warm_start_accepted(d1, d1_solve):
    spec, grid = d1
    params, result, _ = d1_solve
    again = solve_npds(params, spec, grid, warm_start=result.u)
    assert again.iterations <= result.iterations
    assert np.max(np.abs(again.u.values - result.u.values)) <= 10 * params.tolerance


def test_delta_monotonicity_on_active_instance():
    # halving delta never raises the solution (monotone penalty growth)
    spec = instances.asymmetric_spec()
    grid = instances.d1_grid(101)
    prev = None
    warm = None
    for delta in (0.2, 0.1, 0.05, 0.025):
        res = solve_npds(SolveParams(0.1, delta, tolerance=1e-10), spec, grid, warm_start=warm)
        if prev is not None:
            assert np.max(res.u.values - prev) <= 1e-6
        prev = res.u.values.copy()
        warm = res.u


def test_epsilon_monotonicity():
    spec = instances.d1_spec()
    grid = instances.d1_grid(101)
    prev = None
    warm = None
    for eps in (0.4, 0.2, 0.1, 0.05):
        res = solve_npds(SolveParams(eps, 0.1, tolerance=1e-10), spec, grid, warm_start=warm)
        if prev is not None:
            assert np.max(res.u.values - prev) <= 1e-6
        prev = res.u.values.copy()
        warm = res.u


def test_gradient_penalty_active_on_main_instance(d1_solve):
    # the instance is chosen so the gradient constraint actually bites
    _, result, _ = d1_solve
    gn = gradient_norm(result.u, 0, result.u.grid)
    assert np.max(gn) > 0.3


def test_solve_2d_rectangle():
    spec = instances.rect_spec()
    grid = Grid(spec.domain, (41, 61))
    result = solve_npds(SolveParams(0.2, 0.2, tolerance=1e-9), spec, grid)
    assert result.residual_sup <= 1e-8
    assert np.min(result.u.values) >= -1e-8
    assert np.max(result.u.values - result.vtilde.values) <= 1e-8


def test_solve_2d_disk():
    spec = instances.disk_spec()
    grid = Grid(spec.domain, (41, 41))
    result = solve_npds(SolveParams(0.2, 0.2, tolerance=1e-9), spec, grid)
    assert result.residual_sup <= 1e-8
    assert np.min(result.u.values) >= -1e-8
    # boundary layer and exterior stay pinned at zero
    assert np.allclose(result.u.values[:, ~result.u.grid.interior], 0.0)
