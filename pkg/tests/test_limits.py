"""Continuation ladders, complementarity residuals, and region extraction."""
import numpy as np
import pytest

import instances
from switchctl.grid import RegimeField
from switchctl.limits import (
    CONTINUATION,
    SWITCHING,
    ContinuationParams,
    check_region_decomposition,
    continuation_delta,
    continuation_epsilon,
    extract_regions,
    residual_esd5,
    residual_pc1,
    switching_value_tables,
    write_regions_csv,
)


def test_delta_ladder_zero_data():
    spec = instances.make_spec(
        instances.UNIT_INTERVAL,
        [instances.regime_1d(h=0.0), instances.regime_1d(h=0.0)],
        [[0.0, 0.3], [0.3, 0.0]],
    )
    grid = instances.d1_grid(51)
    res = continuation_delta(0.1, ContinuationParams(), spec, grid)
    assert res.certified
    assert len(res.rungs) == 2  # needs one diff measurement to stop
    assert np.allclose(res.u.values, 0.0)


def test_delta_ladder_single_regime_one_rung():
    spec = instances.single_regime_spec()
    grid = instances.d1_grid(101)
    res = continuation_delta(0.1, ContinuationParams(), spec, grid)
    assert res.certified and len(res.rungs) == 1


def test_delta_ladder_main_instance(d1_delta_limit):
    res, _ = d1_delta_limit
    assert res.certified
    diffs = [r.sup_diff for r in res.rungs if r.sup_diff is not None]
    assert diffs[-1] < 1e-4


def test_delta_ladder_diffs_decrease_on_active_instance(asym_delta_limit):
    res, _ = asym_delta_limit
    assert res.certified
    diffs = [r.sup_diff for r in res.rungs if r.sup_diff is not None]
    peak = int(np.argmax(diffs))
    assert all(d2 <= d1 for d1, d2 in zip(diffs[peak:], diffs[peak + 1 :]))


def test_epsilon_ladder_certifies_gradient(d1, d1_eps_limit):
    spec, grid = d1
    res, _ = d1_eps_limit
    assert res.certified
    rep = residual_esd5(res.u, spec, grid)
    grad_sup = float(np.max(rep.terms["gradient"][:, grid.interior]))
    assert grad_sup <= 5e-3


def test_pc1_trivial_zero_case():
    spec = instances.make_spec(
        instances.UNIT_INTERVAL,
        [instances.regime_1d(h=0.0), instances.regime_1d(h=0.0)],
        [[0.0, 0.3], [0.3, 0.0]],
    )
    grid = instances.d1_grid(51)
    zero = RegimeField.zeros(grid, 2)
    rep = residual_pc1(zero, 0.1, spec, grid)
    # A = 0 and B = -theta < 0, so max = 0 exactly
    assert rep.sup_max == pytest.approx(0.0, abs=1e-14)
    assert rep.sup_neg == pytest.approx(0.0, abs=1e-14)


def test_pc1_certified_limit(d1, d1_delta_limit):
    spec, grid = d1
    res, _ = d1_delta_limit
    rep = residual_pc1(res.u, 0.1, spec, grid)
    assert rep.sup_max <= 1e-3
    assert rep.sup_neg <= 1e-3


def test_esd5_certified_limit(d1, d1_eps_limit):
    spec, grid = d1
    res, _ = d1_eps_limit
    rep = residual_esd5(res.u, spec, grid)
    tol = 1e-3 * (1.0 + max(grid.spacing) / 1e-3)
    assert rep.sup_max <= tol
    assert rep.sup_neg <= tol


def test_esd5_single_regime_two_term():
    spec = instances.single_regime_spec()
    grid = instances.d1_grid(101)
    res = continuation_epsilon(ContinuationParams(), spec, grid)
    rep = residual_esd5(res.u, spec, grid)
    assert "switching" not in rep.terms
    tol = 1e-3 * (1.0 + max(grid.spacing) / 1e-3)
    assert rep.sup_max <= tol and rep.sup_neg <= tol


def test_switching_tables_match_operator(d1, d1_solve):
    spec, grid = d1
    _, result, _ = d1_solve
    mu = switching_value_tables(result.u, spec)
    expect0 = result.u.values[1] + 0.2
    assert np.allclose(mu[0], expect0)


def test_regions_symmetric_no_switching(d1):
    spec2 = instances.symmetric_spec()
    grid = instances.d1_grid(101)
    res = continuation_delta(0.1, ContinuationParams(), spec2, grid)
    regions = extract_regions(res.u, spec2, grid, tol=1e-3)
    assert regions.switching_nodes(0).size == 0
    assert regions.switching_nodes(1).size == 0


def test_regions_zero_data_all_continuation():
    spec = instances.make_spec(
        instances.UNIT_INTERVAL,
        [instances.regime_1d(h=0.0), instances.regime_1d(h=0.0)],
        [[0.0, 0.3], [0.3, 0.0]],
    )
    grid = instances.d1_grid(51)
    regions = extract_regions(RegimeField.zeros(grid, 2), spec, grid, tol=1e-3)
    assert np.all(regions.labels[:, grid.interior] == CONTINUATION)


def test_regions_asymmetric_switching_nonempty(asym, asym_delta_limit):
    spec, grid = asym
    res, _ = asym_delta_limit
    regions = extract_regions(res.u, spec, grid, tol=1e-3)
    assert regions.switching_nodes(0).size > 0  # expensive regime switches out
    assert regions.switching_nodes(1).size == 0
    # every switching node knows its achieving target
    for node in regions.switching_nodes(0):
        assert regions.targets[(0, int(node))] == [1]


def test_decomposition_empty_vacuous(d1, d1_delta_limit):
    spec, grid = d1
    res, _ = d1_delta_limit
    regions = extract_regions(res.u, spec, grid, tol=1e-3)
    report = check_region_decomposition(regions, res.u, spec, tol=1e-3)
    assert report.passed and report.n_switching == 0


def test_decomposition_asymmetric_passes(asym, asym_delta_limit):
    spec, grid = asym
    res, _ = asym_delta_limit
    regions = extract_regions(res.u, spec, grid, tol=1e-3)
    report = check_region_decomposition(regions, res.u, spec, tol=1e-3)
    assert report.n_switching > 0
    assert report.passed


def test_decomposition_detects_constructed_violation(asym, asym_delta_limit):
    spec, grid = asym
    res, _ = asym_delta_limit
    regions = extract_regions(res.u, spec, grid, tol=1e-3)
    node = int(regions.switching_nodes(0)[0])
    # push the target regime's value up by theta at one node: the stored
    # switching label no longer has a regime that closes the gap there
    broken = res.u.copy()
    broken.values[1, node] += 0.05
    report = check_region_decomposition(regions, broken, spec, tol=1e-3)
    assert (0, node) in report.violators


def test_switching_cost_coherence(asym, asym_delta_limit):
    # at switching nodes u_l <= u_k + theta_{l,k} + tol for all k
    spec, grid = asym
    res, _ = asym_delta_limit
    regions = extract_regions(res.u, spec, grid, tol=1e-3)
    theta = spec.costs.matrix
    for node in regions.switching_nodes(0):
        assert res.u.values[0, node] <= res.u.values[1, node] + theta[0, 1] + 1e-3


def test_regions_csv(tmp_path, asym, asym_delta_limit):
    spec, grid = asym
    res, _ = asym_delta_limit
    regions = extract_regions(res.u, spec, grid, tol=1e-3)
    path = tmp_path / "regions.csv"
    write_regions_csv(regions, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "x1,regime,label,targets"
    assert len(lines) == 1 + 2 * int(np.sum(grid.interior))
    assert any(",switching," in line for line in lines)
