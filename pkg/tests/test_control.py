"""Feedback-policy synthesis: rates, directions, and switching decisions."""
import numpy as np
import pytest

import instances
from switchctl.control import FeedbackPolicy, control_at, next_regime, should_switch
from switchctl.errors import OutOfDomainError, SingleRegimeError
from switchctl.grid import RegimeField, interpolate
from switchctl.limits import extract_regions


def linear_policy(slope, epsilon=0.5, g=1.0, spec=None, n=101):
    spec = spec or instances.single_regime_spec(g=g)
    grid = instances.d1_grid(n)
    x = grid.coords[:, 0]
    field = RegimeField(grid, (slope * x)[None, :].copy())
    return FeedbackPolicy.build(field, epsilon, spec, grid), spec, grid


def test_rate_zero_when_gradient_below_g():
    policy, _, _ = linear_policy(slope=0.5, epsilon=0.5, g=1.0)
    direction, rate = control_at(policy, [0.5], 0)
    assert rate == 0.0
    assert direction[0] == pytest.approx(1.0)  # gradient direction, not gamma0


def test_gamma0_fallback_on_flat_field():
    spec = instances.single_regime_spec(g=1.0)
    grid = instances.d1_grid(51)
    policy = FeedbackPolicy.build(RegimeField.zeros(grid, 1), 0.5, spec, grid)
    direction, rate = control_at(policy, [0.5], 0)
    assert rate == 0.0
    assert np.allclose(direction, policy.gamma0)


def test_linear_branch_rate_arithmetic():
    # |grad u| = 2, g = 1, eps = 0.5: argument 3 >= 2 eps so psi' = 1/eps
    policy, _, _ = linear_policy(slope=2.0, epsilon=0.5, g=1.0)
    direction, rate = control_at(policy, [0.5], 0)
    assert rate == pytest.approx(8.0)
    assert direction[0] == pytest.approx(1.0)


def test_rate_cap_invariant():
    rng = np.random.default_rng(13)
    spec = instances.single_regime_spec(g=0.3)
    grid = instances.d1_grid(101)
    field = RegimeField(grid, rng.normal(size=(1, grid.n_nodes)) * 0.05)
    policy = FeedbackPolicy.build(field, 0.07, spec, grid)
    for x in rng.uniform(0.0, 1.0, size=200):
        _, rate = control_at(policy, [x], 0)
        assert rate <= policy.rate_cap + 1e-9


def test_out_of_domain():
    policy, _, _ = linear_policy(slope=1.0)
    with pytest.raises(OutOfDomainError):
        control_at(policy, [1.2], 0)
    with pytest.raises(OutOfDomainError):
        should_switch(policy, [-0.1], 0)


def test_switch_decision_arithmetic(d1, d1_solve):
    spec, grid = d1
    _, result, _ = d1_solve
    policy = FeedbackPolicy.build(result.u, 0.1, spec, grid, switch_tol=1e-3)
    # u0 - (u1 + 0.2) is far negative on this instance
    assert not should_switch(policy, [0.5], 0)
    assert next_regime(policy, [0.5], 0) == 1


def test_symmetric_instance_never_switches():
    spec = instances.symmetric_spec()
    grid = instances.d1_grid(101)
    from switchctl.npds import SolveParams, solve_npds

    res = solve_npds(SolveParams(0.1, 0.1), spec, grid)
    policy = FeedbackPolicy.build(res.u, 0.1, spec, grid, switch_tol=1e-3)
    for x in np.linspace(0.05, 0.95, 19):
        assert not should_switch(policy, [x], 0)
        assert not should_switch(policy, [x], 1)


def test_single_regime_behaviour():
    policy, _, _ = linear_policy(slope=1.0)
    assert not should_switch(policy, [0.5], 0)
    with pytest.raises(SingleRegimeError):
        next_regime(policy, [0.5], 0)


def test_argmin_shift_invariance(d1, d1_solve):
    spec, grid = d1
    _, result, _ = d1_solve
    policy = FeedbackPolicy.build(result.u, 0.1, spec, grid)
    shifted = result.u.copy()
    shifted.values += 3.7
    policy2 = FeedbackPolicy.build(shifted, 0.1, spec, grid)
    for x in np.linspace(0.1, 0.9, 9):
        assert next_regime(policy, [x], 0) == next_regime(policy2, [x], 0)


def test_switch_consistent_with_regions(asym, asym_delta_limit):
    spec, grid = asym
    res, _ = asym_delta_limit
    tol = 1e-3
    regions = extract_regions(res.u, spec, grid, tol)
    policy = FeedbackPolicy.build(res.u, 0.1, spec, grid, switch_tol=tol)
    nodes = regions.switching_nodes(0)
    assert nodes.size > 0
    for node in nodes:
        x = grid.coords[node]
        assert should_switch(policy, x, 0)
        assert next_regime(policy, x, 0) in regions.targets[(0, int(node))]
        # after the prescribed switch the new regime wants to stay
        assert not should_switch(policy, x, next_regime(policy, x, 0))


def test_policy_value_interpolation_consistency(d1, d1_solve):
    spec, grid = d1
    _, result, _ = d1_solve
    policy = FeedbackPolicy.build(result.u, 0.1, spec, grid)
    x = np.array([[0.31], [0.62]])
    vals = policy.values_at(x)
    assert vals[0, 0] == pytest.approx(interpolate(result.u, 0, [0.31]))
    assert vals[1, 1] == pytest.approx(interpolate(result.u, 1, [0.62]))
