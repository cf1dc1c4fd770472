"""Problem model: hypothesis validation and the switching operator."""
import numpy as np
import pytest

import instances
from switchctl.catalog import constant, quadratic
from switchctl.errors import SingleRegimeError
from switchctl.problem import (
    Domain,
    ProblemSpec,
    RegimeCoefficients,
    SwitchingCosts,
    diagonal_a,
    switching_operator,
    validate_coefficients,
    validate_switching_costs,
)


def test_domain_invariants():
    with pytest.raises(ValueError):
        Domain("interval", (1.0,), (0.0,))
    with pytest.raises(ValueError):
        Domain("disk", (), (), center=(0.0, 0.0), radius=0.0)
    d = Domain("disk", (), (), center=(1.0, 2.0), radius=0.5)
    assert d.lower == (0.5, 1.5) and d.upper == (1.5, 2.5)
    assert d.dimension == 2


def test_switching_costs_pass():
    report = validate_switching_costs(SwitchingCosts(np.array([[0.0, 1.0], [1.0, 0.0]])), 2)
    assert report.passed


def test_switching_costs_zero_loop():
    report = validate_switching_costs(SwitchingCosts(np.zeros((2, 2))), 2)
    assert report.kinds() == {"ZeroCostLoop"}
    (issue,) = report.issues
    cycle = issue.data["cycle"]
    assert cycle[0] == cycle[-1] and set(cycle) == {0, 1}


def test_switching_costs_triangle_violation():
    theta = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    report = validate_switching_costs(SwitchingCosts(theta), 3)
    assert "TriangleViolation" in report.kinds()
    hit = [i for i in report.issues if i.kind == "TriangleViolation"]
    assert any(i.data["triple"] == (0, 1, 2) and i.data["direct"] == 5.0 and i.data["via"] == 2.0
               for i in hit)


def test_switching_costs_positive_offdiagonal_never_loops():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = int(rng.integers(2, 6))
        theta = rng.uniform(0.1, 1.0, size=(m, m))
        np.fill_diagonal(theta, 0.0)
        report = validate_switching_costs(SwitchingCosts(theta), m)
        assert "ZeroCostLoop" not in report.kinds()


def test_validate_coefficients_pass():
    spec = instances.single_regime_spec(h=1.0, g=1.0)
    report = validate_coefficients(spec, samples=32)
    assert report.passed
    assert report.stats["theta"] == pytest.approx(1.0)


def test_validate_coefficients_degenerate():
    dom = Domain("rectangle", (-1.0, -1.0), (1.0, 1.0))
    co = RegimeCoefficients(
        a=diagonal_a([quadratic(0.0, [0.0, 0.0], [[1.0, 0.0], [0.0, 0.0]]), constant(1.0)]),
        b=(constant(0.0), constant(0.0)),
        c=constant(1.0),
        h=constant(1.0),
        g=constant(1.0),
    )
    spec = ProblemSpec(dom, 1, (co,), SwitchingCosts(np.zeros((1, 1))))
    report = validate_coefficients(spec, samples=17)  # odd count hits x1 = 0
    assert "DegenerateEllipticity" in report.kinds()


def test_validate_coefficients_nonpositive_discount():
    spec = ProblemSpec(
        instances.UNIT_INTERVAL,
        1,
        (RegimeCoefficients(
            a=diagonal_a([constant(1.0)]),
            b=(constant(0.0),),
            c=constant(0.0),
            h=constant(1.0),
            g=constant(1.0),
        ),),
        SwitchingCosts(np.zeros((1, 1))),
    )
    report = validate_coefficients(spec, samples=8)
    assert "NonpositiveDiscount" in report.kinds()


def test_validate_marks_spec():
    spec = instances.d1_spec()
    assert spec.validated


def test_switching_operator_examples():
    costs = SwitchingCosts(np.array([[0.0, 0.5], [0.5, 0.0]]))
    assert switching_operator([2.0, 3.0], costs, 0) == (3.5, 1)

    costs3 = SwitchingCosts(np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]))
    value, target = switching_operator([0.0, 0.0, 0.0], costs3, 0)
    assert value == 1.0 and target == 1  # tie broken to the lowest index

    theta = np.zeros((3, 3))
    theta[1, 0] = 2.0
    theta[1, 2] = 0.5
    value, target = switching_operator([5.0, 1.0, 4.0], SwitchingCosts(theta), 1)
    assert value == 4.5 and target == 2


def test_switching_operator_single_regime():
    with pytest.raises(SingleRegimeError):
        switching_operator([1.0], SwitchingCosts(np.zeros((1, 1))), 0)


def test_switching_operator_monotone_and_tight():
    rng = np.random.default_rng(11)
    for _ in range(200):
        m = int(rng.integers(2, 6))
        theta = rng.uniform(0.0, 2.0, size=(m, m))
        np.fill_diagonal(theta, 0.0)
        costs = SwitchingCosts(theta)
        values = rng.normal(size=m)
        ell = int(rng.integers(0, m))
        base, target = switching_operator(values, costs, ell)
        # tight at the winner, a lower bound everywhere else
        for k in range(m):
            if k != ell:
                assert base <= values[k] + theta[ell, k] + 1e-12
        assert base == pytest.approx(values[target] + theta[ell, target])
        # raising any other value never lowers the operator
        bump = values.copy()
        k = int(rng.integers(0, m))
        bump[k] += rng.uniform(0.0, 1.0)
        raised, _ = switching_operator(bump, costs, ell)
        assert raised >= base - 1e-12
