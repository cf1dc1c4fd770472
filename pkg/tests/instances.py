"""Shared problem instances used across the test suite."""
from __future__ import annotations

import numpy as np

from switchctl.catalog import constant
from switchctl.grid import Grid
from switchctl.problem import (
    Domain,
    ProblemSpec,
    RegimeCoefficients,
    SwitchingCosts,
    diagonal_a,
)

UNIT_INTERVAL = Domain("interval", (0.0,), (1.0,))


def regime_1d(a=1.0, b=0.0, c=1.0, h=1.0, g=0.3) -> RegimeCoefficients:
    return RegimeCoefficients(
        a=diagonal_a([constant(a)]),
        b=(constant(b),),
        c=constant(c),
        h=constant(h),
        g=constant(g),
    )


def make_spec(domain: Domain, regimes, theta) -> ProblemSpec:
    spec = ProblemSpec(
        domain,
        len(regimes),
        tuple(regimes),
        SwitchingCosts(np.asarray(theta, dtype=float)),
    )
    spec.validate()
    assert spec.validated
    return spec


def d1_spec() -> ProblemSpec:
    """The main 1d acceptance instance: h = (1, 0.5), theta = 0.2, g = 0.3."""
    return make_spec(
        UNIT_INTERVAL,
        [regime_1d(h=1.0), regime_1d(h=0.5)],
        [[0.0, 0.2], [0.2, 0.0]],
    )


def d1_grid(n: int = 201) -> Grid:
    return Grid(UNIT_INTERVAL, (n,))


def symmetric_spec() -> ProblemSpec:
    """Two identical regimes with positive symmetric switching costs."""
    return make_spec(
        UNIT_INTERVAL,
        [regime_1d(h=1.0), regime_1d(h=1.0)],
        [[0.0, 0.5], [0.5, 0.0]],
    )


def single_regime_spec(h=1.0, g=0.3) -> ProblemSpec:
    return make_spec(UNIT_INTERVAL, [regime_1d(h=h, g=g)], [[0.0]])


def asymmetric_spec() -> ProblemSpec:
    """Expensive regime 0 (h=4) with a cheap switch (theta=0.05): regime 0
    develops a nonempty switching region in the middle of the domain."""
    return make_spec(
        UNIT_INTERVAL,
        [regime_1d(h=4.0), regime_1d(h=0.5)],
        [[0.0, 0.05], [0.05, 0.0]],
    )


def flat_mc_spec() -> ProblemSpec:
    """Huge-domain constant-cost instance: h/c = 1, negligible exit
    probability, singular control never active (g huge)."""
    dom = Domain("interval", (-1e9,), (1e9,))
    return make_spec(dom, [regime_1d(a=0.5, h=1.0, g=1e9)], [[0.0]])


def rect_spec() -> ProblemSpec:
    dom = Domain("rectangle", (0.0, 0.0), (1.0, 2.0))
    co = RegimeCoefficients(
        a=diagonal_a([constant(1.0), constant(1.0)]),
        b=(constant(0.5), constant(0.0)),
        c=constant(1.0),
        h=constant(1.0),
        g=constant(0.4),
    )
    return make_spec(dom, [co], [[0.0]])


def disk_spec() -> ProblemSpec:
    dom = Domain("disk", (), (), center=(0.0, 0.0), radius=1.0)
    co = RegimeCoefficients(
        a=diagonal_a([constant(1.0), constant(1.0)]),
        b=(constant(0.0), constant(0.0)),
        c=constant(1.0),
        h=constant(1.0),
        g=constant(0.5),
    )
    return make_spec(dom, [co], [[0.0]])
