"""Session-scoped pipeline fixtures shared by unit and acceptance tests."""
from __future__ import annotations

import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import instances  # noqa: E402

from switchctl.limits import ContinuationParams, continuation_delta, continuation_epsilon  # noqa: E402
from switchctl.npds import SolveParams, solve_npds  # noqa: E402


@pytest.fixture(scope="session")
def d1():
    spec = instances.d1_spec()
    grid = instances.d1_grid(201)
    return spec, grid


@pytest.fixture(scope="session")
def d1_solve(d1):
    """Criterion-2 solve at (eps, delta) = (0.1, 0.1), timed."""
    spec, grid = d1
    params = SolveParams(epsilon=0.1, delta=0.1, tolerance=1e-9)
    t0 = time.perf_counter()
    result = solve_npds(params, spec, grid)
    elapsed = time.perf_counter() - t0
    return params, result, elapsed


@pytest.fixture(scope="session")
def d1_delta_limit(d1):
    """Criterion-4 delta ladder at eps = 0.1, timed."""
    spec, grid = d1
    t0 = time.perf_counter()
    result = continuation_delta(0.1, ContinuationParams(), spec, grid)
    elapsed = time.perf_counter() - t0
    return result, elapsed


@pytest.fixture(scope="session")
def d1_eps_limit(d1):
    """Criterion-4 full double limit, timed."""
    spec, grid = d1
    t0 = time.perf_counter()
    result = continuation_epsilon(ContinuationParams(), spec, grid)
    elapsed = time.perf_counter() - t0
    return result, elapsed


@pytest.fixture(scope="session")
def asym():
    spec = instances.asymmetric_spec()
    grid = instances.d1_grid(201)
    return spec, grid


@pytest.fixture(scope="session")
def asym_delta_limit(asym):
    """Criterion-5 delta ladder on the asymmetric instance, timed."""
    spec, grid = asym
    t0 = time.perf_counter()
    result = continuation_delta(0.1, ContinuationParams(), spec, grid)
    elapsed = time.perf_counter() - t0
    return result, elapsed
