"""Admissible control strategies for the simulator.

A strategy is a deterministic rule (time, position, regime) -> control.
``controls`` returns the singular-control direction, absolutely continuous
rate and an optional jump size per path; ``switches`` returns a target
regime per path (-1 for none).  Everything is vectorized over paths.

``random_strategies`` builds a seeded family of parametric rules used by
the verification-inequality tests: constant-direction push rules with
position-dependent rates, occasional threshold switches, and optionally a
single early jump toward an interior anchor (jumps keep the state inside
the closed convex domain by construction).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..problem import ProblemSpec


@dataclass
class AdmissibleStrategy:
    """Deterministic admissible control rule, vectorized over paths."""

    controls: Callable[[float, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]
    switches: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    rate_cap: float = np.inf
    name: str = "strategy"
    has_jumps: bool = False


def do_nothing(spec: ProblemSpec) -> AdmissibleStrategy:
    d = spec.dimension

    def controls(t, x, ell):
        n = x.shape[0]
        dirs = np.zeros((n, d))
        dirs[:, 0] = 1.0
        return dirs, np.zeros(n), np.zeros(n)

    def switches(t, x, ell):
        return np.full(x.shape[0], -1, dtype=np.int64)

    return AdmissibleStrategy(controls, switches, rate_cap=0.0, name="do_nothing")


def single_jump(
    spec: ProblemSpec,
    jump_time: float,
    size: float,
    direction: np.ndarray,
    name: str = "single_jump",
) -> AdmissibleStrategy:
    """Jump once at the first step with t >= jump_time; nothing else."""
    d = spec.dimension
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    fired = {"t": None}

    def controls(t, x, ell):
        n = x.shape[0]
        dirs = np.tile(direction, (n, 1))
        jumps = np.zeros(n)
        if t >= jump_time and (fired["t"] is None or fired["t"] == t):
            fired["t"] = t
            jumps[:] = size
        return dirs, np.zeros(n), jumps

    def switches(t, x, ell):
        return np.full(x.shape[0], -1, dtype=np.int64)

    return AdmissibleStrategy(controls, switches, rate_cap=0.0, name=name, has_jumps=True)


def random_strategies(
    spec: ProblemSpec,
    count: int,
    seed: int,
    rate_cap: float,
    include_jump: bool = False,
) -> list[AdmissibleStrategy]:
    """Seeded family of admissible rules; the last one jumps if requested."""
    rng = np.random.default_rng(seed)
    d = spec.dimension
    lo = np.asarray(spec.domain.lower)
    hi = np.asarray(spec.domain.upper)
    centre = 0.5 * (lo + hi)
    out: list[AdmissibleStrategy] = []
    n_continuous = count - 1 if include_jump else count
    for k in range(n_continuous):
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        anchor = lo + rng.uniform(0.25, 0.75, size=d) * (hi - lo)
        base = rng.uniform(0.0, 0.5) * rate_cap
        slope = rng.uniform(0.0, 2.0) * rate_cap
        m = spec.regimes
        switch_target = int(rng.integers(0, m)) if m > 1 else -1
        switch_period = float(rng.uniform(0.05, 0.4))
        switch_frac = float(rng.uniform(0.0, 0.3))

        def controls(t, x, ell, _dir=direction, _anchor=anchor, _base=base, _slope=slope):
            n = x.shape[0]
            dist = np.sqrt(np.sum((x - _anchor) ** 2, axis=1))
            rates = np.clip(_base + _slope * dist, 0.0, rate_cap)
            dirs = np.tile(_dir, (n, 1))
            return dirs, rates, np.zeros(n)

        def switches(t, x, ell, _target=switch_target, _period=switch_period, _frac=switch_frac):
            n = x.shape[0]
            if _target < 0:
                return np.full(n, -1, dtype=np.int64)
            phase = (t / _period) % 1.0
            fire = phase < _frac * 0.02  # a thin firing window per period
            targ = np.where(fire & (ell != _target), _target, -1)
            return targ.astype(np.int64)

        out.append(
            AdmissibleStrategy(controls, switches, rate_cap=rate_cap, name=f"random_{k}")
        )
    if include_jump:
        jump_dir = np.zeros(d)
        jump_dir[0] = 1.0
        size = 0.2 * float(np.min(hi - lo))

        def controls(t, x, ell, _size=size):
            n = x.shape[0]
            # push toward the domain centre so jumps stay inside (convexity)
            delta = x - centre
            norms = np.sqrt(np.sum(delta**2, axis=1))
            small = norms <= 1e-12
            dirs = np.where(small[:, None], jump_dir, delta / np.where(small, 1.0, norms)[:, None])
            jumps = np.zeros(n)
            if t == 0.0:
                jumps = np.minimum(_size, 0.5 * norms)
            return dirs, np.zeros(n), jumps

        def switches(t, x, ell):
            return np.full(x.shape[0], -1, dtype=np.int64)

        out.append(
            AdmissibleStrategy(controls, switches, rate_cap=0.0, name="random_jump", has_jumps=True)
        )
    return out
