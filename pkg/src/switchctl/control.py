"""Feedback control synthesized from a solved penalized value field.

Within the current regime the singular control pushes along the value
gradient with the explicit absolutely continuous rate

    rate = 2 psi_eps'(|grad u|^2 - g^2) |grad u|,

which is capped by 2 C4 / eps, C4 the largest node gradient norm (the
admissible-rate constant is identified with C4; see README).  Where the
gradient vanishes the direction falls back to a fixed unit vector.  A
switch fires as soon as the interpolated value touches the switching
operator within the switch tolerance, targeting the argmin regime.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomainError, SingleRegimeError
from .grid import Grid, RegimeField, interp_table, node_gradients
from .penalty import Penalty
from .problem import ProblemSpec


@dataclass
class FeedbackPolicy:
    """Precomputed gradient/value tables of u^eps plus the control formulas."""

    u_eps: RegimeField
    epsilon: float
    spec: ProblemSpec
    grid: Grid
    gamma0: np.ndarray
    switch_tol: float
    rate_cap: float
    grad_tables: np.ndarray  # (m, N, d)
    c4: float
    penalty: Penalty = field(init=False)

    def __post_init__(self):
        self.penalty = Penalty(self.epsilon)

    @classmethod
    def build(
        cls,
        u_eps: RegimeField,
        epsilon: float,
        spec: ProblemSpec,
        grid: Grid,
        gamma0=None,
        switch_tol: float = 1e-3,
    ) -> "FeedbackPolicy":
        d = grid.dimension
        if gamma0 is None:
            gamma0 = np.zeros(d)
            gamma0[0] = 1.0  # canonical fixed unit vector
        gamma0 = np.asarray(gamma0, dtype=float)
        if abs(np.linalg.norm(gamma0) - 1.0) > 1e-12:
            raise ValueError("gamma0 must be a unit vector")
        m = u_eps.m
        grads = np.stack(
            [node_gradients(u_eps.values[ell], grid) for ell in range(m)], axis=0
        )
        norms = np.sqrt(np.sum(grads * grads, axis=2))
        c4 = float(norms[:, ~grid.exterior].max()) if np.any(~grid.exterior) else 0.0
        rate_cap = 2.0 * max(c4, 1e-300) / epsilon
        return cls(u_eps, epsilon, spec, grid, gamma0, switch_tol, rate_cap, grads, c4)

    @property
    def m(self) -> int:
        return self.u_eps.m

    def _require_inside(self, x: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if not np.all(self.grid.domain.contains(pts)):
            raise OutOfDomainError("point outside the closed domain")
        return pts

    # vectorized internals used by the simulator -------------------------

    def gradients_at(self, x: np.ndarray, ell: np.ndarray) -> np.ndarray:
        """Interpolated gradient of u^eps_ell at points (n, d), per-path regime."""
        n, d = x.shape
        out = np.empty((n, d))
        for regime in np.unique(ell):
            sel = ell == regime
            for ax in range(d):
                out[sel, ax] = interp_table(self.grad_tables[regime, :, ax], self.grid, x[sel])
        return out

    def values_at(self, x: np.ndarray) -> np.ndarray:
        """Interpolated u^eps for every regime at points (n, d); shape (m, n)."""
        return np.stack(
            [interp_table(self.u_eps.values[r], self.grid, x) for r in range(self.m)]
        )

    def rate_direction(
        self, x: np.ndarray, ell: np.ndarray, g_vals: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Control rate, unit direction and gradient norm along paths."""
        grads = self.gradients_at(x, ell)
        gnorm = np.sqrt(np.sum(grads * grads, axis=1))
        rate = 2.0 * self.penalty.psi_prime(gnorm**2 - g_vals**2) * gnorm
        small = gnorm <= 1e-12
        denom = np.where(small, 1.0, gnorm)
        direction = grads / denom[:, None]
        direction[small] = self.gamma0
        return rate, direction, gnorm

    def switch_decision(
        self, x: np.ndarray, ell: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """(should_switch, argmin target) for paths at points x in regimes ell."""
        n = x.shape[0]
        if self.m == 1:
            return np.zeros(n, dtype=bool), np.zeros(n, dtype=np.int64)
        vals = self.values_at(x)  # (m, n)
        cand = vals.T + self.spec.costs.matrix[ell, :]  # (n, m)
        cand[np.arange(n), ell] = np.inf
        target = np.argmin(cand, axis=1)
        mu = cand[np.arange(n), target]
        own = vals[ell, np.arange(n)]
        return own - mu >= -self.switch_tol, target

    # scalar public surface ----------------------------------------------

    def control_at(self, x, ell: int) -> tuple[np.ndarray, float]:
        """(unit direction, non-negative rate) of the singular control at x."""
        pts = self._require_inside(x)
        g_val = np.asarray(self.spec.coefficients[ell].g(pts), dtype=float)
        rate, direction, _ = self.rate_direction(pts, np.array([ell]), g_val)
        assert rate[0] <= self.rate_cap + 1e-9
        return direction[0], float(rate[0])

    def should_switch(self, x, ell: int) -> bool:
        pts = self._require_inside(x)
        flag, _ = self.switch_decision(pts, np.array([ell]))
        return bool(flag[0])

    def next_regime(self, x, ell: int) -> int:
        if self.m == 1:
            raise SingleRegimeError("next_regime undefined with one regime")
        pts = self._require_inside(x)
        _, target = self.switch_decision(pts, np.array([ell]))
        return int(target[0])


def control_at(policy: FeedbackPolicy, x, ell: int) -> tuple[np.ndarray, float]:
    return policy.control_at(x, ell)


def should_switch(policy: FeedbackPolicy, x, ell: int) -> bool:
    return policy.should_switch(x, ell)


def next_regime(policy: FeedbackPolicy, x, ell: int) -> int:
    return policy.next_regime(x, ell)
