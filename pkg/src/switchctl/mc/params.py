"""Simulation parameters and the Monte Carlo value estimate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import Grid
from ..npds import compute_vtilde
from ..problem import ProblemSpec


@dataclass
class SimParams:
    """Euler-Maruyama settings for one value estimate.

    ``t_max`` may be left None, in which case it is derived from the tail
    bound exp(-c_min T) * sup vtilde < tail_tol, with vtilde the linear
    Dirichlet bound field standing in for the value-scale constant.
    ``zero_diffusion`` freezes the noise term (test escape hatch for
    deterministic path quadrature).
    """

    dt: float
    n_paths: int
    seed: int
    t_max: float | None = None
    tail_tol: float = 1e-6
    zero_diffusion: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        if self.t_max is not None and not np.isfinite(self.t_max):
            raise ValueError("t_max must be finite")

    def resolve_t_max(self, spec: ProblemSpec, grid: Grid) -> float:
        if self.t_max is not None:
            return float(self.t_max)
        return derive_t_max(spec, grid, self.tail_tol)

    def n_steps(self, t_max: float) -> int:
        return max(1, int(np.ceil(t_max / self.dt - 1e-12)))


def derive_t_max(spec: ProblemSpec, grid: Grid, tail_tol: float) -> float:
    """Horizon with certified discounted tail below ``tail_tol``."""
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    vt = compute_vtilde(spec, grid)
    sup_vt = float(np.max(vt.values))
    tab = grid.coeff_tables(spec)
    c_min = float(np.min(tab.c[:, ~grid.exterior]))
    if c_min <= 0:
        raise ValueError("discount must be positive to derive a horizon")
    if sup_vt <= tail_tol:
        return 0.0
    return float(np.log(sup_vt / tail_tol) / c_min)


@dataclass
class PathCostEstimate:
    """Monte Carlo value estimate with sampling error and path accounting."""

    mean: float
    standard_error: float
    ci95: tuple[float, float]
    n_paths: int
    absorbed: int
    truncated: int
    t_max: float
    dt: float
    seed: int
    backend: str

    def __post_init__(self):
        if self.standard_error < 0:
            raise ValueError("standard error cannot be negative")
        if self.absorbed + self.truncated > self.n_paths:
            raise ValueError("absorbed + truncated exceeds path count")

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "standard_error": self.standard_error,
            "ci95": list(self.ci95),
            "n_paths": self.n_paths,
            "absorbed": self.absorbed,
            "truncated": self.truncated,
            "t_max": self.t_max,
            "dt": self.dt,
            "seed": self.seed,
            "backend": self.backend,
        }


def estimate_from_costs(
    costs: np.ndarray,
    absorbed: int,
    truncated: int,
    t_max: float,
    params: SimParams,
    backend: str,
) -> PathCostEstimate:
    n = costs.shape[0]
    mean = float(np.mean(costs))
    se = float(np.std(costs, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    ci = (mean - 1.96 * se, mean + 1.96 * se)
    return PathCostEstimate(
        mean=mean,
        standard_error=se,
        ci95=ci,
        n_paths=n,
        absorbed=absorbed,
        truncated=truncated,
        t_max=t_max,
        dt=params.dt,
        seed=params.seed,
        backend=backend,
    )
