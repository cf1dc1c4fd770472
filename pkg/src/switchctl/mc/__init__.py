"""Monte Carlo engine: parameters, strategies, and the path simulator."""

from .backend import backend_name, kernel_enabled, worker_threads
from .engine import simulate_admissible, simulate_policy
from .params import PathCostEstimate, SimParams, derive_t_max
from .strategies import AdmissibleStrategy, do_nothing, random_strategies, single_jump

__all__ = [
    "AdmissibleStrategy",
    "PathCostEstimate",
    "SimParams",
    "backend_name",
    "derive_t_max",
    "do_nothing",
    "kernel_enabled",
    "random_strategies",
    "simulate_admissible",
    "simulate_policy",
    "single_jump",
    "worker_threads",
]
