"""Solver and simulator for mixed singular/switching stochastic control.

Computes the value field of a regime-switching diffusion under singular
and switching controls on a bounded domain by a double penalization limit,
synthesizes the penalized feedback control, and cross-validates values by
Monte Carlo simulation of the controlled diffusion.
"""

from . import artifacts, catalog, cli, control, grid, limits, mc, npds, penalty, problem
from .catalog import CatalogFn, affine, constant, cosine_bump, quadratic
from .control import FeedbackPolicy
from .errors import (
    ChatterGuardError,
    ConfigError,
    InadmissibleJumpError,
    LinearSolveFailure,
    NoConvergence,
    NotValidatedError,
    OutOfDomainError,
    SingleRegimeError,
    SwitchctlError,
)
from .grid import Grid, RegimeField
from .limits import ContinuationParams, RegionMap
from .npds import SolveParams, SolveResult
from .penalty import Penalty
from .problem import Domain, ProblemSpec, RegimeCoefficients, SwitchingCosts

__version__ = "0.1.0"
