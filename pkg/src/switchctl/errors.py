"""Exception types shared across the package."""


class SwitchctlError(Exception):
    """Base class for all package-specific errors."""


class SingleRegimeError(SwitchctlError):
    """Switching operator or next_regime requested with a single regime."""


class NotValidatedError(SwitchctlError):
    """A solver entry point received a ProblemSpec that was never validated."""


class OutOfDomainError(SwitchctlError):
    """A point lies outside the closed domain."""


class LinearSolveFailure(SwitchctlError):
    """The inner linear Dirichlet solve stalled or produced non-finite values."""


class NoConvergence(SwitchctlError):
    """Fixed-point iteration hit the iteration cap before meeting tolerance."""

    def __init__(self, message: str, iterations: int, last_update: float):
        super().__init__(message)
        self.iterations = iterations
        self.last_update = last_update


class ChatterGuardError(SwitchctlError):
    """A feedback policy requested two switches at the same time point."""


class InadmissibleJumpError(SwitchctlError):
    """A singular-control jump would leave the closed domain."""


class ConfigError(SwitchctlError):
    """Experiment config file is malformed (bad key, type, or value)."""
