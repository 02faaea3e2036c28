"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid model or run parameters (odd horizon, odd T, ...)."""


class DomainError(ValueError):
    """Argument outside the domain of a closed-form expression."""

    def __init__(self, message, boundary=None):
        super().__init__(message)
        self.boundary = boundary


class SolverError(RuntimeError):
    """A root finder failed to bracket or converge."""


class HorizonError(ValueError):
    """Requested accuracy is not reachable within the given horizon."""

    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable


class InfeasibleRunError(RuntimeError):
    """A run exceeds the desk-scale guardrails."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
