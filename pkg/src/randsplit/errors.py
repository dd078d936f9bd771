"""Exception hierarchy shared across the toolkit."""


class RandSplitError(Exception):
    """Base class for every error raised by randsplit."""


class ConfigurationError(RandSplitError, ValueError):
    """Invalid model, time-law or run parameters."""


class UsageError(RandSplitError, ValueError):
    """An operation was called with inconsistent arguments."""


class DomainError(RandSplitError, ValueError):
    """Argument outside the mathematical domain of a function."""


class NumericalDivergenceError(RandSplitError, FloatingPointError):
    """A chain produced a non-finite coordinate."""

    def __init__(self, cycle, message=None):
        self.cycle = cycle
        super().__init__(message or f"non-finite state encountered at cycle {cycle}")


class IntegrationError(RandSplitError, RuntimeError):
    """An ODE integration failed (step budget exhausted or non-finite state)."""

    def __init__(self, message, context=None):
        self.context = context
        if context is not None:
            message = f"{message} [{context}]"
        super().__init__(message)


class DegenerateOrbitError(RandSplitError, ValueError):
    """A triad orbit passes through a fixed point, so the requested root is unreachable."""


class InsufficientActivityError(RandSplitError, ValueError):
    """Fewer than two designated triad coordinates are nonzero."""


class ZeroRateError(RandSplitError, ValueError):
    """A pair rotation has zero angular velocity."""


class PreconditionError(RandSplitError, ValueError):
    """A diagnostic precondition does not hold (e.g. fixed or degenerate start)."""
