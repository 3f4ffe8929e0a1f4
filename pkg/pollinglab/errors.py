"""Exception types shared across the laboratory."""

from __future__ import annotations


class PollingLabError(Exception):
    """Base class for errors raised by pollinglab."""


class ConfigError(PollingLabError, ValueError):
    """An experiment file or flag combination is invalid."""


class StabilityError(PollingLabError, ValueError):
    """The system parameters do not admit a steady state."""


class NotBranchingError(PollingLabError, ValueError):
    """A branching-type analysis was requested for a non-branching discipline."""


class InsufficientSamplesError(PollingLabError, ValueError):
    """A statistic was requested from too few samples or replications."""


class TransformDomainError(PollingLabError, ValueError):
    """A transform was evaluated outside the closed unit (bi)disk."""


class NumericalError(PollingLabError, ArithmeticError):
    """An iteration failed to converge or a limit degenerated."""
