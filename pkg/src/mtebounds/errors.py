"""Exception hierarchy shared across the package."""


class BoundsError(Exception):
    """Base class for every error raised by mtebounds."""


class ConstructionError(BoundsError, ValueError):
    """Invalid inputs when building a distribution or function object."""


class DomainError(BoundsError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class IdentificationError(BoundsError):
    """The data do not identify the requested object (missing arm, empty cell)."""


class FirstStageError(IdentificationError):
    """Propensity scores violate p0 < p1."""


class EmptyGroup(IdentificationError):
    """The requested group (always- or never-takers) has probability zero."""


class SupportError(BoundsError):
    """Non-complier support is not contained in the complier support."""


class CounterexampleError(BoundsError, AssertionError):
    """One of the built-in counterexample checks did not behave as expected."""


class ConfigError(BoundsError, ValueError):
    """Malformed analysis configuration."""
