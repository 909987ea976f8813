"""
Exception and warning types raised by bbm_extremes.
"""


class BBMError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(BBMError, ValueError):
    """An argument lies outside the domain of a formula or sampler."""


class ConfigError(BBMError, ValueError):
    """An experiment configuration failed validation."""


class ResourceCapError(BBMError):
    """A simulation exceeded its configured population cap."""


class ExtinctionError(BBMError):
    """A query was made at a time when no particle is alive."""


class InsufficientConditioningError(BBMError):
    """A conditional Monte Carlo estimate had no accepted samples."""


class StatisticalCheckError(BBMError):
    """One or more oracle checks failed their tolerance gate."""


class SmallTimeWarning(UserWarning):
    """The centering term was evaluated at t <= 1, where log t <= 0."""
