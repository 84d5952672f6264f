"""Exception hierarchy.

Two families matter to the CLI: :class:`ValidationError` (bad input or
configuration, exit code 1) and :class:`NumericError` (numerical or
convergence failure, exit code 2).
"""


class HawkesScoreError(Exception):
    """Base class for all library errors."""

    code = "error"


class ValidationError(HawkesScoreError, ValueError):
    code = "validation_error"


class DomainError(ValidationError):
    code = "domain_error"


class ConfigurationError(ValidationError):
    code = "configuration_error"


class StabilityError(ValidationError):
    """Branching ratio times the boost bound is not below one."""

    code = "stability_violation"


class StateError(ValidationError):
    code = "state_error"


class InsufficientDataError(ValidationError):
    code = "insufficient_data"


class NoClosedFormError(ValidationError):
    """No analytic normaliser for the requested (mark model, boost) pair."""

    code = "no_closed_form"


class NumericError(HawkesScoreError, ArithmeticError):
    code = "numeric_error"


class BoostDomainError(NumericError):
    """A linear boost evaluated to a non-positive value."""

    code = "boost_domain_error"


class NormalizationError(NumericError):
    code = "normalization_error"


class ExplosionError(NumericError):
    """Simulated intensity exceeded the configured hard cap."""

    code = "explosion"


class SingularInformationError(NumericError):
    code = "singular_information"


class ConvergenceError(NumericError):
    code = "convergence_failure"
