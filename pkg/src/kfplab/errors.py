"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: anything derived from ``ValidationError``
exits with 2, ``NumericalError`` with 3.
"""


class KFPError(Exception):
    """Base class for all library errors."""


class ValidationError(KFPError, ValueError):
    """A precondition on user-supplied input was violated."""


class InputError(ValidationError):
    pass


class DomainError(ValidationError):
    """A ball, cylinder or support leaves the region where data is defined."""


class GeometryError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class UnsupportedConfigError(ConfigError):
    pass


class InvariantError(ValidationError):
    """Coefficients violate the ellipticity/size hypotheses."""


class ThresholdError(ValidationError):
    """An integrability exponent is below the admissible threshold."""


class ResolutionError(ValidationError):
    """A measurement region contains too few grid cells."""


class NumericalError(KFPError, ArithmeticError):
    """Non-finite values appeared during a computation."""
