"""Exception hierarchy shared by all modules."""


class ISMCError(Exception):
    """Base class for every error raised by :mod:`ismc`."""


class ConfigurationError(ISMCError, ValueError):
    """Invalid configuration: unknown names, mismatched dimensions, bad schemes."""


class ValidationError(ISMCError, ValueError):
    """A value violates a mathematical precondition (e.g. non-SPD covariance)."""


class NumericalError(ISMCError, ArithmeticError):
    """A density or integrand produced NaN."""


class PropernessError(ISMCError):
    """A weight denominator vanished where the target has mass.

    Attributes
    ----------
    point : ndarray or None
        The offending sample, when known.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point

    def __reduce__(self):
        return (type(self), (str(self), self.point))


class DegenerateBatchError(ISMCError):
    """Every importance weight is zero, so normalized quantities are undefined."""


class UnsupportedError(ISMCError):
    """Operation not available for this input (e.g. no exact sampler, dim > 2)."""
