"""Exception types shared across the package."""


class GrangerError(Exception):
    """Base class for all errors raised by granger_horizons."""


class DimensionError(GrangerError, ValueError):
    """Inconsistent array shapes or index sets."""


class StabilityError(GrangerError, ValueError):
    """The VAR model is not stable (companion spectral radius >= 1)."""


class CovarianceError(GrangerError, ValueError):
    """A covariance matrix is not symmetric positive-definite."""


class NumericalError(GrangerError, ArithmeticError):
    """A computation produced numerically inconsistent results."""


class SingularityError(NumericalError):
    """A regression design or residual covariance is singular."""


class ConditioningError(NumericalError):
    """A Yule-Walker system is too ill-conditioned to solve."""
