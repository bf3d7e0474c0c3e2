"""Exception hierarchy shared by all mpcorr modules."""


class MpCorrError(Exception):
    """Base class for every error raised by the package."""


class InputDomainError(MpCorrError, ValueError):
    """An argument is outside the domain an operation accepts."""


class ConvergenceError(MpCorrError, RuntimeError):
    """An iterative solver failed to converge.

    Attributes
    ----------
    bracket : tuple of float or None
        Last bracket held by the solver, when one exists.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DegenerateGradientError(MpCorrError, ArithmeticError):
    """All nonlinearity derivatives vanish at the solution."""


class InfeasibleError(MpCorrError, ValueError):
    """A constraint target cannot be met by any distribution."""


class UnsupportedIndexError(MpCorrError, ValueError):
    """Entropy index outside the supported range."""


class StabilityError(MpCorrError, ValueError):
    """Time step too large for the explicit integrator."""


class NormalizationError(MpCorrError, ValueError):
    """Input cannot be standardized (zero variance)."""


class FitError(MpCorrError, ValueError):
    """Regression design matrix is rank deficient."""


class ConfigError(MpCorrError, ValueError):
    """Experiment configuration failed schema validation."""
