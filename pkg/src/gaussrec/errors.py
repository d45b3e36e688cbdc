"""Exception types raised across the package."""


class GaussrecError(Exception):
    """Base class for all package-specific errors."""


class EmptyBatchError(GaussrecError, ValueError):
    """Requested a sample batch of size zero."""


class InvalidInputError(GaussrecError, ValueError):
    """An argument is outside the operation's domain (NaN, wrong length, ...)."""


class InfiniteInformationError(GaussrecError, ValueError):
    """A noiseless channel makes the requested information quantity infinite."""


class DegenerateIntervalError(GaussrecError, ValueError):
    """A quantizer interval carries zero probability mass."""


class DegenerateClassError(GaussrecError, ValueError):
    """Both label classes have zero mass after prior conditioning."""


class IndeterminateError(GaussrecError, ValueError):
    """An arithmetic combination of infinities has no defined value."""


class ConvergenceError(GaussrecError, RuntimeError):
    """An iterative optimizer failed to converge.

    Carries the best iterate found so far in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConstructionError(GaussrecError, RuntimeError):
    """A randomized code construction exhausted its retry budget."""


class NumericError(GaussrecError, RuntimeError):
    """A quadrature or numerical routine failed to reach its tolerance."""


class ConfigError(GaussrecError, ValueError):
    """An experiment configuration is malformed or incomplete."""


class PrecisionWarning(UserWarning):
    """A Monte-Carlo estimate did not reach the requested precision."""
