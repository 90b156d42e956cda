"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """A hypothesis of the inequality being checked does not hold.

    Suites record these as skips rather than failures.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance."""


class QuadratureError(RuntimeError):
    """Quadrature did not converge or produced non-finite samples."""


class FitError(RuntimeError):
    """A model fit to numerical data was ill-posed."""


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated."""
