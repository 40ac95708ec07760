"""Exception types shared across the package."""


class TwoScalePopError(Exception):
    """Base class for all package-specific errors."""


class NotStochasticError(TwoScalePopError):
    """A column of the supplied matrix does not sum to 1 within tolerance."""


class ReducibleOrPeriodicError(TwoScalePopError):
    """The matrix is stochastic but not primitive."""


class NonConvergenceError(TwoScalePopError):
    """An iterative solver ran out of iterations.

    The best estimate reached so far is attached when available.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class NonpositiveSurvivalError(TwoScalePopError):
    """A survival rate was <= 0; the k-th root rescaling needs s > 0."""


class DomainExitError(TwoScalePopError):
    """A trajectory left the admissible state set."""

    def __init__(self, message, step=None, state=None):
        super().__init__(message)
        self.step = step
        self.state = state


class InvalidCenterError(TwoScalePopError):
    """The center handed to a ball check is not (nearly) m-periodic."""


class NegativeDensityError(TwoScalePopError):
    """A density-dependence function received a clearly negative density."""


class LeftDomainError(TwoScalePopError):
    """A solver iterate left the admissible domain and damping could not recover."""


class CollapsedToEquilibriumError(TwoScalePopError):
    """A 2-cycle search converged to a fixed point instead.

    Carries the equilibrium report so callers can still use it.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class InhomogeneousParamsError(TwoScalePopError):
    """An operation requiring patch-homogeneous coefficients got unequal ones."""


class ConfigError(TwoScalePopError):
    """A scenario configuration failed validation."""

    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class IOFailureError(TwoScalePopError):
    """Reading a config or writing a result file failed."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)
        self.reason = reason
