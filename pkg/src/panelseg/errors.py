"""Exception hierarchy.

Errors split into two families: ``InvalidInput`` (bad arguments, specs or
files; CLI exit code 2) and ``EstimatorFailure`` (a well-posed problem the
estimator could not resolve; CLI exit code 3).
"""


class PanelSegError(Exception):
    """Base class for all package errors."""


class InvalidInput(PanelSegError, ValueError):
    pass


class InvalidSpec(InvalidInput):
    pass


class InvalidArgument(InvalidInput):
    pass


class InvalidPanelLength(InvalidInput):
    pass


class InvalidWeights(InvalidInput):
    pass


class NonPositiveVariance(InvalidInput):
    pass


class InsufficientPanels(InvalidInput):
    pass


class InvalidTrainingWindow(InvalidInput):
    pass


class UnsupportedGamma(InvalidInput):
    pass


class OutsideValidity(InvalidInput):
    pass


class VanishingChange(InvalidInput):
    pass


class InvalidConfig(InvalidInput):
    pass


class EstimatorFailure(PanelSegError, RuntimeError):
    pass


class SolverFailure(EstimatorFailure):
    """Raised when the solver hits its iteration cap.

    The last KKT residual is kept on ``kkt_residual``.
    """

    def __init__(self, message, kkt_residual=float("nan")):
        super().__init__(message)
        self.kkt_residual = kkt_residual


class AmbiguousMaximum(EstimatorFailure):
    pass


class TargetCountUnreachable(EstimatorFailure):
    def __init__(self, message, path=()):
        super().__init__(message)
        # (lambda, |E(lambda)|) pairs visited by the search
        self.path = list(path)


class ReportIOError(PanelSegError, OSError):
    pass
