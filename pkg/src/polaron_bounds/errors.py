"""Exception hierarchy. Numerical failures carry whatever partial data exists."""


class PolaronError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str = "", **detail):
        super().__init__(message)
        self.detail = detail


class ValidationError(PolaronError):
    """Model or input rejected before any numerics ran."""


class NumericalError(PolaronError):
    """A computation ran but could not deliver a trustworthy number."""


class NonConvergent(NumericalError):
    pass


class DivergentIntegrand(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class EnergyIncrease(NumericalError):
    pass


class NoRoot(NumericalError):
    pass


class VelocityTooLarge(NumericalError):
    pass


class WindowViolation(NumericalError):
    pass


class TooFewSamples(NumericalError):
    pass


class QuadratureBudgetExceeded(NumericalError):
    pass


class OscillatoryFailure(NumericalError):
    pass


class XiNotResolved(NumericalError):
    pass


class BasisOverflow(NumericalError):
    pass
