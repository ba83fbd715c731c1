"""Exception hierarchy shared by the solver modules."""


class DykstraError(Exception):
    """Base class for all errors raised by :mod:`dykstra_ff`."""


class DegenerateHalfSpaceError(DykstraError, ValueError):
    """A half-space was requested with a zero (or non-finite) normal."""


class DimensionMismatchError(DykstraError, ValueError):
    pass


class NumericalFailureError(DykstraError, ArithmeticError):
    """An iterate became non-finite (overflow or NaN)."""


class InconsistentStallError(DykstraError):
    """Stall detection fired but no half-space can end the stall.

    Usually means the detector triggered on numerical noise near a fixed
    point; callers fall back to a plain Dykstra step.
    """


class FastForwardConsistencyError(DykstraError):
    """A fast-forward would drive a surviving auxiliary scalar negative."""


class StallCountExceededError(DykstraError):
    pass


class OracleError(DykstraError):
    pass


class EnumerationLimitError(OracleError):
    pass


class InfeasibleProblemError(OracleError):
    pass
