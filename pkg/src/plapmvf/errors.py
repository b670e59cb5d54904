"""Exception hierarchy.

Errors split into two families so the command line can map them onto exit
codes: ``ValidationError`` for bad input (exit 1) and ``NumericalError`` for
failures of a numerical procedure on valid input (exit 2).
"""


class PlapError(Exception):
    """Base class for all package errors."""


class ValidationError(PlapError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(PlapError, ArithmeticError):
    """A numerical procedure failed on admissible input."""


class SingularGradient(NumericalError):
    """Delta_p is undefined: p < 2 and the gradient vanishes."""


class NonFiniteIntegrand(NumericalError):
    """An integrand returned NaN or inf at a quadrature node."""


class GridTooCoarse(ValidationError):
    """Lattice spacing too large for the horizon radius."""


class EmptyDomain(ValidationError):
    """No lattice node falls inside the domain."""


class InterpolationOutOfHull(NumericalError):
    """A quadrature point needs a lattice value that is not stored."""


class BracketFailure(NumericalError):
    """Root bracket endpoints do not enclose a sign change."""


class NoSignChange(NumericalError):
    """Scalar root search started without a sign change."""


class NewtonDiverged(NumericalError):
    """Damped Newton did not reach the requested residual."""


class MaxIterExceeded(NumericalError):
    """Fixed-point iteration hit its iteration cap.

    The best iterate and the report are attached so callers can still
    inspect them.
    """

    def __init__(self, message, field=None, report=None):
        super().__init__(message)
        self.field = field
        self.report = report
