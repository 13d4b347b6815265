"""Exception hierarchy shared by every module."""


class CritballsError(Exception):
    """Base class for all package errors."""


class DomainError(CritballsError, ValueError):
    """An argument lies outside the domain of the operation."""


class IntegrandNaNError(CritballsError, ArithmeticError):
    """The integrand produced NaN at a quadrature node."""

    def __init__(self, node):
        self.node = float(node)
        super().__init__(f"integrand returned NaN at node x={self.node!r}")


class ConvergenceError(CritballsError, ArithmeticError):
    """An iterative numerical routine did not converge."""


class BlowUpError(ConvergenceError):
    """An ODE solution left the admissible range."""

    def __init__(self, s, value):
        self.s = float(s)
        self.value = float(value)
        super().__init__(
            f"solution diverged near s={self.s:.6g} (|q|={abs(self.value):.3g}); "
            "tighten the stepper tolerance"
        )


class MonotonicityError(CritballsError, ArithmeticError):
    """A tabulated distribution function decreased between two nodes."""


class UnsupportedPairError(CritballsError, ValueError):
    """The requested pair of balls cannot be sampled."""
