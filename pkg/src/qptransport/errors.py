"""Exception hierarchy shared by the solver, oracle, analysis and sweep layers."""


class QPTransportError(Exception):
    """Base class for all errors raised by :mod:`qptransport`."""


class SingularSystem(QPTransportError):
    """The steady-state equation has no unique solution."""


class ResidualTooLarge(QPTransportError):
    """A solve finished but its residual or current-homogeneity check failed."""


class NumericalBreakdown(QPTransportError):
    """An eigendecomposition or factorization could not be carried out reliably."""


class SizeTooLarge(QPTransportError):
    """Requested dense superoperator exceeds the memory guardrail."""


class NonUniqueSteadyState(QPTransportError):
    """The generator has a numerically degenerate null space."""


class InsufficientPoints(QPTransportError):
    """A fit window selected fewer than three points."""


class NonPositiveCurrent(QPTransportError):
    """Log-scale fits require strictly positive currents."""


class ZeroBias(QPTransportError):
    """Conductivity is undefined for a vanishing bias."""


class EmptyRange(QPTransportError):
    """No Fibonacci number falls inside the requested interval."""
