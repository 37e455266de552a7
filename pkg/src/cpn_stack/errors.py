"""Exception types shared across the package."""


class CpnStackError(Exception):
    """Base class for all package-specific errors."""


class DegeneratePoint(CpnStackError):
    """A normalizer (f^dag f or a raising trace) fell below the degeneracy threshold.

    ``level`` identifies the tower level at which the guard tripped, when known.
    """

    def __init__(self, message, level=None, point=None):
        super().__init__(message)
        self.level = level
        self.point = point


class InsufficientOrder(CpnStackError):
    """A derivative slot beyond the jet's valid bidegree was requested."""


class NoConvergence(CpnStackError):
    """An adaptive quadrature exhausted its refinement budget before reaching tol."""

    def __init__(self, message, last_value=None, est_error=None):
        super().__init__(message)
        self.last_value = last_value
        self.est_error = est_error


class NotInAlgebra(CpnStackError):
    """Matrix handed to the su(N) coordinate map is not anti-Hermitian traceless."""


class InvalidSeed(CpnStackError, ValueError):
    """Seed polynomials failed validation (empty, all-zero, malformed file ...)."""
