"""Exception hierarchy shared by the numerical modules and the CLI."""


class HcmaError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(HcmaError, ValueError):
    pass


class NotHermitian(HcmaError, ValueError):
    pass


class NotSymmetric(HcmaError, ValueError):
    pass


class EllipticityLost(HcmaError):
    """The metric ``b + i ddbar phi`` stopped being positive definite."""

    def __init__(self, min_eig, guard):
        super().__init__(f"min eigenvalue of A is {min_eig:.3e} <= guard {guard:.1e}")
        self.min_eig = min_eig
        self.guard = guard


class NewtonDiverged(HcmaError):
    pass


class ContinuityStalled(HcmaError):
    pass


class BoundaryNotConvex(HcmaError, ValueError):
    """Boundary data fails the strict (S, omega_0)-convexity precondition."""


class ConfigError(HcmaError, ValueError):
    pass
