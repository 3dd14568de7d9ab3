"""Exception types shared across the package."""


class CGCVError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CGCVError, ValueError):
    pass


class ConfigError(CGCVError, ValueError):
    pass


class ConvergenceError(CGCVError, RuntimeError):
    """Coordinate descent hit ``max_iter``; ``iterate`` holds the last coefficients."""

    def __init__(self, message, iterate=None, component=None):
        super().__init__(message)
        self.iterate = iterate
        self.component = component


class NonGenericPointError(CGCVError, RuntimeError):
    """The active set changed under a finite-difference perturbation."""


class DegenerateDenominatorError(CGCVError, ArithmeticError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class EmptyOverlapError(CGCVError, ArithmeticError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class RegimeError(CGCVError, ArithmeticError):
    """Deterministic equivalents are undefined at these (lambda, phi, psi)."""


class NumericalError(CGCVError, RuntimeError):
    pass
