"""Exception types raised by pentamaser."""


class PentamaserError(Exception):
    """Base class for all package errors."""


class ValidationError(PentamaserError, ValueError):
    """Invalid configuration or argument values."""


class NonHermitianInput(ValidationError):
    pass


class InconsistentDirectionCosines(ValidationError):
    pass


class NumericalError(PentamaserError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class StepSizeUnderflow(NumericalError):
    pass


class AtOrAboveOscillation(NumericalError):
    """Closed-form amplifier formula evaluated outside the amplifier regime."""


class InfiniteTemperature(NumericalError):
    pass


class DegenerateFit(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class InsufficientData(NumericalError):
    pass


class NoBreakpoint(NumericalError):
    pass


class RatioAboveUnity(UserWarning):
    """Linewidth ratio exceeds one; the spin-count calibration is meaningless."""
