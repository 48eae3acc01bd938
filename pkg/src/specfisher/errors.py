"""Exception types shared across the package.

Domain errors on user input (non-positive parameters, malformed files,
bad bands) raise plain ``ValueError``; the classes below cover failures
of the numerics themselves and of statistical validity checks.
"""


class SpecfisherError(RuntimeError):
    """Base class for numeric and statistical failures."""


class NumericError(SpecfisherError):
    """Quadrature non-convergence, singular matrix inversion, and similar."""


class CalibrationError(SpecfisherError):
    """Amplitude-calibration bisection failed to bracket or converge."""
