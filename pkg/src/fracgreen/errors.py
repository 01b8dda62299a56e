"""Exception types shared across the package."""


class FracGreenError(Exception):
    """Base class for all package errors."""


class DomainError(FracGreenError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class RangeGuardError(FracGreenError, ValueError):
    """Argument beyond a configured safe-evaluation guard."""


class AccuracyError(FracGreenError):
    """Quadrature or iteration failed to reach the requested tolerance.

    Carries the best available estimate so callers can decide whether to
    proceed with degraded accuracy.
    """

    def __init__(self, message, estimate=None, achieved=None):
        super().__init__(message)
        self.estimate = estimate
        self.achieved = achieved


class CapabilityError(FracGreenError, NotImplementedError):
    """Operation not supported for this kernel family / parameter combination."""


class HorizonError(FracGreenError, ValueError):
    """Time argument beyond the horizon of a local (finite-time) kernel."""


class CoverageError(FracGreenError):
    """Supplied grid does not capture enough kernel mass."""


class CertificateError(FracGreenError):
    """A Levy-kernel sandwich certificate could not be verified."""


class RegimeError(FracGreenError, ValueError):
    """Regime tag inconsistent with the requested envelope case."""


class SpecError(FracGreenError, ValueError):
    """Inconsistent or incomplete specification of a request."""


class FitError(FracGreenError):
    """Constant fitting failed (typically: not enough points in regime)."""
