"""Exception hierarchy shared by all modules."""


class ChainError(Exception):
    """Base class for every error raised by :mod:`monitored_chain`."""


class ConfigError(ChainError, ValueError):
    """Invalid configuration (e.g. ``R`` does not divide ``L``)."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CanonicalFormError(ChainError):
    """No commutation-preserving triangular form could be built."""


class BandSortingError(ChainError):
    """Continuity matching of the complex bands was ambiguous."""


class PoorFitError(ChainError):
    """Small-k polynomial fit residual exceeded its threshold."""


class StepSizeError(ChainError):
    """Integrator time step too large for the requested accuracy."""


class NonPhysicalStateError(ChainError):
    """A covariance violated the uncertainty relation beyond tolerance."""


class SingularMatrixError(ChainError):
    """A matrix that must be inverted was numerically singular."""


class AssemblyError(ChainError):
    """Real-space covariance assembly left a significant imaginary residue."""


class QuadratureError(ChainError):
    """Momentum quadrature did not converge under mesh doubling."""


class ConvergenceError(ChainError):
    """An extrapolation ladder failed to stabilise."""


class FitWindowError(ChainError):
    """Fit window holds too few samples."""


class CutoffLeakError(ChainError):
    """Fock-space truncation leaked too much weight into the top level."""
