"""Exception hierarchy shared by all modules."""


class MuskatError(Exception):
    """Base class for every error raised by the package."""


class GridError(MuskatError):
    """Invalid grid, or an operation unsupported on this kind of grid."""


class GridTooCoarseError(GridError):
    pass


class UnsupportedGridError(GridError):
    pass


class InsufficientResolutionError(GridError):
    """Too few resolved Fourier modes for a spectral estimate."""


class AliasingError(GridError):
    """Field content too close to the Nyquist limit for a nonlinear product."""


class ArcChordViolation(MuskatError):
    """The chord between two distinct parameter values (nearly) vanished.

    ``alpha`` and ``beta`` locate the offending pair when known.
    """

    def __init__(self, message, alpha=None, beta=None):
        super().__init__(message)
        self.alpha = alpha
        self.beta = beta


class NearTouchingError(ArcChordViolation):
    """Two interfaces came close enough that the interaction kernel degenerates."""

    def __init__(self, message, min_separation):
        super().__init__(message)
        self.min_separation = min_separation


class NearTouchingWarning(UserWarning):
    pass


class TruncationWarning(UserWarning):
    """Real-line data does not decay inside the truncated domain."""


class QuadratureNonconvergence(MuskatError):
    def __init__(self, message, interval=None, error=None):
        super().__init__(message)
        self.interval = interval
        self.error = error


class UseReducidaError(MuskatError):
    """The general slope-of-velocity path hit a degenerate tangent.

    Evaluate through :func:`muskat.turnover.reducida_integral` instead.
    """


class ConstructionError(MuskatError):
    """A turning-datum construction step failed a structural check."""


class FamilyInvalidError(ConstructionError):
    pass


class SearchFailureError(ConstructionError):
    pass


class IncreaseModesError(ConstructionError):
    pass


class StepCollapse(MuskatError):
    pass


class ConfigError(MuskatError):
    """Bad run configuration; ``where`` names the offending line or field."""

    def __init__(self, message, where=None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
