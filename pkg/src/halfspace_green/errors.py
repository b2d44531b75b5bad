"""Exception hierarchy shared by every module of the package."""


class HalfspaceError(Exception):
    """Base class for all errors raised by halfspace_green."""


class DimensionMismatch(HalfspaceError, ValueError):
    pass


class UnknownSystem(HalfspaceError, ValueError):
    pass


class NotWeaklyElliptic(HalfspaceError):
    """The characteristic matrix is singular somewhere on the unit sphere."""


class UnsupportedDimension(HalfspaceError):
    pass


class PointAtSingularity(HalfspaceError, ValueError):
    pass


class StepUnderflow(HalfspaceError):
    pass


class CoincidentPoints(HalfspaceError, ValueError):
    pass


class RouteUnavailable(HalfspaceError):
    """The requested half-space construction has no formula for this system."""


class NonpositiveT(HalfspaceError, ValueError):
    pass


class DatumNotIntegrable(HalfspaceError):
    pass


class StepTooLarge(HalfspaceError, ValueError):
    pass


class EmptyCone(HalfspaceError):
    pass


class DivergentNorm(HalfspaceError):
    pass


class SpecError(HalfspaceError, ValueError):
    """Malformed JSON/CSV input; the message carries the offending field."""


class NotInHalfSpace(HalfspaceError, ValueError):
    """A point expected in the open upper half-space has x_n <= 0."""
