"""Exception hierarchy shared by the planning modules."""


class PlanningError(Exception):
    """Base class for all errors raised by pathreshape."""


class InputError(PlanningError, ValueError):
    """Malformed input: bad geometry, bad dimensions, bad parameters."""


class NonPositiveResolution(InputError):
    pass


class ObstacleOutsideWorkspace(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class NotPSD(InputError):
    pass


class TooFewWaypoints(InputError):
    pass


class DegenerateStep(InputError):
    """Two consecutive waypoints coincide, so a turning angle is undefined."""


class SegmentTooSmall(PlanningError):
    pass


class NoFreeNode(PlanningError):
    pass


class Unreachable(PlanningError):
    pass


class PlacementFailed(PlanningError):
    pass


class IoError(InputError):
    """A file could not be read or written."""
