"""Exception types raised by the library."""


class CSpaceError(Exception):
    """Base class for all library errors."""


class EmptyCore(CSpaceError):
    """The eps-core of the object has no balls left."""


class EpsilonExceedsObject(CSpaceError):
    """The chosen eps would leave no usable core (or is not positive)."""


class DegenerateGrid(CSpaceError):
    """Two distinct samples of an orientation grid describe the same rotation."""


class ParseError(CSpaceError, ValueError):
    """A grid, scene or query string could not be parsed."""


class TargetUnreachable(CSpaceError):
    """Grid generation exhausted its sample budget before meeting the target."""


class BoundsTooSmall(CSpaceError):
    """A collision ball reaches outside the query domain."""


class OutOfBounds(CSpaceError):
    """A query position lies outside the query domain."""


class BuildError(CSpaceError):
    """A worker failed while building the connectivity graph."""
