"""Exception types shared across the package."""


class GravmatchError(Exception):
    """Base class for all errors raised by this package."""


class OutOfBoundsError(GravmatchError):
    """A queried position lies outside the map's padded bounding box."""


class WindowClippedError(GravmatchError):
    """A search window would extend past the map edge."""


class MalformedFileError(GravmatchError):
    """A map file failed magic, structure, or finiteness checks."""


class DegenerateSigmaError(GravmatchError):
    """A likelihood was requested with a non-positive standard deviation."""


class EmptyCandidatesError(GravmatchError):
    """A candidate set required by the matcher is empty."""


class TooLargeError(GravmatchError):
    """An exhaustive enumeration would exceed the configured guard."""


class LengthMismatchError(GravmatchError):
    """Sequence lengths disagree with what the operation requires."""


class NoContourError(GravmatchError):
    """A measured field value crosses no iso-line inside its window."""


class DegenerateGeometryError(GravmatchError):
    """A rigid fit was requested on degenerate (coincident) points."""
