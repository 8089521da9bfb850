"""Exception hierarchy shared by all oscar modules."""


class OscarError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class MissingModel(OscarError):
    """A manifest does not provide maps for all three model tags."""

    exit_code = 10


class IdMismatch(OscarError):
    """Per-model image id lists are not identical."""

    exit_code = 11


class ShapeMismatch(OscarError):
    """Arrays that must share a spatial shape do not."""

    exit_code = 12


class DegenerateMap(OscarError):
    """An attribution map has no positive mass after preprocessing."""

    exit_code = 13


class IoError(OscarError):
    """Reading or writing an artifact failed."""

    exit_code = 14


class NotDivisible(OscarError):
    """A grid block size does not divide the image shape."""

    exit_code = 20


class EmptyInput(OscarError):
    """An operation received an empty collection."""

    exit_code = 21


class Not2D(OscarError):
    """A 2D-only operation received a non-2D array."""

    exit_code = 22


class BadK(OscarError):
    """Requested superpixel count is out of range."""

    exit_code = 23


class NoForeground(OscarError):
    """An atlas label map contains only background."""

    exit_code = 24


class LengthMismatch(OscarError):
    """Vectors that must share a length do not."""

    exit_code = 30


class ZeroVariance(OscarError):
    """A correlation input has no variance."""

    exit_code = 31


class DegenerateProfile(OscarError):
    """Residual profiles have zero variance; correlation undefined."""

    exit_code = 32


class AllDegenerate(OscarError):
    """Every bootstrap replicate produced a degenerate statistic."""

    exit_code = 33


class Infeasible(OscarError):
    """No value permutation satisfies the displacement constraint."""

    exit_code = 40


class BadShape(OscarError):
    """An array does not have the shape required by an operation."""

    exit_code = 41


class EmptyGroup(OscarError):
    """One of the four (y, a) groups has no samples."""

    exit_code = 42


class EmptyGrid(OscarError):
    """The (alpha, beta) search grid is empty."""

    exit_code = 43


class BadConfig(OscarError):
    """A configuration object violates its invariants."""

    exit_code = 44
