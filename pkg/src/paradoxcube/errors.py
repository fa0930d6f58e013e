"""Exception hierarchy.

Every error raised by the library derives from ``ParadoxCubeError`` so the CLI
can map families of failures onto exit codes.
"""


class ParadoxCubeError(Exception):
    """Base class for all library errors."""


class DataError(ParadoxCubeError):
    """Input data is malformed or inconsistent with the request."""


class MissingColumn(DataError):
    pass


class NonBinaryLabel(DataError):
    pass


class EmptyTable(DataError):
    pass


class RaggedRow(DataError):
    pass


class IndexOutOfRange(ParadoxCubeError, IndexError):
    pass


class InvalidValue(ParadoxCubeError, ValueError):
    pass


class LengthMismatch(ParadoxCubeError, ValueError):
    pass


class NotComparable(ParadoxCubeError, ValueError):
    pass


class EmptyPopulation(DataError):
    pass


class TooManyAttributes(ParadoxCubeError):
    pass


class ThetaOutOfRange(ParadoxCubeError, ValueError):
    pass


class InvalidConfiguration(ParadoxCubeError, ValueError):
    """The association configuration is structurally invalid."""


class SeparatorEqualsDifferential(InvalidConfiguration):
    pass


class GroupNotFound(ParadoxCubeError, KeyError):
    pass


class SignatureMismatch(ParadoxCubeError, ValueError):
    pass


class HashCollision(ParadoxCubeError):
    """Two distinct record sets produced the same 64-bit coverage hash."""


class Infeasible(ParadoxCubeError):
    """Generation could not satisfy its constraints."""


class DomainTooSmall(Infeasible):
    pass


class BadPattern(Infeasible):
    pass


class SpecInfeasible(Infeasible):
    pass


class AttributeCollision(Infeasible):
    pass


class DomainSizeMismatch(Infeasible):
    pass


class LabelIndexInvalid(ParadoxCubeError, ValueError):
    pass


class GroupHasNoSiblingPair(ParadoxCubeError):
    pass


class GroupHasSingleSeparator(ParadoxCubeError):
    pass
