"""Exception hierarchy shared by all semcodec modules.

Every contract violation raises a named exception so callers (and the CLI)
can map failures to stable exit codes: data/format problems derive from
:class:`DataError`, hash/integrity problems from :class:`IntegrityError`.
"""


class SemcodecError(Exception):
    """Base class for all semcodec errors."""


class DataError(SemcodecError):
    """Malformed or inconsistent input data."""


class IntegrityError(SemcodecError):
    """A content hash did not match its payload."""


# taxonomy

class CycleDetected(DataError):
    pass


class MultipleRoots(DataError):
    pass


class OrphanNode(DataError):
    pass


class DuplicateChild(DataError):
    pass


class UnknownClass(DataError):
    pass


class EmptyTaxonomy(DataError):
    pass


class NoIntraPairs(DataError):
    pass


class SingleCluster(DataError):
    pass


class TaxonomyFormatError(DataError):
    pass


# clustering

class ZeroVector(DataError):
    pass


class KExceedsN(DataError):
    pass


# entropy coder

class SymbolOutOfSupport(DataError):
    pass


# model bundles and codec

class ShapeMismatch(DataError):
    pass


class InvalidBlock(DataError):
    pass


class CorruptHeader(DataError):
    pass


class HeaderIncomplete(DataError):
    pass


class WeightsHashMismatch(IntegrityError):
    pass


class ContainerHashMismatch(IntegrityError):
    pass


# evaluation

class NegativeRate(DataError):
    pass


class UnmappedClass(DataError):
    pass


class InsufficientPoints(DataError):
    pass


class NoOverlap(DataError):
    pass
