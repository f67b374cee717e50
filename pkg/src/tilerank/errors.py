"""Exception taxonomy shared by all tilerank modules."""


class TileRankError(Exception):
    """Base class for all engine errors."""


class ZeroNormRow(TileRankError):
    """A token row (or merged centroid) has zero L2 norm."""

    def __init__(self, index: int, context: str = "token matrix"):
        self.index = index
        super().__init__(f"zero-norm row at index {index} in {context}")


class NonFiniteEntry(TileRankError):
    """A token row contains NaN or Inf."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"non-finite entry in row {index}")


class DimMismatch(TileRankError):
    """Embedding dimensions of two operands disagree."""


class GridTooFine(TileRankError):
    """A partition grid would produce an empty region."""


class LevelOutOfRange(TileRankError):
    """Granularity level index outside 1..L."""


class IndexOutOfRange(TileRankError):
    """Token index outside the representation."""


class EmptyDocument(TileRankError):
    """MaxSim against a document with zero tokens."""


class EmptyCorpus(TileRankError):
    """Search over a corpus with zero pages."""


class LevelCountMismatch(TileRankError):
    """Number of ingested files differs from the granularity level count."""


class FormatError(TileRankError):
    """A serialized artifact (MVTX file, manifest, run, table) is malformed."""


class ChecksumMismatch(FormatError):
    """MVTX payload CRC does not match the stored checksum."""


class InconsistentDim(TileRankError):
    """Stored dimension disagrees with the manifest or with sibling files."""


class MalformedRun(TileRankError):
    """Retrieval run violates the rank contract (contiguous ranks from 1)."""


class MissingCell(TileRankError):
    """Oracle table is not rectangular (a query/system cell is absent)."""
