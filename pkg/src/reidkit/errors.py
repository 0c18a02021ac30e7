"""Exception taxonomy shared by every module.

The CLI maps these onto exit codes: insufficient-data conditions exit 4,
data/format problems exit 3, usage errors exit 2.
"""


class ReidkitError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(ReidkitError):
    """Vector or matrix shapes do not line up."""


class DegenerateVectorError(ReidkitError):
    """An operation that needs a nonzero vector received a zero vector."""


class BatchTooSmallError(ReidkitError):
    """A batch operation needs at least two aligned pairs."""


class InvalidSpecError(ReidkitError):
    """A configuration value is out of its documented range."""


class InsufficientDataError(ReidkitError):
    """The data set cannot support the requested operation."""


class MissingEmbeddingError(ReidkitError):
    """An episode references a record absent from the embedding set."""


class FormatError(ReidkitError):
    """A file does not look like the format it claims to be."""


class CorruptFileError(ReidkitError):
    """A file parses as the right format but its body is damaged."""


class DataValidationError(ReidkitError):
    """Record content violates an invariant (NaN values, bad tokens, ...)."""


class CsvShapeError(ReidkitError):
    """A delimited file has a malformed header or a ragged/unparsable row."""


class DuplicateRecordError(ReidkitError):
    """Two records share the same (subject, image) pair."""
