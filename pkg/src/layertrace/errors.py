"""Exception hierarchy.

Every error raised on purpose by the library derives from ``LayertraceError``
and carries a category (``input``, ``io`` or ``inference``) that the CLI maps
onto exit codes.
"""


class LayertraceError(Exception):
    category = "input"


class MalformedXml(LayertraceError):
    pass


class MissingViewport(LayertraceError):
    pass


class SingularTransform(LayertraceError):
    pass


class EmptyDocument(LayertraceError):
    pass


class ZeroDimension(LayertraceError):
    pass


class KOutOfRange(LayertraceError):
    pass


class ZeroLayers(LayertraceError):
    pass


class IndexOutOfRange(LayertraceError):
    pass


class WrongFrameCount(LayertraceError):
    pass


class WrongCellSize(LayertraceError):
    pass


class DimensionMismatch(LayertraceError):
    pass


class UnknownResolution(LayertraceError):
    pass


class NonPositiveSigma(LayertraceError):
    pass


class DegeneratePolygon(LayertraceError):
    pass


class TooFewPoints(LayertraceError):
    pass


class TooSmall(LayertraceError):
    pass


class EmptyInput(LayertraceError):
    pass


class EmptyGrid(LayertraceError):
    pass


class InferenceError(LayertraceError):
    """Raised when the generation endpoint cannot produce a grid."""

    category = "inference"


class StorageError(LayertraceError):
    """A file could not be read or written."""

    category = "io"


class ManifestError(LayertraceError):
    pass


class ConfigError(LayertraceError):
    pass
