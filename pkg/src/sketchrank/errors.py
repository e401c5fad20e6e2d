"""Exception hierarchy shared by all modules."""


class SketchRankError(Exception):
    """Base class for errors raised by sketchrank."""


class DimensionError(SketchRankError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ConfigError(SketchRankError, ValueError):
    """A configuration value is out of its admissible range."""


class MatrixFormatError(SketchRankError, ValueError):
    """A matrix file could not be parsed or violates its format."""
