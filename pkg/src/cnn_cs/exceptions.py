"""Expected exception types."""


class CnnCsError(Exception):
    """Common error for the package."""


class ZeroFilter(CnnCsError):
    """A filter group has zero norm and cannot be normalized."""


class GeometryMismatch(CnnCsError):
    """Filter bank and input geometry are incompatible."""


class DimensionMismatch(CnnCsError):
    """Vector length does not match the operator or pooling geometry."""


class NotNormalized(CnnCsError):
    """Rows of the operator do not have unit norm."""


class SparsityTooLarge(CnnCsError):
    """Requested sparsity exceeds the number of blocks."""


class SwitchOutOfRange(CnnCsError):
    """An upsampling switch points outside its pooling region."""


class NonFiniteObjective(CnnCsError):
    """Solver objective became NaN or infinite."""


class EnumerationTooLarge(CnnCsError):
    """Exact enumeration exceeds the configured cap."""


class DeltaOutOfRange(CnnCsError):
    """Distortion factors are outside 0 <= delta_k <= delta_2k < 1."""


class BadRange(CnnCsError):
    """Histogram bins or range are invalid."""


class DegenerateSample(CnnCsError):
    """Too many all-zero samples were drawn."""


class FilterBankFormatError(CnnCsError):
    """Filter bank file is malformed."""


class ConfigError(CnnCsError):
    """Experiment configuration is invalid."""
