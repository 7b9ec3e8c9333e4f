"""Exception hierarchy shared across the package."""


class ReviewFuseError(Exception):
    """Base class for all package errors."""


class DimensionError(ReviewFuseError, ValueError):
    """Tensor/image shapes incompatible with the requested operation."""


class ParameterError(ReviewFuseError, ValueError):
    """A hyperparameter or argument outside its valid range."""


class ContractError(ReviewFuseError, ValueError):
    """A call violated an API contract (non-scalar backward root, mismatched lengths, ...)."""


class TokenIndexError(ReviewFuseError, IndexError):
    """Token id outside the vocabulary/table range."""


class LabelError(ReviewFuseError, ValueError):
    """Class label outside {0, 1}."""


class FormatError(ReviewFuseError, ValueError):
    """Malformed binary file (PPM image, model bundle)."""


class ManifestError(ReviewFuseError, ValueError):
    """Malformed dataset CSV manifest."""


class AlignmentError(ReviewFuseError, ValueError):
    """Samples reference image files that do not exist."""


class SplitError(ReviewFuseError, ValueError):
    """Dataset cannot be split as requested."""


class TrainingDivergenceError(ReviewFuseError, RuntimeError):
    """Loss became NaN/Inf during training."""
