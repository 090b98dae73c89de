"""Exception taxonomy shared across the package."""


class ScarbenchError(Exception):
    """Base class for all scarbench errors."""


class FileMissingError(ScarbenchError, FileNotFoundError):
    """Input file does not exist."""


class MalformedHeaderError(ScarbenchError, ValueError):
    """File header or payload is inconsistent with the declared format."""


class UnsupportedDepthError(ScarbenchError, ValueError):
    """Pixel data is not 8-bit grayscale."""


class ParseError(ScarbenchError, ValueError):
    """Manifest JSON is not parseable or violates the schema."""


class InvalidGeometryError(ScarbenchError, ValueError):
    """Pixel spacing or slice thickness is non-positive or non-finite."""


class DuplicateCaseError(ScarbenchError, ValueError):
    """Two manifest entries share (patient_id, cohort_id, slice_index)."""


class InvalidTargetError(ScarbenchError, ValueError):
    """Resampling target has a zero dimension."""


class DimensionMismatchError(ScarbenchError, ValueError):
    """Two grids that must share dimensions do not."""


class EmptyMaskError(ScarbenchError, ValueError):
    """Operation is undefined on an all-background mask."""


class EmptyTargetError(ScarbenchError, ValueError):
    """Soft-label target mask has no foreground."""


class EmptyRoiError(ScarbenchError, ValueError):
    """Scar-core ROI has no foreground."""


class RoiOutsideMyocardiumError(ScarbenchError, ValueError):
    """Scar-core ROI is not contained in the myocardium mask."""


class InvalidParameterError(ScarbenchError, ValueError):
    """Parameter is outside its documented range."""


class InvalidRatiosError(ScarbenchError, ValueError):
    """Split ratios are not positive or do not sum to 1."""


class EmptyCohortError(ScarbenchError, ValueError):
    """Split requested for a cohort with no patients."""


class EmptySampleError(ScarbenchError, ValueError):
    """Statistical test received an empty sample."""


class EmptyInputError(ScarbenchError, ValueError):
    """Aggregation received no reports."""
