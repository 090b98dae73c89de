"""Cross-cutting record types: pixel geometry, bounding boxes, cohort cases."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import InvalidGeometryError, InvalidParameterError


@dataclass(frozen=True)
class PixelGeometry:
    """In-plane pixel spacing and slice thickness, all in millimetres."""

    spacing_x: float
    spacing_y: float
    slice_thickness: float

    def __post_init__(self):
        for name in ("spacing_x", "spacing_y", "slice_thickness"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidGeometryError(f"{name} must be finite and > 0, got {v!r}")

    def scaled(self, factor_x: float, factor_y: float) -> "PixelGeometry":
        """Spacing after the pixel grid is resampled by the given per-axis factors."""
        return PixelGeometry(self.spacing_x * factor_x, self.spacing_y * factor_y,
                             self.slice_thickness)


#: Unit spacing, used when metrics are reported in pixel units.
UNIT_GEOMETRY = PixelGeometry(1.0, 1.0, 1.0)


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel-index box: x runs over columns, y over rows."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if not (0 <= self.x_min <= self.x_max and 0 <= self.y_min <= self.y_max):
            raise InvalidParameterError(f"invalid bounding box {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    def validate_within(self, img_w: int, img_h: int) -> None:
        if self.x_max >= img_w or self.y_max >= img_h:
            raise InvalidParameterError(
                f"box {self} exceeds image bounds {img_w}x{img_h}")


@dataclass(frozen=True)
class CaseRecord:
    """One slice of one patient: identity, file locations, and geometry."""

    patient_id: str
    cohort_id: str
    slice_index: int
    image_path: Path
    mask_path: Path
    geometry: PixelGeometry
    pred_path: Optional[Path] = None
    scores_path: Optional[Path] = None

    def __post_init__(self):
        if not self.patient_id:
            raise InvalidParameterError("patient_id must be nonempty")
        if self.slice_index < 0:
            raise InvalidParameterError("slice_index must be >= 0")
        if not str(self.image_path) or not str(self.mask_path):
            raise InvalidParameterError("image and mask paths must be nonempty")

    @property
    def key(self) -> tuple:
        return (self.patient_id, self.cohort_id, self.slice_index)
