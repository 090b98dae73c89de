"""Full-width-at-half-maximum scar labeling.

The threshold is a fraction (default one half) of the peak intensity inside
the scar-core ROI, and every myocardial pixel at or above it is labeled scar.
The inclusive comparison guarantees the ROI maximum itself is always labeled.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import EmptyRoiError, InvalidParameterError, RoiOutsideMyocardiumError
from .validation import check_image, check_mask, check_same_shape


def fwhm_segment(image, myocardium, core_roi, threshold_fraction: float = 0.5) -> np.ndarray:
    """Label scar inside the myocardium by core-referenced thresholding.

    threshold = threshold_fraction * max(image over core_roi); output pixel is
    1 iff it lies in the myocardium and its intensity is >= threshold.
    """
    img = check_image(image)
    myo = check_mask(myocardium, "myocardium")
    roi = check_mask(core_roi, "core_roi")
    check_same_shape(img, myo, "image and myocardium")
    check_same_shape(img, roi, "image and core_roi")
    if not (math.isfinite(threshold_fraction) and threshold_fraction > 0):
        raise InvalidParameterError(
            f"threshold_fraction must be finite and > 0, got {threshold_fraction!r}")
    if roi.sum() == 0:
        raise EmptyRoiError("scar-core ROI has no foreground")
    if np.any((roi == 1) & (myo == 0)):
        raise RoiOutsideMyocardiumError("core ROI extends outside the myocardium")
    threshold = threshold_fraction * float(img[roi == 1].max())
    return ((myo == 1) & (img >= threshold)).astype(np.uint8)
