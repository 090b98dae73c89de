"""Segmentation agreement metrics on binary masks.

Alongside overlap (Dice) and boundary distance (Hausdorff), two size-based
scores are provided: area similarity AS = 1 - ||Y|-|T|| / (|Y|+|T|) on
foreground pixel counts, and perimeter similarity PS, the same formula on
boundary pixel counts. AS and PS are translation-invariant, so a small lesion
predicted at a slight offset can score high PS while Dice collapses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyMaskError
from .records import CaseRecord, PixelGeometry, UNIT_GEOMETRY
from .validation import check_mask, check_same_shape


def extract_boundary(mask) -> np.ndarray:
    """Foreground pixels with a 4-neighbor that is background or off-image."""
    m = check_mask(mask)
    padded = np.pad(m, 1, mode="constant")
    interior = (
        (padded[:-2, 1:-1] == 1)
        & (padded[2:, 1:-1] == 1)
        & (padded[1:-1, :-2] == 1)
        & (padded[1:-1, 2:] == 1)
    )
    return ((m == 1) & ~interior).astype(np.uint8)


def dice_score(pred, gt) -> float:
    """2|Y∩T| / (|Y|+|T|); two empty masks agree perfectly (1.0)."""
    y = check_mask(pred, "pred")
    t = check_mask(gt, "gt")
    check_same_shape(y, t, "pred and gt")
    total = int(y.sum()) + int(t.sum())
    if total == 0:
        return 1.0
    inter = int(np.logical_and(y, t).sum())
    return 2.0 * inter / total


def area_similarity(pred, gt) -> float:
    """1 - ||Y|-|T|| / (|Y|+|T|) on foreground pixel counts."""
    y = check_mask(pred, "pred")
    t = check_mask(gt, "gt")
    check_same_shape(y, t, "pred and gt")
    ny, nt = int(y.sum()), int(t.sum())
    if ny + nt == 0:
        return 1.0
    return 1.0 - abs(ny - nt) / (ny + nt)


def perimeter_similarity(pred, gt) -> float:
    """Area-similarity formula applied to boundary pixel counts."""
    y = check_mask(pred, "pred")
    t = check_mask(gt, "gt")
    check_same_shape(y, t, "pred and gt")
    return area_similarity(extract_boundary(y), extract_boundary(t))


def _boundary_points_mm(mask: np.ndarray, geometry: PixelGeometry) -> np.ndarray:
    rows, cols = np.nonzero(extract_boundary(mask))
    return np.column_stack((cols * geometry.spacing_x, rows * geometry.spacing_y))


def hausdorff_distance(pred, gt, geometry: Optional[PixelGeometry] = None) -> float:
    """Symmetric Hausdorff distance between boundary-pixel centers.

    Distances are Euclidean over physical coordinates (col*spacing_x,
    row*spacing_y); with no geometry the result is in pixel units. Undefined
    (EmptyMaskError) when either mask has no foreground.
    """
    y = check_mask(pred, "pred")
    t = check_mask(gt, "gt")
    check_same_shape(y, t, "pred and gt")
    if y.sum() == 0 or t.sum() == 0:
        raise EmptyMaskError("Hausdorff distance is undefined for an empty mask")
    g = geometry if geometry is not None else UNIT_GEOMETRY
    a = _boundary_points_mm(y, g)
    b = _boundary_points_mm(t, g)
    d_ab = cKDTree(b).query(a)[0].max()
    d_ba = cKDTree(a).query(b)[0].max()
    return float(max(d_ab, d_ba))


@dataclass(frozen=True)
class MetricReport:
    """Per-case metric values; hd_mm is None when either mask was empty."""

    dsc: float
    hd_mm: Optional[float]
    area_similarity: float
    perimeter_similarity: float
    case: Optional[CaseRecord] = None


def evaluate_pair(pred, gt, geometry: Optional[PixelGeometry] = None,
                  case: Optional[CaseRecord] = None) -> MetricReport:
    """All four metrics for one prediction/ground-truth pair."""
    y = check_mask(pred, "pred")
    t = check_mask(gt, "gt")
    check_same_shape(y, t, "pred and gt")
    if y.sum() == 0 or t.sum() == 0:
        hd = None
    else:
        hd = hausdorff_distance(y, t, geometry)
    return MetricReport(
        dsc=dice_score(y, t),
        hd_mm=hd,
        area_similarity=area_similarity(y, t),
        perimeter_similarity=perimeter_similarity(y, t),
        case=case,
    )
