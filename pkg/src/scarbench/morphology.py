"""Morphological lesion features and scar-mass estimation.

Perimeter is crack length: the count of foreground pixel edges facing
background or the image border, weighted by the pixel spacing. This shared
definition keeps circularity = 4*pi*area/perimeter^2 at or below 1 on the
grid and makes every feature exactly testable. Solidity uses a rasterized
convex hull (pixel centers inside or on the hull polygon, integer-exact), so
it cannot exceed 1 either.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError, InvalidParameterError
from .records import PixelGeometry, UNIT_GEOMETRY
from .validation import check_mask

_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)
_STRUCTURE_8 = np.ones((3, 3), dtype=np.uint8)


def connected_components(mask, connectivity: int = 8) -> tuple[int, np.ndarray]:
    """Label foreground components; returns (count, label map)."""
    m = check_mask(mask)
    if connectivity == 4:
        structure = _STRUCTURE_4
    elif connectivity == 8:
        structure = _STRUCTURE_8
    else:
        raise InvalidParameterError(f"connectivity must be 4 or 8, got {connectivity!r}")
    labels, count = ndimage.label(m, structure=structure)
    return int(count), labels


def perimeter_length(mask, geometry: Optional[PixelGeometry] = None) -> float:
    """Crack-length perimeter in mm (pixel units when geometry is absent).

    Exposed horizontal edges (top/bottom faces) each measure spacing_x;
    exposed vertical edges (left/right faces) each measure spacing_y.
    """
    m = check_mask(mask)
    g = geometry if geometry is not None else UNIT_GEOMETRY
    padded = np.pad(m, 1)
    fg = m == 1
    top = fg & (padded[:-2, 1:-1] == 0)
    bottom = fg & (padded[2:, 1:-1] == 0)
    left = fg & (padded[1:-1, :-2] == 0)
    right = fg & (padded[1:-1, 2:] == 0)
    n_horizontal = int(top.sum()) + int(bottom.sum())
    n_vertical = int(left.sum()) + int(right.sum())
    return n_horizontal * g.spacing_x + n_vertical * g.spacing_y


def _convex_hull_vertices(xs: np.ndarray, ys: np.ndarray) -> list[tuple[int, int]]:
    """Andrew's monotone chain on integer points; CCW, collinear points dropped."""
    pts = sorted({(int(x), int(y)) for x, y in zip(xs, ys)})
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[int, int]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[int, int]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _hull_pixel_count(xs: np.ndarray, ys: np.ndarray) -> int:
    """Pixels whose centers are inside or on the convex hull of (xs, ys)."""
    verts = _convex_hull_vertices(xs, ys)
    if len(verts) == 1:
        return 1
    if len(verts) == 2:
        (x0, y0), (x1, y1) = verts
        return math.gcd(abs(x1 - x0), abs(y1 - y0)) + 1
    gx, gy = np.meshgrid(
        np.arange(xs.min(), xs.max() + 1, dtype=np.int64),
        np.arange(ys.min(), ys.max() + 1, dtype=np.int64),
    )
    inside = np.ones(gx.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        # CCW hull: interior points satisfy cross >= 0 for every edge.
        inside &= (x1 - x0) * (gy - y0) - (y1 - y0) * (gx - x0) >= 0
    return int(inside.sum())


def solidity(mask, connectivity: int = 8) -> float:
    """Area-weighted mean over components of pixel area / hull pixel area."""
    m = check_mask(mask)
    if m.sum() == 0:
        raise EmptyMaskError("solidity is undefined for an empty mask")
    count, labels = connected_components(m, connectivity)
    areas = np.zeros(count)
    ratios = np.zeros(count)
    for lbl in range(1, count + 1):
        ys, xs = np.nonzero(labels == lbl)
        area = xs.size
        areas[lbl - 1] = area
        ratios[lbl - 1] = area / _hull_pixel_count(xs, ys)
    if count == 1:
        return float(ratios[0])
    return float(np.average(ratios, weights=areas))


def circularity(mask, geometry: Optional[PixelGeometry] = None) -> float:
    """4*pi*area/perimeter^2 over the whole foreground, crack-length perimeter."""
    m = check_mask(mask)
    if m.sum() == 0:
        raise EmptyMaskError("circularity is undefined for an empty mask")
    g = geometry if geometry is not None else UNIT_GEOMETRY
    area = float(m.sum()) * g.spacing_x * g.spacing_y
    perim = perimeter_length(m, g)
    return 4.0 * math.pi * area / (perim * perim)


#: Standard literature value for myocardial tissue density.
MYOCARDIUM_DENSITY_G_PER_ML = 1.05


def scar_mass(cases, density: float = MYOCARDIUM_DENSITY_G_PER_ML) -> float:
    """Total scar mass in grams over (mask, geometry) slices.

    Each slice contributes foreground_px * spacing_x * spacing_y *
    slice_thickness cubic mm; the volume converts to mL and multiplies the
    tissue density.
    """
    if not (math.isfinite(density) and density > 0):
        raise InvalidParameterError(f"density must be > 0, got {density!r}")
    volume_mm3 = 0.0
    for mask, geometry in cases:
        m = check_mask(mask)
        volume_mm3 += (float(m.sum()) * geometry.spacing_x * geometry.spacing_y
                       * geometry.slice_thickness)
    return volume_mm3 / 1000.0 * density


@dataclass(frozen=True)
class FeatureVector:
    """Per-slice morphological summary; shape ratios are None when empty."""

    scar_size_px: int
    scar_area_mm2: float
    n_components: int
    solidity: Optional[float]
    circularity: Optional[float]
    perimeter_mm: float


def feature_vector(mask, geometry: Optional[PixelGeometry] = None,
                   connectivity: int = 8) -> FeatureVector:
    """Assemble all morphological features for one slice."""
    m = check_mask(mask)
    g = geometry if geometry is not None else UNIT_GEOMETRY
    size = int(m.sum())
    count, _ = connected_components(m, connectivity)
    if size == 0:
        return FeatureVector(0, 0.0, 0, None, None, 0.0)
    return FeatureVector(
        scar_size_px=size,
        scar_area_mm2=size * g.spacing_x * g.spacing_y,
        n_components=count,
        solidity=solidity(m, connectivity),
        circularity=circularity(m, g),
        perimeter_mm=perimeter_length(m, g),
    )
