"""Spacing-aware resampling with pixel-center alignment.

Output sample k along an axis maps to source coordinate (k + 0.5) * scale - 0.5
with scale = old_size / new_size. Images are interpolated bilinearly, masks by
nearest neighbor so they stay binary.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidTargetError
from .records import PixelGeometry
from .validation import check_image, check_mask


def _source_coords(new_size: int, old_size: int) -> np.ndarray:
    scale = old_size / new_size
    return (np.arange(new_size, dtype=np.float64) + 0.5) * scale - 0.5


def bilinear_sample(arr: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                    fill: float | None = None) -> np.ndarray:
    """Sample ``arr`` at fractional (row, col) grids.

    With ``fill=None`` out-of-range coordinates clamp to the border; otherwise
    samples landing fully outside take the fill value.
    """
    h, w = arr.shape
    if fill is not None:
        inside = (rows > -0.5) & (rows < h - 0.5) & (cols > -0.5) & (cols < w - 0.5)
    r = np.clip(rows, 0.0, h - 1.0)
    c = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(r).astype(np.intp)
    c0 = np.floor(c).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = r - r0
    fc = c - c0
    top = arr[r0, c0] * (1.0 - fc) + arr[r0, c1] * fc
    bot = arr[r1, c0] * (1.0 - fc) + arr[r1, c1] * fc
    out = top * (1.0 - fr) + bot * fr
    if fill is not None:
        out = np.where(inside, out, fill)
    return out


def nearest_sample(arr: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                   fill=None) -> np.ndarray:
    """Nearest-neighbor counterpart of :func:`bilinear_sample`."""
    h, w = arr.shape
    if fill is not None:
        inside = (rows > -0.5) & (rows < h - 0.5) & (cols > -0.5) & (cols < w - 0.5)
    r = np.clip(np.rint(rows).astype(np.intp), 0, h - 1)
    c = np.clip(np.rint(cols).astype(np.intp), 0, w - 1)
    out = arr[r, c]
    if fill is not None:
        out = np.where(inside, out, np.asarray(fill, dtype=arr.dtype))
    return out


def _target_grid(shape, target_w: int, target_h: int):
    if target_w <= 0 or target_h <= 0:
        raise InvalidTargetError(f"target dimensions must be > 0, got {target_w}x{target_h}")
    h, w = shape
    rows = _source_coords(target_h, h)[:, None] * np.ones((1, target_w))
    cols = np.ones((target_h, 1)) * _source_coords(target_w, w)[None, :]
    return rows, cols


def _new_geometry(geometry: PixelGeometry, shape, target_w: int, target_h: int):
    h, w = shape
    return geometry.scaled(w / target_w, h / target_h)


def resample_image(image, geometry: PixelGeometry, target_w: int,
                   target_h: int) -> tuple[np.ndarray, PixelGeometry]:
    """Bilinearly resample an image; returns the image and its new spacing."""
    img = check_image(image)
    if (target_h, target_w) == img.shape:
        return img.copy(), geometry
    rows, cols = _target_grid(img.shape, target_w, target_h)
    return bilinear_sample(img, rows, cols), _new_geometry(geometry, img.shape,
                                                           target_w, target_h)


def resample_mask(mask, geometry: PixelGeometry, target_w: int,
                  target_h: int) -> tuple[np.ndarray, PixelGeometry]:
    """Nearest-neighbor resample of a binary mask; output stays binary."""
    m = check_mask(mask)
    if (target_h, target_w) == m.shape:
        return m.copy(), geometry
    rows, cols = _target_grid(m.shape, target_w, target_h)
    return nearest_sample(m, rows, cols), _new_geometry(geometry, m.shape,
                                                        target_w, target_h)
