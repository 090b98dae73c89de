"""Input validation helpers for masks, images, score maps, and distributions.

All pixel grids are 2-D numpy arrays in row-major (row, column) order; column
index maps to x and row index to y.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError

DIST_SUM_TOL = 1e-9


def check_mask(m, name: str = "mask") -> np.ndarray:
    """Return ``m`` as a 2-D uint8 array of {0,1}, or raise."""
    arr = np.asarray(m)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidParameterError(f"{name} must be a nonempty 2-D array")
    if not np.isin(arr, (0, 1)).all():
        raise InvalidParameterError(f"{name} values must all be 0 or 1")
    return arr.astype(np.uint8, copy=False)


def check_image(img, name: str = "image") -> np.ndarray:
    """Return ``img`` as a 2-D float64 array with values in [0, 1], or raise."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidParameterError(f"{name} must be a nonempty 2-D array")
    if not np.isfinite(arr).all():
        raise InvalidParameterError(f"{name} intensities must be finite")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidParameterError(f"{name} intensities must lie in [0, 1]")
    return arr


def check_score_map(s, name: str = "scores") -> np.ndarray:
    """Return ``s`` as a 2-D float64 array of finite values, or raise."""
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidParameterError(f"{name} must be a nonempty 2-D array")
    if not np.isfinite(arr).all():
        raise InvalidParameterError(f"{name} values must be finite")
    return arr


def check_distribution(p, name: str = "distribution") -> np.ndarray:
    """Return ``p`` as a float64 array that is nonnegative and sums to 1."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.size == 0:
        raise InvalidParameterError(f"{name} must be nonempty")
    if not np.isfinite(arr).all() or arr.min() < 0.0:
        raise InvalidParameterError(f"{name} must be finite and nonnegative")
    if abs(float(arr.sum()) - 1.0) > DIST_SUM_TOL:
        raise InvalidParameterError(f"{name} must sum to 1 within {DIST_SUM_TOL}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "inputs") -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"{what} must share dimensions, got {a.shape} vs {b.shape}")
