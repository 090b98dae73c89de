"""Seeded, deterministic augmentations for LGE slices, masks, and boxes.

Randomness comes from counter-based Philox streams: step index i of a spec
with seed s always draws from SeedSequence(s, spawn_key=(i,)), so reordering
or editing one step never perturbs the draws of the others. Steps whose
parameters are given as a [lo, hi] pair draw the value uniformly from that
range; scalar parameters are applied as-is.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from scipy import ndimage

from .errors import InvalidParameterError
from .records import BoundingBox
from .resample import bilinear_sample, nearest_sample
from .validation import check_image, check_mask, check_same_shape

Param = Union[float, Sequence[float]]

STEP_KINDS = ("gamma", "brightness", "clahe", "rician", "flip_h", "flip_v",
              "rotate", "scale", "elastic", "bbox_jitter")


def _as_generator(rng) -> Generator:
    if isinstance(rng, Generator):
        return rng
    return Generator(Philox(SeedSequence(int(rng))))


def step_rng(seed: int, step_index: int, case_key: Optional[int] = None) -> Generator:
    """Independent Philox stream for one pipeline step (and optional case)."""
    key = (step_index,) if case_key is None else (int(case_key), step_index)
    return Generator(Philox(SeedSequence(int(seed), spawn_key=key)))


def _draw(value: Param, rng: Generator) -> float:
    if isinstance(value, (list, tuple)):
        if len(value) != 2 or not all(math.isfinite(v) for v in value):
            raise InvalidParameterError(f"range parameter must be [lo, hi], got {value!r}")
        lo, hi = float(value[0]), float(value[1])
        if hi < lo:
            raise InvalidParameterError(f"range parameter must have lo <= hi, got {value!r}")
        return float(rng.uniform(lo, hi))
    v = float(value)
    if not math.isfinite(v):
        raise InvalidParameterError(f"parameter must be finite, got {value!r}")
    return v


def gamma_correct(image, gamma: float) -> np.ndarray:
    """Pixelwise power law out = in**gamma; gamma must be finite and > 0."""
    img = check_image(image)
    if not (math.isfinite(gamma) and gamma > 0):
        raise InvalidParameterError(f"gamma must be finite and > 0, got {gamma!r}")
    return np.power(img, gamma)


def adjust_brightness(image, factor: float) -> np.ndarray:
    """Multiplicative brightness, clamped back to [0, 1]."""
    img = check_image(image)
    if not (math.isfinite(factor) and factor >= 0):
        raise InvalidParameterError(f"brightness factor must be >= 0, got {factor!r}")
    return np.clip(img * factor, 0.0, 1.0)


def _tile_edges(size: int, tiles: int) -> list[int]:
    return [size * i // tiles for i in range(tiles + 1)]


def clahe(image, tiles_x: int = 8, tiles_y: int = 8, clip_limit: float = 2.0) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    Per tile: a 256-bin histogram is clipped at clip_limit times the mean bin
    count, the excess is redistributed uniformly over all bins, and the CDF
    becomes the tile's intensity mapping. Pixel outputs blend the mappings of
    the four surrounding tile centers bilinearly (clamped at the borders).
    """
    img = check_image(image)
    h, w = img.shape
    if not (isinstance(tiles_x, int) and isinstance(tiles_y, int)
            and tiles_x >= 1 and tiles_y >= 1):
        raise InvalidParameterError("tile counts must be integers >= 1")
    if w < tiles_x or h < tiles_y:
        raise InvalidParameterError(
            f"image {w}x{h} smaller than tile grid {tiles_x}x{tiles_y}")
    if not (math.isfinite(clip_limit) and clip_limit > 0):
        raise InvalidParameterError("clip_limit must be finite and > 0")

    bins = np.minimum(np.floor(img * 256.0).astype(np.intp), 255)
    row_edges = _tile_edges(h, tiles_y)
    col_edges = _tile_edges(w, tiles_x)
    luts = np.empty((tiles_y, tiles_x, 256))
    centers_r = np.empty(tiles_y)
    centers_c = np.empty(tiles_x)
    for ty in range(tiles_y):
        r0, r1 = row_edges[ty], row_edges[ty + 1]
        centers_r[ty] = (r0 + r1 - 1) / 2.0
        for tx in range(tiles_x):
            c0, c1 = col_edges[tx], col_edges[tx + 1]
            centers_c[tx] = (c0 + c1 - 1) / 2.0
            luts[ty, tx] = _clipped_cdf(bins[r0:r1, c0:c1], clip_limit)

    ty0, ty1, fy = _center_interp(np.arange(h, dtype=np.float64), centers_r)
    tx0, tx1, fx = _center_interp(np.arange(w, dtype=np.float64), centers_c)
    fy = fy[:, None]
    fx = fx[None, :]
    v00 = luts[ty0[:, None], tx0[None, :], bins]
    v01 = luts[ty0[:, None], tx1[None, :], bins]
    v10 = luts[ty1[:, None], tx0[None, :], bins]
    v11 = luts[ty1[:, None], tx1[None, :], bins]
    out = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11)
    return np.clip(out, 0.0, 1.0)


def _clipped_cdf(tile_bins: np.ndarray, clip_limit: float) -> np.ndarray:
    n = tile_bins.size
    hist = np.bincount(tile_bins.ravel(), minlength=256).astype(np.float64)
    limit = clip_limit * n / 256.0
    excess = float(np.maximum(hist - limit, 0.0).sum())
    hist = np.minimum(hist, limit) + excess / 256.0
    return np.cumsum(hist) / n


def _center_interp(coords: np.ndarray, centers: np.ndarray):
    idx1 = np.searchsorted(centers, coords)
    idx0 = np.clip(idx1 - 1, 0, len(centers) - 1)
    idx1 = np.clip(idx1, 0, len(centers) - 1)
    span = centers[idx1] - centers[idx0]
    frac = np.where(span > 0, (coords - centers[idx0]) / np.where(span > 0, span, 1.0), 0.0)
    return idx0, idx1, np.clip(frac, 0.0, 1.0)


def add_rician_noise(image, sigma: float, rng) -> np.ndarray:
    """MRI magnitude noise: out = |(in + n1, n2)| with Gaussian n1, n2.

    sigma = 0 returns the input unchanged, bit for bit.
    """
    img = check_image(image)
    if not (math.isfinite(sigma) and sigma >= 0):
        raise InvalidParameterError(f"noise sigma must be >= 0, got {sigma!r}")
    if sigma == 0.0:
        return img.copy()
    gen = _as_generator(rng)
    n1 = gen.normal(0.0, sigma, img.shape)
    n2 = gen.normal(0.0, sigma, img.shape)
    return np.clip(np.hypot(img + n1, n2), 0.0, 1.0)


def _warp_pair(image: np.ndarray, mask: np.ndarray, src_rows: np.ndarray,
               src_cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    out_img = bilinear_sample(image, src_rows, src_cols, fill=0.0)
    out_mask = nearest_sample(mask, src_rows, src_cols, fill=0).astype(np.uint8)
    return out_img, out_mask


def flip_horizontal(image, mask) -> tuple[np.ndarray, np.ndarray]:
    img = check_image(image)
    m = check_mask(mask)
    check_same_shape(img, m, "image and mask")
    return img[:, ::-1].copy(), m[:, ::-1].copy()


def flip_vertical(image, mask) -> tuple[np.ndarray, np.ndarray]:
    img = check_image(image)
    m = check_mask(mask)
    check_same_shape(img, m, "image and mask")
    return img[::-1, :].copy(), m[::-1, :].copy()


def rotate_pair(image, mask, degrees: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotate both grids about the image center; out-of-frame fills with 0."""
    img = check_image(image)
    m = check_mask(mask)
    check_same_shape(img, m, "image and mask")
    h, w = img.shape
    theta = math.radians(degrees)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    mx, my = (w - 1) / 2.0, (h - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - mx
    dy = ys - my
    src_cols = cos_t * dx + sin_t * dy + mx
    src_rows = -sin_t * dx + cos_t * dy + my
    return _warp_pair(img, m, src_rows, src_cols)


def scale_pair(image, mask, factor: float) -> tuple[np.ndarray, np.ndarray]:
    """Zoom about the image center; factor > 1 enlarges content."""
    img = check_image(image)
    m = check_mask(mask)
    check_same_shape(img, m, "image and mask")
    if not (math.isfinite(factor) and factor > 0):
        raise InvalidParameterError(f"scale factor must be > 0, got {factor!r}")
    h, w = img.shape
    mx, my = (w - 1) / 2.0, (h - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w]
    src_cols = (xs - mx) / factor + mx
    src_rows = (ys - my) / factor + my
    return _warp_pair(img, m, src_rows, src_cols)


def elastic_pair(image, mask, alpha: float, smoothness: float,
                 rng) -> tuple[np.ndarray, np.ndarray]:
    """Random smooth deformation with peak displacement alpha pixels."""
    img = check_image(image)
    m = check_mask(mask)
    check_same_shape(img, m, "image and mask")
    if not (math.isfinite(alpha) and alpha >= 0):
        raise InvalidParameterError(f"alpha must be >= 0, got {alpha!r}")
    if not (math.isfinite(smoothness) and smoothness > 0):
        raise InvalidParameterError(f"smoothness must be > 0, got {smoothness!r}")
    gen = _as_generator(rng)
    h, w = img.shape
    fields = []
    for _ in range(2):
        f = ndimage.gaussian_filter(gen.uniform(-1.0, 1.0, (h, w)), smoothness,
                                    mode="reflect")
        peak = np.abs(f).max()
        fields.append(alpha * f / peak if peak > 0 else f)
    drow, dcol = fields
    ys, xs = np.mgrid[0:h, 0:w]
    return _warp_pair(img, m, ys + drow, xs + dcol)


def mask_bbox(mask) -> Optional[BoundingBox]:
    """Tight bounding box of the foreground, or None for an empty mask."""
    m = check_mask(mask)
    rows, cols = np.nonzero(m)
    if rows.size == 0:
        return None
    return BoundingBox(int(cols.min()), int(rows.min()), int(cols.max()), int(rows.max()))


def jitter_bbox(box: BoundingBox, max_shift_frac: float, max_scale_frac: float,
                rng, img_w: int, img_h: int) -> BoundingBox:
    """Randomly shift the box center and rescale its sides.

    Shifts are uniform in +/- max_shift_frac of the box size per axis; sides
    scale by uniform draws in 1 +/- max_scale_frac. The result is rounded and
    clamped so it stays a valid box inside the image.
    """
    if not (math.isfinite(max_shift_frac) and max_shift_frac >= 0):
        raise InvalidParameterError("max_shift_frac must be >= 0")
    if not (math.isfinite(max_scale_frac) and 0 <= max_scale_frac <= 1):
        raise InvalidParameterError("max_scale_frac must be in [0, 1]")
    box.validate_within(img_w, img_h)
    gen = _as_generator(rng)
    w, h = box.width, box.height
    cx = (box.x_min + box.x_max) / 2.0
    cy = (box.y_min + box.y_max) / 2.0
    dx = gen.uniform(-max_shift_frac, max_shift_frac) * w
    dy = gen.uniform(-max_shift_frac, max_shift_frac) * h
    sx = gen.uniform(1.0 - max_scale_frac, 1.0 + max_scale_frac)
    sy = gen.uniform(1.0 - max_scale_frac, 1.0 + max_scale_frac)
    new_w = min(img_w, max(1, round(w * sx)))
    new_h = min(img_h, max(1, round(h * sy)))
    x_min = round(cx + dx - (new_w - 1) / 2.0)
    y_min = round(cy + dy - (new_h - 1) / 2.0)
    x_min = min(max(x_min, 0), img_w - new_w)
    y_min = min(max(y_min, 0), img_h - new_h)
    return BoundingBox(x_min, y_min, x_min + new_w - 1, y_min + new_h - 1)


_SPATIAL_KINDS = {"flip_h", "flip_v", "rotate", "scale", "elastic"}

_STEP_PARAMS = {
    "gamma": {"gamma"},
    "brightness": {"factor"},
    "clahe": {"tiles_x", "tiles_y", "clip_limit"},
    "rician": {"sigma"},
    "flip_h": set(),
    "flip_v": set(),
    "rotate": {"degrees"},
    "scale": {"factor"},
    "elastic": {"alpha", "smoothness"},
    "bbox_jitter": {"max_shift_frac", "max_scale_frac"},
}


@dataclass(frozen=True)
class AugmentStep:
    """One pipeline step: a kind plus its (possibly ranged) parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise InvalidParameterError(f"unknown augmentation kind {self.kind!r}")
        unknown = set(self.params) - _STEP_PARAMS[self.kind]
        if unknown:
            raise InvalidParameterError(
                f"unknown parameters {sorted(unknown)} for step {self.kind!r}")


@dataclass(frozen=True)
class AugmentSpec:
    """Ordered augmentation steps plus the master seed."""

    steps: tuple
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        for s in self.steps:
            if not isinstance(s, AugmentStep):
                raise InvalidParameterError("steps must be AugmentStep instances")

    def to_json(self) -> str:
        payload = {"seed": self.seed,
                   "steps": [{"kind": s.kind, **s.params} for s in self.steps]}
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "AugmentSpec":
        payload = json.loads(text)
        if not isinstance(payload, dict) or "seed" not in payload:
            raise InvalidParameterError("augment spec JSON must carry a seed")
        steps = []
        for raw in payload.get("steps", []):
            raw = dict(raw)
            kind = raw.pop("kind", None)
            steps.append(AugmentStep(kind, raw))
        return cls(steps=tuple(steps), seed=int(payload["seed"]))


def default_augment_spec(seed: int = 0) -> AugmentSpec:
    """Mild, MRI-plausible default ranges."""
    return AugmentSpec(
        steps=(
            AugmentStep("gamma", {"gamma": [0.7, 1.5]}),
            AugmentStep("brightness", {"factor": [0.8, 1.2]}),
            AugmentStep("rician", {"sigma": [0.0, 0.05]}),
            AugmentStep("rotate", {"degrees": [-15.0, 15.0]}),
            AugmentStep("scale", {"factor": [0.9, 1.1]}),
            AugmentStep("bbox_jitter", {"max_shift_frac": 0.1, "max_scale_frac": 0.1}),
        ),
        seed=seed,
    )


def apply_augmentations(image, mask, spec: AugmentSpec, bbox: Optional[BoundingBox] = None,
                        case_key: Optional[int] = None):
    """Run a full spec on one slice.

    Returns (image, mask, bbox). The tracked box is re-derived from the mask
    after any spatial step (it becomes None when the mask empties); a
    bbox_jitter step falls back to the mask's tight box when none is tracked.
    """
    img = check_image(image)
    m = check_mask(mask)
    check_same_shape(img, m, "image and mask")
    box = bbox
    for i, stp in enumerate(spec.steps):
        rng = step_rng(spec.seed, i, case_key)
        p = stp.params
        if stp.kind == "gamma":
            img = gamma_correct(img, _draw(p.get("gamma", 1.0), rng))
        elif stp.kind == "brightness":
            img = adjust_brightness(img, _draw(p.get("factor", 1.0), rng))
        elif stp.kind == "clahe":
            img = clahe(img, int(p.get("tiles_x", 8)), int(p.get("tiles_y", 8)),
                        float(p.get("clip_limit", 2.0)))
        elif stp.kind == "rician":
            img = add_rician_noise(img, _draw(p.get("sigma", 0.0), rng), rng)
        elif stp.kind == "flip_h":
            img, m = flip_horizontal(img, m)
        elif stp.kind == "flip_v":
            img, m = flip_vertical(img, m)
        elif stp.kind == "rotate":
            img, m = rotate_pair(img, m, _draw(p.get("degrees", 0.0), rng))
        elif stp.kind == "scale":
            img, m = scale_pair(img, m, _draw(p.get("factor", 1.0), rng))
        elif stp.kind == "elastic":
            img, m = elastic_pair(img, m, float(p.get("alpha", 8.0)),
                                  float(p.get("smoothness", 6.0)), rng)
        elif stp.kind == "bbox_jitter":
            if box is None:
                box = mask_bbox(m)
            if box is not None:
                h, w = m.shape
                box = jitter_bbox(box, float(p.get("max_shift_frac", 0.1)),
                                  float(p.get("max_scale_frac", 0.1)), rng, w, h)
            continue
        if stp.kind in _SPATIAL_KINDS:
            box = mask_bbox(m)
    return img, m, box
