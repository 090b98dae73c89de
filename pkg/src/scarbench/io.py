"""File I/O: PGM/PNG masks and images, raw float32 score maps, JSON manifests.

Masks and images are written as binary PGM (P5, maxval 255). On input, 8-bit
PGM and 8-bit grayscale PNG are accepted; the format is sniffed from the first
bytes, not the file extension. Any nonzero stored pixel is mask foreground;
the writer always emits 255 for foreground.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import (
    DuplicateCaseError,
    FileMissingError,
    InvalidGeometryError,
    MalformedHeaderError,
    ParseError,
    UnsupportedDepthError,
)
from .records import CaseRecord, PixelGeometry
from .validation import check_image, check_mask, check_score_map

PathLike = Union[str, Path]

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _read_bytes(path: PathLike) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise FileMissingError(f"no such file: {p}")
    return p.read_bytes()


def _parse_pgm(data: bytes, path: PathLike) -> np.ndarray:
    # Header: "P5", width, height, maxval as ASCII tokens; '#' comments allowed.
    if not data.startswith(b"P5"):
        raise MalformedHeaderError(f"{path}: not a P5 PGM file")
    pos = 2
    tokens = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedHeaderError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    if pos >= len(data):
        raise MalformedHeaderError(f"{path}: missing PGM raster")
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise MalformedHeaderError(f"{path}: non-numeric PGM header fields") from None
    if width <= 0 or height <= 0:
        raise MalformedHeaderError(f"{path}: non-positive PGM dimensions")
    if maxval <= 0 or maxval > 65535:
        raise MalformedHeaderError(f"{path}: invalid PGM maxval {maxval}")
    if maxval > 255:
        raise UnsupportedDepthError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    n = width * height
    raster = data[pos : pos + n]
    if len(raster) < n:
        raise MalformedHeaderError(
            f"{path}: raster has {len(raster)} bytes, header declares {n}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def _parse_png(path: PathLike) -> np.ndarray:
    try:
        with PILImage.open(path) as im:
            if im.format != "PNG":
                raise MalformedHeaderError(f"{path}: not a PNG file")
            if im.mode != "L":
                raise UnsupportedDepthError(
                    f"{path}: only 8-bit grayscale PNG supported, mode={im.mode}")
            return np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError:
        raise MalformedHeaderError(f"{path}: unreadable PNG data") from None


def _load_gray8(path: PathLike) -> np.ndarray:
    data = _read_bytes(path)
    if data.startswith(_PNG_MAGIC):
        return _parse_png(path)
    return _parse_pgm(data, path)


def load_mask(path: PathLike) -> np.ndarray:
    """Load a binary mask; any nonzero stored pixel becomes foreground 1."""
    raw = _load_gray8(path)
    return (raw != 0).astype(np.uint8)


def load_image(path: PathLike) -> np.ndarray:
    """Load a grayscale image; stored byte v maps to intensity v/255."""
    raw = _load_gray8(path)
    return raw.astype(np.float64) / 255.0


def _atomic_write_bytes(path: PathLike, payload: bytes) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_pgm(arr8: np.ndarray, path: PathLike) -> None:
    h, w = arr8.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    _atomic_write_bytes(path, header + arr8.tobytes())


def save_mask(mask, path: PathLike) -> None:
    """Write a binary mask as PGM with foreground stored as 255."""
    m = check_mask(mask)
    _write_pgm((m * np.uint8(255)), path)


def save_image(image, path: PathLike) -> None:
    """Write an image as 8-bit PGM; intensity v is quantized to round(v*255)."""
    img = check_image(image)
    _write_pgm(np.rint(img * 255.0).astype(np.uint8), path)


def load_scores(path: PathLike, width: int, height: int) -> np.ndarray:
    """Load a score map stored as little-endian float32, row-major."""
    data = _read_bytes(path)
    n = width * height
    if len(data) != 4 * n:
        raise MalformedHeaderError(
            f"{path}: expected {4 * n} bytes for {width}x{height} float32 scores, "
            f"got {len(data)}")
    arr = np.frombuffer(data, dtype="<f4").reshape(height, width)
    return check_score_map(arr.astype(np.float64))


def save_scores(scores, path: PathLike) -> None:
    """Write a score map as little-endian float32, row-major."""
    s = check_score_map(scores)
    _atomic_write_bytes(path, s.astype("<f4").tobytes())


_REQUIRED_KEYS = {
    "patient_id": str,
    "cohort_id": str,
    "slice_index": int,
    "image": str,
    "mask": str,
    "spacing_x_mm": (int, float),
    "spacing_y_mm": (int, float),
    "slice_thickness_mm": (int, float),
}


def load_manifest(path: PathLike) -> list[CaseRecord]:
    """Load a cohort manifest.

    The manifest is a JSON array of case objects; file paths inside it are
    resolved relative to the manifest's own directory.
    """
    p = Path(path)
    if not p.is_file():
        raise FileMissingError(f"no such file: {p}")
    try:
        entries = json.loads(p.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{p}: invalid JSON: {exc}") from None
    if not isinstance(entries, list):
        raise ParseError(f"{p}: manifest must be a JSON array")

    base = p.parent
    records: list[CaseRecord] = []
    seen: set[tuple] = set()
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ParseError(f"{p}: entry {i} is not an object")
        for key, types in _REQUIRED_KEYS.items():
            if key not in entry:
                raise ParseError(f"{p}: entry {i} missing key {key!r}")
            if not isinstance(entry[key], types) or isinstance(entry[key], bool):
                raise ParseError(f"{p}: entry {i} key {key!r} has wrong type")
        if not entry["patient_id"]:
            raise ParseError(f"{p}: entry {i} has empty patient_id")
        if entry["slice_index"] < 0:
            raise ParseError(f"{p}: entry {i} has negative slice_index")
        try:
            geometry = PixelGeometry(
                float(entry["spacing_x_mm"]),
                float(entry["spacing_y_mm"]),
                float(entry["slice_thickness_mm"]),
            )
        except InvalidGeometryError as exc:
            raise InvalidGeometryError(f"{p}: entry {i}: {exc}") from None
        record = CaseRecord(
            patient_id=entry["patient_id"],
            cohort_id=entry["cohort_id"],
            slice_index=entry["slice_index"],
            image_path=base / entry["image"],
            mask_path=base / entry["mask"],
            geometry=geometry,
            pred_path=base / entry["pred"] if entry.get("pred") else None,
            scores_path=base / entry["scores"] if entry.get("scores") else None,
        )
        if record.key in seen:
            raise DuplicateCaseError(f"{p}: duplicate case {record.key}")
        seen.add(record.key)
        records.append(record)
    return records
