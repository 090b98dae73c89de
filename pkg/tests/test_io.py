import json

import numpy as np
import pytest
from PIL import Image as PILImage

from scarbench.errors import (
    DuplicateCaseError,
    FileMissingError,
    InvalidGeometryError,
    MalformedHeaderError,
    ParseError,
    UnsupportedDepthError,
)
from scarbench.io import (
    load_image,
    load_manifest,
    load_mask,
    load_scores,
    save_image,
    save_mask,
    save_scores,
)


def write_pgm(path, arr, maxval=255):
    h, w = arr.shape
    payload = arr.astype(">u2").tobytes() if maxval > 255 else arr.astype(np.uint8).tobytes()
    path.write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode() + payload)


class TestLoadMask:
    def test_all_saturated(self, tmp_path):
        p = tmp_path / "m.pgm"
        write_pgm(p, np.full((3, 3), 255, dtype=np.uint8))
        assert np.array_equal(load_mask(p), np.ones((3, 3), dtype=np.uint8))

    def test_any_nonzero_is_foreground(self, tmp_path):
        p = tmp_path / "m.pgm"
        write_pgm(p, np.array([[0, 128, 255]], dtype=np.uint8))
        assert load_mask(p).tolist() == [[0, 1, 1]]

    def test_truncated_raster(self, tmp_path):
        p = tmp_path / "m.pgm"
        p.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
        with pytest.raises(MalformedHeaderError):
            load_mask(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileMissingError):
            load_mask(tmp_path / "absent.pgm")

    def test_16bit_rejected(self, tmp_path):
        p = tmp_path / "m.pgm"
        write_pgm(p, np.full((2, 2), 300, dtype=np.uint16), maxval=65535)
        with pytest.raises(UnsupportedDepthError):
            load_mask(p)

    def test_header_comments(self, tmp_path):
        p = tmp_path / "m.pgm"
        p.write_bytes(b"P5\n# a comment\n2 1\n# another\n255\n\x00\xff")
        assert load_mask(p).tolist() == [[0, 1]]

    def test_not_pgm(self, tmp_path):
        p = tmp_path / "m.pgm"
        p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(MalformedHeaderError):
            load_mask(p)


class TestLoadImage:
    @pytest.mark.parametrize("byte,expected", [(255, 1.0), (0, 0.0), (51, 0.2)])
    def test_byte_scaling(self, tmp_path, byte, expected):
        p = tmp_path / "i.pgm"
        write_pgm(p, np.full((1, 1), byte, dtype=np.uint8))
        assert load_image(p)[0, 0] == pytest.approx(expected, abs=0)

    def test_png_roundtrip(self, tmp_path):
        arr = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
        p = tmp_path / "i.png"
        PILImage.fromarray(arr, mode="L").save(p)
        assert np.array_equal(load_image(p), arr / 255.0)
        assert np.array_equal(load_mask(p), (arr != 0).astype(np.uint8))

    def test_png_16bit_rejected(self, tmp_path):
        arr = np.full((2, 2), 1000, dtype=np.uint16)
        p = tmp_path / "i.png"
        PILImage.fromarray(arr).save(p)
        with pytest.raises(UnsupportedDepthError):
            load_image(p)


class TestRoundTrip:
    def test_mask_roundtrip_exact(self, tmp_path, rng):
        m = (rng.random((9, 7)) < 0.5).astype(np.uint8)
        p = tmp_path / "m.pgm"
        save_mask(m, p)
        assert np.array_equal(load_mask(p), m)

    def test_writer_emits_255(self, tmp_path):
        p = tmp_path / "m.pgm"
        save_mask(np.array([[1]], dtype=np.uint8), p)
        assert p.read_bytes().endswith(b"\xff")

    def test_image_quantizes_once(self, tmp_path, rng):
        img = rng.random((6, 5))
        p = tmp_path / "i.pgm"
        save_image(img, p)
        once = load_image(p)
        save_image(once, p)
        assert np.array_equal(load_image(p), once)
        assert np.abs(once - img).max() <= 0.5 / 255 + 1e-12

    def test_scores_roundtrip(self, tmp_path, rng):
        s = rng.normal(0, 3, (4, 6)).astype(np.float32).astype(np.float64)
        p = tmp_path / "s.f32"
        save_scores(s, p)
        assert np.array_equal(load_scores(p, 6, 4), s)

    def test_scores_size_mismatch(self, tmp_path):
        p = tmp_path / "s.f32"
        p.write_bytes(bytes(8))
        with pytest.raises(MalformedHeaderError):
            load_scores(p, 3, 3)


def manifest_entry(i=0, **overrides):
    entry = {
        "patient_id": f"p{i}",
        "cohort_id": "c1",
        "slice_index": i,
        "image": f"img{i}.pgm",
        "mask": f"mask{i}.pgm",
        "spacing_x_mm": 1.5,
        "spacing_y_mm": 1.5,
        "slice_thickness_mm": 8.0,
    }
    entry.update(overrides)
    return entry


class TestManifest:
    def test_two_entries_in_order(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps([manifest_entry(0), manifest_entry(1)]))
        records = load_manifest(p)
        assert [r.patient_id for r in records] == ["p0", "p1"]
        assert records[0].image_path == tmp_path / "img0.pgm"
        assert records[0].geometry.spacing_x == 1.5
        assert records[0].pred_path is None

    def test_zero_spacing(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps([manifest_entry(spacing_x_mm=0.0)]))
        with pytest.raises(InvalidGeometryError):
            load_manifest(p)

    def test_duplicate_case(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps([manifest_entry(0), manifest_entry(0)]))
        with pytest.raises(DuplicateCaseError):
            load_manifest(p)

    def test_bad_json(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text("{not json")
        with pytest.raises(ParseError):
            load_manifest(p)

    def test_missing_key(self, tmp_path):
        entry = manifest_entry()
        del entry["mask"]
        p = tmp_path / "m.json"
        p.write_text(json.dumps([entry]))
        with pytest.raises(ParseError):
            load_manifest(p)

    def test_optional_paths(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps([manifest_entry(pred="pred0.pgm", scores="s0.f32")]))
        rec = load_manifest(p)[0]
        assert rec.pred_path == tmp_path / "pred0.pgm"
        assert rec.scores_path == tmp_path / "s0.f32"
