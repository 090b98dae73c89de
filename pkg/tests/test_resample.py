import numpy as np
import pytest

from scarbench.errors import InvalidTargetError
from scarbench.records import PixelGeometry
from scarbench.resample import resample_image, resample_mask


def nn_resample_oracle(mask, target_w, target_h):
    """Brute-force pixel-center nearest-neighbor index mapping."""
    h, w = mask.shape
    out = np.zeros((target_h, target_w), dtype=mask.dtype)
    for r in range(target_h):
        for c in range(target_w):
            src_r = (r + 0.5) * h / target_h - 0.5
            src_c = (c + 0.5) * w / target_w - 0.5
            rr = min(max(int(np.rint(src_r)), 0), h - 1)
            cc = min(max(int(np.rint(src_c)), 0), w - 1)
            out[r, c] = mask[rr, cc]
    return out


GEOM = PixelGeometry(2.0, 1.5, 8.0)


class TestResample:
    def test_identity_dimensions(self, rng):
        img = rng.random((5, 7))
        out, g = resample_image(img, GEOM, 7, 5)
        assert np.array_equal(out, img)
        assert g == GEOM

    def test_constant_preserved(self):
        img = np.full((4, 4), 0.7)
        out, _ = resample_image(img, GEOM, 9, 3)
        assert np.allclose(out, 0.7, atol=1e-12)

    def test_mask_upsample_matches_oracle(self):
        m = np.array([[1, 0], [0, 0]], dtype=np.uint8)
        out, _ = resample_mask(m, GEOM, 4, 4)
        assert np.array_equal(out, nn_resample_oracle(m, 4, 4))

    def test_random_masks_match_oracle(self, rng):
        for _ in range(20):
            h, w = rng.integers(1, 9, 2)
            m = (rng.random((h, w)) < 0.5).astype(np.uint8)
            tw, th = rng.integers(1, 13, 2)
            out, _ = resample_mask(m, GEOM, int(tw), int(th))
            assert np.array_equal(out, nn_resample_oracle(m, int(tw), int(th)))

    def test_mask_stays_binary(self, rng):
        m = (rng.random((6, 6)) < 0.5).astype(np.uint8)
        out, _ = resample_mask(m, GEOM, 17, 11)
        assert set(np.unique(out)) <= {0, 1}

    def test_new_spacing_preserves_extent(self):
        img = np.zeros((10, 20))
        _, g = resample_image(img, GEOM, 7, 13)
        assert 7 * g.spacing_x == pytest.approx(20 * GEOM.spacing_x)
        assert 13 * g.spacing_y == pytest.approx(10 * GEOM.spacing_y)
        assert g.slice_thickness == GEOM.slice_thickness

    def test_constant_mask_down_up_identity(self):
        m = np.ones((8, 8), dtype=np.uint8)
        down, g = resample_mask(m, GEOM, 3, 3)
        up, _ = resample_mask(down, g, 8, 8)
        assert np.array_equal(up, m)

    def test_zero_target(self):
        with pytest.raises(InvalidTargetError):
            resample_image(np.zeros((2, 2)), GEOM, 0, 4)

    def test_bilinear_known_midpoint(self):
        # Downsampling 1x2 -> 1x1 samples the exact midpoint of both pixels.
        img = np.array([[0.0, 1.0]])
        out, _ = resample_image(img, GEOM, 1, 1)
        assert out[0, 0] == pytest.approx(0.5, abs=1e-15)
