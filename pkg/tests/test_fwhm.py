import numpy as np
import pytest

from scarbench.errors import (
    DimensionMismatchError,
    EmptyRoiError,
    InvalidParameterError,
    RoiOutsideMyocardiumError,
)
from scarbench.fwhm import fwhm_segment


def ring_fixture(rng, size=24):
    """Random myocardium ring with an ROI on its brightest region."""
    yy, xx = np.mgrid[0:size, 0:size]
    center = size / 2 - 0.5
    rad = np.hypot(yy - center, xx - center)
    myo = ((rad >= 4) & (rad <= 9)).astype(np.uint8)
    img = rng.random((size, size)) * 0.6
    ys, xs = np.nonzero(myo)
    k = rng.integers(0, ys.size)
    roi = np.zeros_like(myo)
    roi[ys[k], xs[k]] = 1
    img[ys[k], xs[k]] = rng.uniform(0.7, 1.0)
    return img, myo, roi


class TestThresholdRule:
    def test_boundary_values(self):
        img = np.zeros((2, 3))
        img[0, 0] = 0.8
        img[1] = [0.39, 0.40, 0.41]
        myo = np.ones((2, 3), dtype=np.uint8)
        roi = np.zeros((2, 3), dtype=np.uint8)
        roi[0, 0] = 1
        out = fwhm_segment(img, myo, roi)
        assert out[1].tolist() == [0, 1, 1]

    def test_constant_image_labels_whole_myocardium(self):
        img = np.full((5, 5), 0.6)
        myo = np.zeros((5, 5), dtype=np.uint8)
        myo[1:4, 1:4] = 1
        roi = np.zeros((5, 5), dtype=np.uint8)
        roi[2, 2] = 1
        assert np.array_equal(fwhm_segment(img, myo, roi), myo)

    def test_roi_outside_myocardium(self):
        img = np.full((3, 3), 0.5)
        myo = np.zeros((3, 3), dtype=np.uint8)
        myo[1, 1] = 1
        roi = np.zeros((3, 3), dtype=np.uint8)
        roi[0, 0] = 1
        with pytest.raises(RoiOutsideMyocardiumError):
            fwhm_segment(img, myo, roi)

    def test_empty_roi(self):
        img = np.full((3, 3), 0.5)
        myo = np.ones((3, 3), dtype=np.uint8)
        with pytest.raises(EmptyRoiError):
            fwhm_segment(img, myo, np.zeros((3, 3), dtype=np.uint8))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            fwhm_segment(np.zeros((3, 3)), np.ones((2, 2), dtype=np.uint8),
                         np.ones((2, 2), dtype=np.uint8))

    def test_invalid_fraction(self):
        img = np.full((2, 2), 0.5)
        myo = np.ones((2, 2), dtype=np.uint8)
        with pytest.raises(InvalidParameterError):
            fwhm_segment(img, myo, myo, threshold_fraction=0.0)


class TestInvariants:
    def test_output_within_myocardium(self, rng):
        for _ in range(100):
            img, myo, roi = ring_fixture(rng)
            out = fwhm_segment(img, myo, roi)
            assert not np.any((out == 1) & (myo == 0))

    def test_output_contains_roi_argmax(self, rng):
        for _ in range(30):
            img, myo, roi = ring_fixture(rng)
            out = fwhm_segment(img, myo, roi)
            peak = np.unravel_index(np.where(roi == 1, img, -1).argmax(), img.shape)
            assert out[peak] == 1

    def test_invariant_under_positive_scaling(self, rng):
        # Power-of-two factors multiply exactly, so boundary ties cannot flip.
        for _ in range(30):
            img, myo, roi = ring_fixture(rng)
            base = fwhm_segment(img, myo, roi)
            for c in (0.5, 0.25):
                assert np.array_equal(fwhm_segment(img * c, myo, roi), base)

    def test_higher_fraction_only_shrinks(self, rng):
        for _ in range(30):
            img, myo, roi = ring_fixture(rng)
            lo = fwhm_segment(img, myo, roi, threshold_fraction=0.5)
            hi = fwhm_segment(img, myo, roi, threshold_fraction=0.75)
            assert not np.any((hi == 1) & (lo == 0))
