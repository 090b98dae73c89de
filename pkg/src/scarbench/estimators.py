"""Estimator-style wrappers so the tooling drops into sklearn pipelines.

All estimators are stateless (fit is a no-op returning self) but expose
get_params/set_params, so they clone, grid-search, and serialize like any
other sklearn object. The functional API underneath stays the primary
surface; these classes only adapt call shapes.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .augment import AugmentSpec, apply_augmentations, default_augment_spec
from .cohort import DEFAULT_RATIOS, PatientBurden, stratified_split
from .fwhm import fwhm_segment
from .morphology import feature_vector
from .records import PixelGeometry


class FwhmSegmenter(BaseEstimator):
    """Half-maximum thresholding segmenter with a tunable fraction."""

    def __init__(self, threshold_fraction: float = 0.5):
        self.threshold_fraction = threshold_fraction

    def fit(self, X=None, y=None):
        return self

    def predict(self, image, myocardium, core_roi) -> np.ndarray:
        return fwhm_segment(image, myocardium, core_roi, self.threshold_fraction)


class Augmenter(BaseEstimator, TransformerMixin):
    """Applies an AugmentSpec to (image, mask) slices deterministically."""

    def __init__(self, spec: Optional[AugmentSpec] = None, seed: int = 0):
        self.spec = spec
        self.seed = seed

    def _resolved_spec(self) -> AugmentSpec:
        if self.spec is None:
            return default_augment_spec(self.seed)
        return AugmentSpec(steps=self.spec.steps, seed=self.seed)

    def fit(self, X=None, y=None):
        return self

    def transform(self, image, mask, bbox=None, case_key: Optional[int] = None):
        return apply_augmentations(image, mask, self._resolved_spec(), bbox=bbox,
                                   case_key=case_key)


class MorphologyFeatureExtractor(BaseEstimator, TransformerMixin):
    """Turns masks into a numeric feature matrix for downstream classifiers.

    Shape ratios of empty masks come out as NaN, which tree learners accept
    directly; impute upstream for estimators that do not.
    """

    _FEATURES = ("scar_size_px", "scar_area_mm2", "n_components", "solidity",
                 "circularity", "perimeter_mm")

    def __init__(self, geometry: Optional[PixelGeometry] = None, connectivity: int = 8):
        self.geometry = geometry
        self.connectivity = connectivity

    def fit(self, X=None, y=None):
        return self

    def transform(self, masks: Sequence) -> np.ndarray:
        rows = []
        for mask in masks:
            fv = feature_vector(mask, self.geometry, self.connectivity)
            rows.append([
                float(fv.scar_size_px),
                fv.scar_area_mm2,
                float(fv.n_components),
                np.nan if fv.solidity is None else fv.solidity,
                np.nan if fv.circularity is None else fv.circularity,
                fv.perimeter_mm,
            ])
        return np.asarray(rows, dtype=np.float64).reshape(len(rows), len(self._FEATURES))

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self._FEATURES, dtype=object)


class BurdenStratifiedSplitter(BaseEstimator):
    """Patient-level train/valid/test splitter stratified by scar burden."""

    def __init__(self, ratios: Sequence[float] = DEFAULT_RATIOS, n_bins: int = 4,
                 seed: int = 0):
        self.ratios = ratios
        self.n_bins = n_bins
        self.seed = seed

    def split(self, burdens: Sequence[PatientBurden]) -> dict[str, str]:
        return stratified_split(burdens, self.ratios, self.n_bins, self.seed)
