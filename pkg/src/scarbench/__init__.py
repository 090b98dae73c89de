"""Quantitative tooling for myocardial scar segmentation masks.

Everything operates on plain numpy grids: binary masks (uint8 of {0,1}),
images (float64 in [0,1]), and score maps (float64), all row-major with
column = x and row = y.
"""

__version__ = "0.1.0"

from .augment import (
    AugmentSpec,
    AugmentStep,
    add_rician_noise,
    adjust_brightness,
    apply_augmentations,
    clahe,
    default_augment_spec,
    elastic_pair,
    flip_horizontal,
    flip_vertical,
    gamma_correct,
    jitter_bbox,
    mask_bbox,
    rotate_pair,
    scale_pair,
)
from .cohort import (
    AggregateRow,
    PatientBurden,
    aggregate,
    stratified_split,
    wilcoxon_rank_sum,
)
from .estimators import (
    Augmenter,
    BurdenStratifiedSplitter,
    FwhmSegmenter,
    MorphologyFeatureExtractor,
)
from .fwhm import fwhm_segment
from .io import (
    load_image,
    load_manifest,
    load_mask,
    load_scores,
    save_image,
    save_mask,
    save_scores,
)
from .losses import (
    LossConfig,
    bce_loss,
    combined_loss,
    dice_loss,
    gaussian_smooth,
    grad_combined_loss,
    kl_divergence,
    numerical_gradient,
    predicted_distribution,
    soft_target,
)
from .metrics import (
    MetricReport,
    area_similarity,
    dice_score,
    evaluate_pair,
    extract_boundary,
    hausdorff_distance,
    perimeter_similarity,
)
from .morphology import (
    FeatureVector,
    circularity,
    connected_components,
    feature_vector,
    perimeter_length,
    scar_mass,
    solidity,
)
from .records import BoundingBox, CaseRecord, PixelGeometry
from .resample import resample_image, resample_mask
