"""Noisy-label segmentation loss: Dice + cross-entropy + KL on soft targets.

The target mask is Gaussian-smoothed into a soft label and normalized to a
pixel distribution p. Predicted scores pass through a sigmoid and a softmax
over all pixels (evaluated in the log domain) to give distribution q, and
KL(p || q) penalizes predictions that put no mass where the soft target does.
The three terms combine as w_dice * dice + w_ce * bce + w_kl * kl with
default weights (0.2, 0.2, 0.6) and smoothing sigma = 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import expit, logsumexp

from .errors import EmptyTargetError, InvalidParameterError
from .validation import check_distribution, check_mask, check_same_shape, check_score_map

WEIGHT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class LossConfig:
    """Weights, smoothing width, and numerical floors for the combined loss."""

    w_dice: float = 0.2
    w_ce: float = 0.2
    w_kl: float = 0.6
    sigma: float = 2.0
    eps_dice: float = 1e-6
    eps_log: float = 1e-12

    def __post_init__(self):
        weights = (self.w_dice, self.w_ce, self.w_kl)
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise InvalidParameterError("loss weights must be finite and >= 0")
        if abs(sum(weights) - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidParameterError("loss weights must sum to 1")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidParameterError("sigma must be > 0")
        if self.eps_dice <= 0 or self.eps_log <= 0:
            raise InvalidParameterError("epsilons must be > 0")


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Discrete Gaussian truncated at radius ceil(3*sigma), renormalized to sum 1."""
    if not (math.isfinite(sigma) and sigma > 0):
        raise InvalidParameterError("sigma must be > 0")
    radius = math.ceil(3.0 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_smooth(mask, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of a mask with reflect padding; output in [0,1]."""
    m = check_mask(mask).astype(np.float64)
    k = gaussian_kernel_1d(sigma)
    out = ndimage.convolve1d(m, k, axis=0, mode="reflect")
    out = ndimage.convolve1d(out, k, axis=1, mode="reflect")
    return np.clip(out, 0.0, 1.0)


def soft_target(mask, sigma: float) -> np.ndarray:
    """Soft-label distribution: smoothed mask divided by its global sum."""
    m = check_mask(mask)
    if m.sum() == 0:
        raise EmptyTargetError("soft target undefined for an all-background mask")
    smoothed = gaussian_smooth(m, sigma)
    return smoothed / smoothed.sum()


def predicted_distribution(scores) -> np.ndarray:
    """Sigmoid then softmax over all pixels, evaluated in the log domain."""
    s = check_score_map(scores)
    a = expit(s)
    return np.exp(a - logsumexp(a))


def kl_divergence(p, q, eps_log: float = 1e-12) -> float:
    """Sum of p*log(p / max(q, eps_log)) with the convention 0*log0 = 0."""
    pa = check_distribution(p, "p")
    qa = check_distribution(q, "q")
    check_same_shape(pa, qa, "p and q")
    support = pa > 0.0
    ratio = pa[support] / np.maximum(qa[support], eps_log)
    return float(np.sum(pa[support] * np.log(ratio)))


def dice_loss(scores, target, eps_dice: float = 1e-6) -> float:
    """Soft Dice loss on sigmoid activations against a hard mask."""
    s = check_score_map(scores)
    t = check_mask(target)
    check_same_shape(s, t, "scores and target")
    a = expit(s)
    tf = t.astype(np.float64)
    num = 2.0 * float(np.sum(a * tf)) + eps_dice
    den = float(a.sum()) + float(tf.sum()) + eps_dice
    return 1.0 - num / den


def bce_loss(scores, target) -> float:
    """Mean binary cross-entropy, computed in the stable score-domain form."""
    s = check_score_map(scores)
    t = check_mask(target)
    check_same_shape(s, t, "scores and target")
    tf = t.astype(np.float64)
    per_pixel = np.maximum(s, 0.0) - s * tf + np.log1p(np.exp(-np.abs(s)))
    return float(per_pixel.mean())


def combined_loss(scores, target, config: LossConfig = LossConfig()) -> float:
    """Weighted Dice + cross-entropy + KL(soft target || predicted)."""
    s = check_score_map(scores)
    t = check_mask(target)
    check_same_shape(s, t, "scores and target")
    total = 0.0
    if config.w_dice > 0.0:
        total += config.w_dice * dice_loss(s, t, config.eps_dice)
    if config.w_ce > 0.0:
        total += config.w_ce * bce_loss(s, t)
    if config.w_kl > 0.0:
        p = soft_target(t, config.sigma)
        q = predicted_distribution(s)
        total += config.w_kl * kl_divergence(p, q, config.eps_log)
    return total


def loss_terms(scores, target, config: LossConfig = LossConfig()) -> dict:
    """The three unweighted terms plus the weighted total, for reporting."""
    s = check_score_map(scores)
    t = check_mask(target)
    check_same_shape(s, t, "scores and target")
    dice = dice_loss(s, t, config.eps_dice)
    bce = bce_loss(s, t)
    if config.w_kl > 0.0:
        kl = kl_divergence(soft_target(t, config.sigma), predicted_distribution(s),
                           config.eps_log)
    else:
        kl = float("nan")
    total = config.w_dice * dice + config.w_ce * bce + (
        config.w_kl * kl if config.w_kl > 0.0 else 0.0)
    return {"dice": dice, "bce": bce, "kl": kl, "total": total}


def grad_combined_loss(scores, target, config: LossConfig = LossConfig()) -> np.ndarray:
    """Analytic d(combined_loss)/d(score) per pixel.

    For weights (0, 1, 0) this reduces pointwise to (sigmoid(s) - t) / N.
    """
    s = check_score_map(scores)
    t = check_mask(target)
    check_same_shape(s, t, "scores and target")
    a = expit(s)
    sig_prime = a * (1.0 - a)
    tf = t.astype(np.float64)
    grad = np.zeros_like(s)

    if config.w_dice > 0.0:
        num = 2.0 * float(np.sum(a * tf)) + config.eps_dice
        den = float(a.sum()) + float(tf.sum()) + config.eps_dice
        d_loss_da = (num - 2.0 * tf * den) / (den * den)
        grad += config.w_dice * d_loss_da * sig_prime

    if config.w_ce > 0.0:
        grad += config.w_ce * (a - tf) / s.size

    if config.w_kl > 0.0:
        p = soft_target(t, config.sigma)
        q = predicted_distribution(s)
        # d/dq of p*log(p/max(q,eps)) is -p/q above the clamp and 0 below it.
        ratio = np.where(q > config.eps_log, p / np.maximum(q, config.eps_log), 0.0)
        d_kl_da = q * (float(np.sum(ratio * q)) - ratio)
        grad += config.w_kl * d_kl_da * sig_prime

    return grad


def numerical_gradient(scores, target, config: LossConfig = LossConfig(),
                       step: float = 1e-3) -> np.ndarray:
    """Central finite differences of the combined loss, one pixel at a time."""
    s = check_score_map(scores).copy()
    grad = np.zeros_like(s)
    it = np.nditer(s, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = s[idx]
        s[idx] = orig + step
        hi = combined_loss(s, target, config)
        s[idx] = orig - step
        lo = combined_loss(s, target, config)
        s[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * step)
    return grad


def max_relative_gradient_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max abs deviation normalized by the largest gradient magnitude."""
    scale = max(float(np.abs(analytic).max()), float(np.abs(numeric).max()))
    if scale == 0.0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)
