"""Patient-level stratified splitting, metric aggregation, and rank-sum test."""

from __future__ import annotations

import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import (
    DuplicateCaseError,
    EmptyCohortError,
    EmptyInputError,
    EmptySampleError,
    InvalidParameterError,
    InvalidRatiosError,
)
from .metrics import MetricReport

SUBSETS = ("train", "valid", "test")
DEFAULT_RATIOS = (0.70, 0.15, 0.15)

#: Largest sample sizes for which the rank-sum test enumerates exactly.
EXACT_MIN_SIDE = 10
EXACT_MAX_TOTAL = 25


@dataclass(frozen=True)
class PatientBurden:
    """Total scar pixels of one patient within one cohort."""

    patient_id: str
    cohort_id: str
    total_scar_px: int

    def __post_init__(self):
        if not self.patient_id:
            raise InvalidParameterError("patient_id must be nonempty")
        if self.total_scar_px < 0:
            raise InvalidParameterError("total_scar_px must be >= 0")


def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    exact = [n * r for r in ratios]
    base = [math.floor(e) for e in exact]
    remaining = n - sum(base)
    # Seats go to the largest fractional parts; ties favor the larger ratio,
    # then the earlier subset.
    order = sorted(range(len(ratios)),
                   key=lambda i: (-(exact[i] - base[i]), -ratios[i], i))
    for i in order[:remaining]:
        base[i] += 1
    return base


def _spread_labels(quotas: Sequence[int]) -> list[int]:
    """Evenly interleaved subset labels: quota[s] copies of each subset index."""
    marks = []
    for s, q in enumerate(quotas):
        for j in range(q):
            marks.append(((j + 0.5) / q, s))
    marks.sort()
    return [s for _, s in marks]


def _cohort_rng(seed: int, cohort_id: str) -> np.random.Generator:
    digest = hashlib.sha256(cohort_id.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(key,)))


def stratified_split(burdens: Sequence[PatientBurden],
                     ratios: Sequence[float] = DEFAULT_RATIOS,
                     n_bins: int = 4, seed: int = 0) -> dict[str, str]:
    """Assign every patient to train/valid/test, stratified by scar burden.

    Within each cohort, patients are sorted by burden, divided into n_bins
    quantile bins, shuffled within bins by the seeded generator, and dealt to
    subsets in an evenly interleaved order. Subset sizes per cohort follow
    largest-remainder rounding of size * ratio, so every bin's burden range
    feeds every subset wherever quotas permit.
    """
    if len(ratios) != len(SUBSETS) or any(
            not (math.isfinite(r) and r > 0) for r in ratios):
        raise InvalidRatiosError(f"ratios must be {len(SUBSETS)} positive values")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidRatiosError("ratios must sum to 1")
    if not (isinstance(n_bins, int) and n_bins >= 1):
        raise InvalidParameterError("n_bins must be an integer >= 1")
    if not burdens:
        raise EmptyCohortError("no patients to split")

    seen: set[str] = set()
    by_cohort: dict[str, list[PatientBurden]] = defaultdict(list)
    for b in burdens:
        if b.patient_id in seen:
            raise DuplicateCaseError(f"patient {b.patient_id!r} listed twice")
        seen.add(b.patient_id)
        by_cohort[b.cohort_id].append(b)

    assignment: dict[str, str] = {}
    for cohort_id in sorted(by_cohort):
        patients = sorted(by_cohort[cohort_id],
                          key=lambda b: (b.total_scar_px, b.patient_id))
        rng = _cohort_rng(seed, cohort_id)
        ordered: list[PatientBurden] = []
        for chunk in np.array_split(np.arange(len(patients)), min(n_bins, len(patients))):
            idx = chunk.copy()
            rng.shuffle(idx)
            ordered.extend(patients[i] for i in idx)
        quotas = _largest_remainder(len(patients), ratios)
        for patient, label in zip(ordered, _spread_labels(quotas)):
            assignment[patient.patient_id] = SUBSETS[label]
    return assignment


@dataclass(frozen=True)
class AggregateRow:
    """Mean and SD per metric for one cohort (or the Total row)."""

    group: str
    n_cases: int
    dsc_mean: float
    dsc_sd: float
    hd_mean: Optional[float]
    hd_sd: Optional[float]
    n_hd: int
    as_mean: float
    as_sd: float
    ps_mean: float
    ps_sd: float


def _mean_sd(values: Sequence[float]) -> tuple[float, float]:
    # fsum keeps the results bit-identical under input permutation.
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    return mean, sd


def _row(group: str, reports: Sequence[MetricReport]) -> AggregateRow:
    dsc_mean, dsc_sd = _mean_sd([r.dsc for r in reports])
    as_mean, as_sd = _mean_sd([r.area_similarity for r in reports])
    ps_mean, ps_sd = _mean_sd([r.perimeter_similarity for r in reports])
    hd_values = [r.hd_mm for r in reports if r.hd_mm is not None]
    if hd_values:
        hd_mean, hd_sd = _mean_sd(hd_values)
    else:
        hd_mean, hd_sd = None, None
    return AggregateRow(group, len(reports), dsc_mean, dsc_sd, hd_mean, hd_sd,
                        len(hd_values), as_mean, as_sd, ps_mean, ps_sd)


def aggregate(reports: Sequence[MetricReport]) -> list[AggregateRow]:
    """Per-cohort mean/SD rows plus a Total row; absent HDs are excluded
    from the HD columns only."""
    if not reports:
        raise EmptyInputError("no reports to aggregate")
    by_cohort: dict[str, list[MetricReport]] = defaultdict(list)
    for r in reports:
        cohort = r.case.cohort_id if r.case is not None else ""
        by_cohort[cohort].append(r)
    rows = [_row(cohort, by_cohort[cohort]) for cohort in sorted(by_cohort)]
    rows.append(_row("Total", list(reports)))
    return rows


def _exact_rank_sum_pvalue(doubled_ranks: list[int], n: int, observed_doubled: int) -> float:
    """Exact two-sided p over all C(N, n) assignments of ranks to sample a.

    Dynamic programming over the doubled mid-ranks counts, for every k, how
    many k-subsets reach each doubled rank sum; this equals full enumeration.
    """
    total = sum(doubled_ranks)
    counts = np.zeros((n + 1, total + 1))
    counts[0, 0] = 1.0
    for r in doubled_ranks:
        for k in range(min(n, len(doubled_ranks)), 0, -1):
            counts[k, r:] += counts[k - 1, : total + 1 - r]
    dist = counts[n]
    n_subsets = dist.sum()
    p_le = dist[: observed_doubled + 1].sum() / n_subsets
    p_ge = dist[observed_doubled:].sum() / n_subsets
    return min(1.0, 2.0 * min(p_le, p_ge))


def _normal_rank_sum_pvalue(ranks: np.ndarray, n: int, observed: float) -> float:
    """Normal approximation with tie and continuity corrections."""
    big_n = ranks.size
    m = big_n - n
    mean = n * (big_n + 1) / 2.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts))
    var = n * m / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if var <= 0:
        return 1.0
    z = max(abs(observed - mean) - 0.5, 0.0) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float],
                      method: str = "auto") -> float:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value with mid-ranks.

    method 'auto' enumerates exactly when min(|a|,|b|) <= 10 and
    |a|+|b| <= 25, and otherwise uses the tie- and continuity-corrected
    normal approximation.
    """
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.size == 0 or xb.size == 0:
        raise EmptySampleError("both samples must be nonempty")
    if not (np.isfinite(xa).all() and np.isfinite(xb).all()):
        raise InvalidParameterError("samples must be finite")
    if method not in ("auto", "exact", "approx"):
        raise InvalidParameterError(f"unknown method {method!r}")

    ranks = rankdata(np.concatenate([xa, xb]), method="average")
    n = xa.size
    observed = float(ranks[:n].sum())
    if method == "auto":
        use_exact = min(n, xb.size) <= EXACT_MIN_SIDE and ranks.size <= EXACT_MAX_TOTAL
        method = "exact" if use_exact else "approx"
    if method == "exact":
        doubled = [round(2.0 * r) for r in ranks]
        return _exact_rank_sum_pvalue(doubled, n, round(2.0 * observed))
    return _normal_rank_sum_pvalue(ranks, n, observed)
