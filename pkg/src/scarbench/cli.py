"""Batch front door: manifest-driven subcommands with deterministic outputs.

Exit codes: 0 success, 1 internal error, 2 bad arguments or missing file,
3 manifest validation failure, 4 all cases failed. Per-case recoverable
problems (a missing prediction, an empty mask for HD) are recorded in the
CSV and the run report instead of aborting the run. All files are written
atomically (temp file + rename) with UTF-8 text, LF line endings, and floats
rendered to 6 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from .augment import AugmentSpec, apply_augmentations, default_augment_spec
from .cohort import PatientBurden, aggregate, stratified_split
from .errors import (
    DuplicateCaseError,
    FileMissingError,
    InvalidGeometryError,
    ParseError,
    ScarbenchError,
)
from .fwhm import fwhm_segment
from .io import _atomic_write_bytes, load_image, load_manifest, load_mask, load_scores, save_mask, save_image
from .losses import LossConfig, grad_combined_loss, loss_terms, max_relative_gradient_error, numerical_gradient
from .metrics import evaluate_pair
from .morphology import MYOCARDIUM_DENSITY_G_PER_ML, feature_vector
from .records import CaseRecord

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MANIFEST = 3
EXIT_ALL_FAILED = 4

GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_CONFIG_WEIGHTS = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0),
                            (0.2, 0.2, 0.6))


def fmt(value) -> str:
    """CSV cell formatting: 6 significant digits for floats, '' for absent."""
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(cell) for cell in row) for row in rows)
    _write_text(path, "\n".join(lines) + "\n")


@dataclass
class RunReport:
    """Machine-readable run summary, printed as JSON on stdout."""

    subcommand: str
    seed: int
    n_cases_processed: int = 0
    n_cases_skipped: int = 0
    skip_reasons: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    wall_time_s: float = 0.0

    def skip(self, reason: str) -> None:
        self.n_cases_skipped += 1
        self.skip_reasons[reason] = self.skip_reasons.get(reason, 0) + 1

    def emit(self) -> None:
        payload = {
            "subcommand": self.subcommand,
            "seed": self.seed,
            "n_cases_processed": self.n_cases_processed,
            "n_cases_skipped": self.n_cases_skipped,
            "skip_reasons": self.skip_reasons,
            "outputs": [str(p) for p in self.outputs],
            "wall_time_s": round(self.wall_time_s, 3),
        }
        print(json.dumps(payload, indent=2, sort_keys=True))


def _resolve_workers(args) -> int:
    if getattr(args, "workers", None):
        return max(1, args.workers)
    env = os.environ.get("SCARBENCH_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    """Apply fn to items, preserving input order regardless of scheduling."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _log_case(sub: str, rec: CaseRecord, status: str) -> None:
    print(f"[{sub}] {rec.patient_id}/{rec.cohort_id}/slice{rec.slice_index}: {status}",
          file=sys.stderr)


PER_CASE_HEADER = ("patient_id", "cohort_id", "slice_index", "status", "dsc",
                   "hd_mm", "area_similarity", "perimeter_similarity")
AGGREGATE_HEADER = ("group", "n_cases", "dsc_mean", "dsc_sd", "hd_mean", "hd_sd",
                    "n_hd", "as_mean", "as_sd", "ps_mean", "ps_sd")


def _cmd_evaluate(args, report: RunReport) -> int:
    records = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)

    def work(rec: CaseRecord):
        if rec.pred_path is None:
            return ("no_pred", None)
        try:
            gt = load_mask(rec.mask_path)
            pred = load_mask(rec.pred_path)
            return ("ok", evaluate_pair(pred, gt, rec.geometry, case=rec))
        except ScarbenchError as exc:
            return (type(exc).__name__, None)

    results = _parallel_map(work, records, _resolve_workers(args))
    rows = []
    ok_reports = []
    for rec, (status, metric) in zip(records, results):
        _log_case("evaluate", rec, status)
        if metric is None:
            report.skip(status)
            rows.append((rec.patient_id, rec.cohort_id, rec.slice_index, status,
                         None, None, None, None))
        else:
            report.n_cases_processed += 1
            ok_reports.append(metric)
            rows.append((rec.patient_id, rec.cohort_id, rec.slice_index, "ok",
                         metric.dsc, metric.hd_mm, metric.area_similarity,
                         metric.perimeter_similarity))

    per_case_path = out_dir / "per_case.csv"
    _write_csv(per_case_path, PER_CASE_HEADER, rows)
    agg_rows = []
    if ok_reports:
        for row in aggregate(ok_reports):
            agg_rows.append((row.group, row.n_cases, row.dsc_mean, row.dsc_sd,
                             row.hd_mean, row.hd_sd, row.n_hd, row.as_mean,
                             row.as_sd, row.ps_mean, row.ps_sd))
    aggregate_path = out_dir / "aggregate.csv"
    _write_csv(aggregate_path, AGGREGATE_HEADER, agg_rows)
    report.outputs += [per_case_path, aggregate_path]
    if records and not ok_reports:
        return EXIT_ALL_FAILED
    return EXIT_OK


FEATURES_HEADER = ("patient_id", "cohort_id", "slice_index", "scar_size_px",
                   "scar_area_mm2", "n_components", "solidity", "circularity",
                   "perimeter_mm")
PATIENT_FEATURES_HEADER = ("patient_id", "cohort_id", "n_slices", "scar_size_px",
                           "scar_area_mm2", "n_components", "solidity",
                           "circularity", "perimeter_mm", "scar_mass_g")


def _cmd_features(args, report: RunReport) -> int:
    records = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)

    def work(rec: CaseRecord):
        path = rec.mask_path if args.source == "mask" else rec.pred_path
        if path is None:
            return ("no_pred", None)
        try:
            mask = load_mask(path)
            return ("ok", feature_vector(mask, rec.geometry, args.connectivity))
        except ScarbenchError as exc:
            return (type(exc).__name__, None)

    results = _parallel_map(work, records, _resolve_workers(args))
    rows = []
    per_patient: dict[tuple, list] = {}
    for rec, (status, fv) in zip(records, results):
        _log_case("features", rec, status)
        if fv is None:
            report.skip(status)
            continue
        report.n_cases_processed += 1
        rows.append((rec.patient_id, rec.cohort_id, rec.slice_index,
                     fv.scar_size_px, fv.scar_area_mm2, fv.n_components,
                     fv.solidity, fv.circularity, fv.perimeter_mm))
        per_patient.setdefault((rec.patient_id, rec.cohort_id), []).append((rec, fv))

    features_path = out_dir / "features.csv"
    _write_csv(features_path, FEATURES_HEADER, rows)

    patient_rows = []
    for (patient, cohort) in sorted(per_patient):
        entries = per_patient[(patient, cohort)]
        size = sum(fv.scar_size_px for _, fv in entries)
        area = sum(fv.scar_area_mm2 for _, fv in entries)
        components = sum(fv.n_components for _, fv in entries)
        perimeter = sum(fv.perimeter_mm for _, fv in entries)
        mass = sum(
            fv.scar_area_mm2 * rec.geometry.slice_thickness
            for rec, fv in entries) / 1000.0 * args.density
        # Shape ratios average over nonempty slices, weighted by scar area.
        weighted = [(fv.scar_area_mm2, fv.solidity, fv.circularity)
                    for _, fv in entries if fv.solidity is not None]
        if weighted:
            wsum = sum(w for w, _, _ in weighted)
            sol = sum(w * s for w, s, _ in weighted) / wsum
            circ = sum(w * c for w, _, c in weighted) / wsum
        else:
            sol, circ = None, None
        patient_rows.append((patient, cohort, len(entries), size, area,
                             components, sol, circ, perimeter, mass))
    patient_path = out_dir / "features_by_patient.csv"
    _write_csv(patient_path, PATIENT_FEATURES_HEADER, patient_rows)
    report.outputs += [features_path, patient_path]
    if records and report.n_cases_processed == 0:
        return EXIT_ALL_FAILED
    return EXIT_OK


def _cmd_split(args, report: RunReport) -> int:
    records = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    burdens: dict[tuple, int] = {}
    for rec in records:
        key = (rec.patient_id, rec.cohort_id)
        burdens[key] = burdens.get(key, 0) + int(load_mask(rec.mask_path).sum())
        report.n_cases_processed += 1
    patient_burdens = [PatientBurden(p, c, n) for (p, c), n in sorted(burdens.items())]
    assignment = stratified_split(patient_burdens, n_bins=args.bins, seed=args.seed)
    split_path = out_dir / "split.json"
    _write_text(split_path, json.dumps(assignment, indent=2, sort_keys=True) + "\n")
    report.outputs.append(split_path)
    return EXIT_OK


LOSS_HEADER = ("patient_id", "cohort_id", "slice_index", "status", "dice_loss",
               "bce_loss", "kl_divergence", "combined_loss")


def _loss_config(args) -> LossConfig:
    fields = {}
    if args.loss_config:
        path = Path(args.loss_config)
        if not path.is_file():
            raise FileMissingError(f"no such file: {path}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        allowed = {"w_dice", "w_ce", "w_kl", "sigma", "eps_dice", "eps_log"}
        bad = set(payload) - allowed
        if bad:
            raise ParseError(f"unknown loss-config keys {sorted(bad)}")
        fields.update(payload)
    if args.weights:
        parts = args.weights.split(",")
        if len(parts) != 3:
            raise ScarbenchError("--weights expects w_dice,w_ce,w_kl")
        fields["w_dice"], fields["w_ce"], fields["w_kl"] = (float(p) for p in parts)
    if args.sigma is not None:
        fields["sigma"] = args.sigma
    return LossConfig(**fields)


def _cmd_loss(args, report: RunReport) -> int:
    config = _loss_config(args)
    records = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)

    def work(rec: CaseRecord):
        if rec.scores_path is None:
            return ("no_scores", None)
        try:
            mask = load_mask(rec.mask_path)
            h, w = mask.shape
            scores = load_scores(rec.scores_path, w, h)
            return ("ok", loss_terms(scores, mask, config))
        except ScarbenchError as exc:
            return (type(exc).__name__, None)

    results = _parallel_map(work, records, _resolve_workers(args))
    rows = []
    for rec, (status, terms) in zip(records, results):
        _log_case("loss", rec, status)
        if terms is None:
            report.skip(status)
            rows.append((rec.patient_id, rec.cohort_id, rec.slice_index, status,
                         None, None, None, None))
        else:
            report.n_cases_processed += 1
            kl = None if np.isnan(terms["kl"]) else terms["kl"]
            rows.append((rec.patient_id, rec.cohort_id, rec.slice_index, "ok",
                         terms["dice"], terms["bce"], kl, terms["total"]))
    loss_path = out_dir / "loss.csv"
    _write_csv(loss_path, LOSS_HEADER, rows)
    report.outputs.append(loss_path)
    if records and report.n_cases_processed == 0:
        return EXIT_ALL_FAILED
    return EXIT_OK


def _cmd_gradcheck(args, report: RunReport) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for weights in GRADCHECK_CONFIG_WEIGHTS:
        config = LossConfig(w_dice=weights[0], w_ce=weights[1], w_kl=weights[2],
                            sigma=args.sigma)
        for _ in range(args.trials):
            scores = rng.normal(0.0, 2.0, (8, 8))
            mask = (rng.random((8, 8)) < 0.3).astype(np.uint8)
            if mask.sum() == 0:
                mask[rng.integers(0, 8), rng.integers(0, 8)] = 1
            analytic = grad_combined_loss(scores, mask, config)
            numeric = numerical_gradient(scores, mask, config, step=1e-3)
            worst = max(worst, max_relative_gradient_error(analytic, numeric))
            report.n_cases_processed += 1
    print(f"gradcheck: {report.n_cases_processed} instances, "
          f"max relative error {worst:.3e} (tolerance {GRADCHECK_TOLERANCE:.0e})",
          file=sys.stderr)
    if worst > GRADCHECK_TOLERANCE:
        print("gradcheck FAILED", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _cmd_fwhm(args, report: RunReport) -> int:
    image = load_image(args.image)
    myocardium = load_mask(args.myocardium)
    core_roi = load_mask(args.roi)
    scar = fwhm_segment(image, myocardium, core_roi, args.threshold_fraction)
    save_mask(scar, args.out)
    report.n_cases_processed = 1
    report.outputs.append(Path(args.out))
    return EXIT_OK


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "-", text) or "x"


BOXES_HEADER = ("patient_id", "cohort_id", "slice_index", "x_min", "y_min",
                "x_max", "y_max")


def _cmd_augment(args, report: RunReport) -> int:
    if args.spec:
        spec_path = Path(args.spec)
        if not spec_path.is_file():
            raise FileMissingError(f"no such file: {spec_path}")
        spec = AugmentSpec.from_json(spec_path.read_text(encoding="utf-8"))
        if args.seed is not None:
            spec = AugmentSpec(steps=spec.steps, seed=args.seed)
    else:
        spec = default_augment_spec(args.seed if args.seed is not None else 0)
    report.seed = spec.seed
    records = load_manifest(args.manifest)
    out_dir = Path(args.out_dir)

    def work(indexed):
        idx, rec = indexed
        try:
            image = load_image(rec.image_path)
            mask = load_mask(rec.mask_path)
            return ("ok", apply_augmentations(image, mask, spec, case_key=idx))
        except ScarbenchError as exc:
            return (type(exc).__name__, None)

    results = _parallel_map(work, list(enumerate(records)), _resolve_workers(args))
    box_rows = []
    for rec, (status, payload) in zip(records, results):
        _log_case("augment", rec, status)
        if payload is None:
            report.skip(status)
            continue
        image, mask, box = payload
        stem = f"{_slug(rec.patient_id)}_{_slug(rec.cohort_id)}_{rec.slice_index:03d}"
        image_path = out_dir / f"{stem}_image.pgm"
        mask_path = out_dir / f"{stem}_mask.pgm"
        save_image(image, image_path)
        save_mask(mask, mask_path)
        report.outputs += [image_path, mask_path]
        if box is not None:
            box_rows.append((rec.patient_id, rec.cohort_id, rec.slice_index,
                             box.x_min, box.y_min, box.x_max, box.y_max))
        report.n_cases_processed += 1
    boxes_path = out_dir / "boxes.csv"
    _write_csv(boxes_path, BOXES_HEADER, box_rows)
    report.outputs.append(boxes_path)
    if records and report.n_cases_processed == 0:
        return EXIT_ALL_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scarbench",
        description="Score, characterize, and prepare myocardial scar segmentations.")
    parser.add_argument("--version", action="version", version=f"scarbench {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, manifest=True):
        if manifest:
            p.add_argument("--manifest", required=True, help="manifest JSON path")
            p.add_argument("--out-dir", required=True, help="output directory")
            p.add_argument("--workers", type=int, default=0,
                           help="worker threads (default: SCARBENCH_WORKERS or CPU count)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")

    p = sub.add_parser("evaluate", help="per-case and aggregate metrics")
    add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("features", help="morphological feature CSVs")
    add_common(p)
    p.add_argument("--source", choices=("mask", "pred"), default="mask",
                   help="which mask to characterize (default mask)")
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--density", type=float, default=MYOCARDIUM_DENSITY_G_PER_ML,
                   help="tissue density in g/mL for scar mass")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("augment", help="write augmented image/mask pairs")
    add_common(p, manifest=True)
    p.add_argument("--spec", help="AugmentSpec JSON path (default: built-in spec)")
    p.set_defaults(func=_cmd_augment, seed=None)

    p = sub.add_parser("split", help="stratified patient-level split JSON")
    add_common(p)
    p.add_argument("--bins", type=int, default=4, help="quantile bins (default 4)")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("loss", help="combined loss terms per case")
    add_common(p)
    p.add_argument("--weights", help="w_dice,w_ce,w_kl (default 0.2,0.2,0.6)")
    p.add_argument("--sigma", type=float, help="soft-label smoothing sigma (default 2)")
    p.add_argument("--loss-config", help="JSON file with LossConfig fields")
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("gradcheck", help="verify analytic gradients numerically")
    add_common(p, manifest=False)
    p.add_argument("--trials", type=int, default=20, help="instances per weight config")
    p.add_argument("--sigma", type=float, default=2.0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("fwhm", help="half-maximum scar labeling for one slice")
    p.add_argument("--image", required=True)
    p.add_argument("--myocardium", required=True)
    p.add_argument("--roi", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_fwhm)

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, dispatch, and map failures to documented exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    report = RunReport(subcommand=args.subcommand, seed=getattr(args, "seed", 0) or 0)
    start = time.perf_counter()
    try:
        code = args.func(args, report)
    except (ParseError, InvalidGeometryError, DuplicateCaseError) as exc:
        print(f"error: manifest validation failed: {exc}", file=sys.stderr)
        return EXIT_MANIFEST
    except FileMissingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScarbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    report.wall_time_s = time.perf_counter() - start
    report.emit()
    return code


def main() -> None:
    raise SystemExit(run())
