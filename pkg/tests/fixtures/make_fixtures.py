"""Regenerates the bundled 3-case synthetic fixture set.

Run from the repository root:  python3 tests/fixtures/make_fixtures.py
The outputs are committed; this script only exists to document where the
bytes came from and to rebuild them if the layout ever changes.
"""

import json
from pathlib import Path

import numpy as np

from scarbench.io import save_image, save_mask

HERE = Path(__file__).parent


def block(size, r, c, h, w):
    m = np.zeros((size, size), dtype=np.uint8)
    m[r:r + h, c:c + w] = 1
    return m


def synth_image(size, mask):
    yy, xx = np.mgrid[0:size, 0:size]
    base = 0.2 + 0.3 * (xx + yy) / (2 * (size - 1))
    img = np.where(mask == 1, 0.9, base)
    return np.round(img * 255) / 255


def main():
    size = 64
    cases = []

    # Case A: tiny scar, prediction shifted 3 px (the metric-divergence case).
    gt_a = block(size, 30, 30, 3, 3)
    pred_a = block(size, 30, 33, 3, 3)
    cases.append(("pA", "chronic", 0, gt_a, pred_a, (1.5, 1.5, 8.0)))

    # Case B: larger scar, prediction shifted 1 px (good agreement).
    gt_b = block(size, 20, 16, 5, 7)
    pred_b = block(size, 20, 17, 5, 7)
    cases.append(("pB", "chronic", 1, gt_b, pred_b, (1.5, 1.5, 8.0)))

    # Case C: model missed the scar entirely (empty prediction, HD absent).
    gt_c = block(size, 10, 40, 4, 4) | block(size, 44, 12, 3, 5)
    pred_c = np.zeros((size, size), dtype=np.uint8)
    cases.append(("pC", "acute", 0, gt_c, pred_c, (1.0, 1.0, 10.0)))

    manifest = []
    for patient, cohort, slice_index, gt, pred, (sx, sy, th) in cases:
        stem = f"{patient}_{cohort}_{slice_index}"
        save_image(synth_image(size, gt), HERE / f"{stem}_image.pgm")
        save_mask(gt, HERE / f"{stem}_mask.pgm")
        save_mask(pred, HERE / f"{stem}_pred.pgm")
        manifest.append({
            "patient_id": patient,
            "cohort_id": cohort,
            "slice_index": slice_index,
            "image": f"{stem}_image.pgm",
            "mask": f"{stem}_mask.pgm",
            "pred": f"{stem}_pred.pgm",
            "spacing_x_mm": sx,
            "spacing_y_mm": sy,
            "slice_thickness_mm": th,
        })
    (HERE / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(cases)} cases under {HERE}")


if __name__ == "__main__":
    main()
