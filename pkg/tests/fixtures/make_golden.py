"""Regenerate eval_golden.json from first principles (no diamark imports).

Distances, line-angle gaps and summary numbers are computed here by hand so
the golden file is an independent check of the evaluator.
"""

import csv
import json
import math
from pathlib import Path

HERE = Path(__file__).parent


def gap(a):
    a = math.fmod(a, 180.0)
    a = a + 180.0 if a < 0 else a
    return min(a, 180.0 - a)


def rows(name):
    with open(HERE / name, newline="") as fh:
        return [r for r in csv.reader(fh) if r and not r[0].startswith("#")][1:]


truth = [(int(r[0]), float(r[1]), float(r[2]), float(r[5])) for r in rows("eval_truth.csv")]
dets = [(float(r[2]), float(r[3]), float(r[4])) for r in rows("eval_detections.csv")]

# every admissible pair here is unambiguous: each truth has at most one detection within 3 px
markers, used = [], set()
for mid, tx, ty, tth in truth:
    near = [(math.hypot(dx - tx, dy - ty), i) for i, (dx, dy, _) in enumerate(dets)
            if math.hypot(dx - tx, dy - ty) <= 3.0]
    if near:
        d, i = min(near)
        used.add(i)
        markers.append({"marker_id": mid, "matched": True, "error_px": round(d, 6),
                        "theta_error_deg": round(abs(gap(dets[i][2]) - gap(tth)), 6)})
    else:
        markers.append({"marker_id": mid, "matched": False, "error_px": None, "theta_error_deg": None})
errs = [m["error_px"] for m in markers if m["matched"]]
report = {
    "markers": markers,
    "false_positives": len(dets) - len(used),
    "false_negatives": sum(not m["matched"] for m in markers),
    "mean_error_px": round(sum(errs) / len(errs), 6),
    "max_error_px": round(max(errs), 6),
    "frac_within_0_1px": round(sum(e <= 0.1 for e in errs) / len(truth), 6),
}
(HERE / "eval_golden.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
