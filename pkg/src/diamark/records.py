"""Detection record files (CSV + JSON) and atomic writes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .pipeline import DetectionResult

CSV_VERSION_LINE = "# diamark v1"
CSV_COLUMNS = ["image_id", "marker_index", "x", "y", "theta", "peak_corr"]


class RecordFormatError(ValueError):
    pass


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    marker_index: int
    x: float
    y: float
    theta: float
    peak_corr: float


def records_from_result(image_id: str, res: DetectionResult) -> list[DetectionRecord]:
    return [DetectionRecord(image_id, i, d.x, d.y, d.theta, d.peak_corr)
            for i, d in enumerate(res.detections)]


def atomic_write(path, data: str | bytes) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    p = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", dir=p.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def records_to_csv(records: list[DetectionRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_VERSION_LINE + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([r.image_id, r.marker_index, f"{r.x:.6f}", f"{r.y:.6f}",
                    f"{r.theta:.6f}", f"{r.peak_corr:.6f}"])
    return buf.getvalue()


def read_records_csv(path) -> list[DetectionRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != CSV_VERSION_LINE:
        raise RecordFormatError(f"{path}: missing '{CSV_VERSION_LINE}' header line")
    rows = list(csv.reader(lines[1:]))
    if not rows or rows[0] != CSV_COLUMNS:
        raise RecordFormatError(f"{path}: columns must be {','.join(CSV_COLUMNS)}")
    out = []
    for n, row in enumerate(rows[1:], start=3):
        if len(row) != len(CSV_COLUMNS):
            raise RecordFormatError(f"{path}:{n}: expected {len(CSV_COLUMNS)} fields")
        try:
            out.append(DetectionRecord(row[0], int(row[1]), float(row[2]), float(row[3]),
                                       float(row[4]), float(row[5])))
        except ValueError as exc:
            raise RecordFormatError(f"{path}:{n}: {exc}") from None
    return out


def result_to_json(image_id: str, res: DetectionResult, verbose: bool = False) -> str:
    """Deterministic JSON for one image (timings live in a separate file)."""
    doc = {
        "format": "diamark v1",
        "image_id": image_id,
        "candidates": res.candidates,
        "detections": [
            {"marker_index": i, "x": round(d.x, 6), "y": round(d.y, 6), "theta": round(d.theta, 6),
             "peak_corr": round(d.peak_corr, 6), "orient": d.orient, "sigma_b": round(d.sigma_b, 6),
             "coarse": list(d.coarse)}
            for i, d in enumerate(res.detections)
        ],
        "rejection_counts": res.rejection_counts(),
    }
    if verbose:
        doc["rejections"] = [{"x": round(r.x, 6), "y": round(r.y, 6), "stage": r.stage, "reason": r.reason}
                             for r in res.rejections]
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def timings_to_json(image_id: str, res: DetectionResult) -> str:
    return json.dumps({"image_id": image_id, "timings_ms": {k: round(v, 3) for k, v in res.timings_ms.items()}},
                      indent=2, sort_keys=True) + "\n"
