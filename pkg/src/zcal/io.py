"""Readers and writers for ground truth, predictions and cycle reports.

Ground truth is a single JSON document, predictions are JSON Lines (one image
per line) and reports are CSV with a fixed header. Floats are written with
``repr`` precision in JSON so geometry and probabilities round-trip exactly.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
from pathlib import Path
from typing import Any, Iterable, Sequence

from .data import (
    BoxGeometry,
    CategorySet,
    ClassDistribution,
    CycleRecord,
    DatasetIndex,
    Detection,
    GroundTruthAnnotation,
    GroundTruthBox,
    ImagePrediction,
    normalize_probs,
)
from .errors import FormatError, ValidationError

REPORT_HEADER = ("seed", "cycle", "n_labeled", "scorer", "accumulator", "map")

_BOX_KEYS = ("x_min", "y_min", "x_max", "y_max")


def _box_from_record(record: dict, where: str) -> BoxGeometry:
    try:
        coords = [record[k] for k in _BOX_KEYS]
    except KeyError as exc:
        raise FormatError(f"{where}: missing box field {exc.args[0]!r}") from None
    if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in coords):
        raise FormatError(f"{where}: box coordinates must be numbers, got {coords}")
    try:
        return BoxGeometry(*(float(c) for c in coords))
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def _box_to_record(box: BoxGeometry) -> dict[str, float]:
    return dict(zip(_BOX_KEYS, box.as_tuple()))


# --------------------------------------------------------------------------- ground truth


def parse_ground_truth(doc: Any) -> DatasetIndex:
    """Build a validated DatasetIndex from an already-decoded JSON document."""
    if not isinstance(doc, dict):
        raise FormatError("ground truth: top level must be a JSON object")
    for key in ("categories", "images"):
        if key not in doc:
            raise FormatError(f"ground truth: missing key {key!r}")
    if not isinstance(doc["categories"], list) or not isinstance(doc["images"], list):
        raise FormatError("ground truth: 'categories' and 'images' must be lists")
    categories = CategorySet(tuple(doc["categories"]))
    images = tuple(str(i) for i in doc["images"])
    known = set(images)

    annotations: dict[str, GroundTruthAnnotation] = {}
    for n, rec in enumerate(doc.get("annotations", [])):
        where = f"annotations[{n}]"
        if not isinstance(rec, dict) or "image_id" not in rec:
            raise FormatError(f"{where}: expected an object with 'image_id'")
        image_id = str(rec["image_id"])
        where = f"{where} (image_id {image_id!r})"
        if image_id not in known:
            raise ValidationError(f"{where}: image_id not listed in 'images'")
        if image_id in annotations:
            raise ValidationError(f"{where}: duplicate annotation record")
        boxes = []
        for j, box in enumerate(rec.get("boxes", [])):
            bwhere = f"{where} boxes[{j}]"
            if not isinstance(box, dict):
                raise FormatError(f"{bwhere}: expected an object")
            category = box.get("category")
            if not isinstance(category, int) or isinstance(category, bool):
                raise FormatError(f"{bwhere}: 'category' must be an integer")
            if not 1 <= category <= categories.D:
                raise ValidationError(
                    f"{bwhere}: category index {category} outside [1, {categories.D}]"
                )
            boxes.append(GroundTruthBox(_box_from_record(box, bwhere), category))
        annotations[image_id] = GroundTruthAnnotation(image_id, tuple(boxes))
    return DatasetIndex(categories, images, annotations)


def load_ground_truth(path: str | os.PathLike) -> DatasetIndex:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return parse_ground_truth(doc)
    except (FormatError, ValidationError) as exc:
        raise type(exc)(f"{path}: {exc}") from None


def ground_truth_document(index: DatasetIndex, image_ids: Sequence[str] | None = None) -> dict:
    ids = list(index.images if image_ids is None else image_ids)
    return {
        "categories": list(index.categories.names),
        "images": ids,
        "annotations": [
            {
                "image_id": i,
                "boxes": [
                    {**_box_to_record(b.geometry), "category": b.category}
                    for b in index.annotation(i).boxes
                ],
            }
            for i in ids
            if i in index.annotations
        ],
    }


def write_ground_truth(index: DatasetIndex, path: str | os.PathLike, image_ids: Sequence[str] | None = None) -> None:
    """Write ``index`` (optionally restricted to ``image_ids``) as ground-truth JSON."""
    doc = ground_truth_document(index, image_ids)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------- predictions


def parse_prediction_record(rec: Any, index: DatasetIndex, where: str) -> ImagePrediction:
    if not isinstance(rec, dict) or "image_id" not in rec:
        raise FormatError(f"{where}: expected an object with 'image_id'")
    image_id = str(rec["image_id"])
    where = f"{where} (image_id {image_id!r})"
    if image_id not in index.image_set:
        raise ValidationError(f"{where}: unknown image_id")
    D = index.categories.D
    detections = []
    for j, det in enumerate(rec.get("detections", [])):
        dwhere = f"{where} detections[{j}]"
        if not isinstance(det, dict):
            raise FormatError(f"{dwhere}: expected an object")
        probs = det.get("probs")
        if not isinstance(probs, list):
            raise FormatError(f"{dwhere}: 'probs' must be a list")
        if len(probs) != D:
            raise ValidationError(f"{dwhere}: probability vector has length {len(probs)}, expected D={D}")
        try:
            dist = ClassDistribution(normalize_probs(probs))
        except (ValidationError, TypeError, ValueError) as exc:
            raise ValidationError(f"{dwhere}: {exc}") from None
        detections.append(Detection(_box_from_record(det, dwhere), dist))
    return ImagePrediction(image_id, tuple(detections))


def load_predictions(path: str | os.PathLike, index: DatasetIndex) -> list[ImagePrediction]:
    """Read a JSON Lines prediction file; blank lines are ignored."""
    preds: list[ImagePrediction] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path}: line {lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{where}: {exc.msg}") from None
            pred = parse_prediction_record(rec, index, where)
            if pred.image_id in seen:
                raise ValidationError(f"{where}: duplicate record for image_id {pred.image_id!r}")
            seen.add(pred.image_id)
            preds.append(pred)
    return preds


def prediction_record(pred: ImagePrediction) -> dict:
    return {
        "image_id": pred.image_id,
        "detections": [
            {**_box_to_record(d.geometry), "probs": list(d.distribution.probs)}
            for d in pred.detections
        ],
    }


def write_predictions(preds: Iterable[ImagePrediction], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pred in preds:
            fh.write(json.dumps(prediction_record(pred), separators=(",", ":")) + "\n")


# --------------------------------------------------------------------------- reports


def format_float(value: float) -> str:
    return f"{value:.6f}"


def _sort_key(rec: CycleRecord):
    return (rec.seed, rec.cycle, rec.scorer, rec.accumulator)


def report_text(records: Sequence[CycleRecord]) -> str:
    if not records:
        raise ValueError("cannot write an empty report")
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for rec in sorted(records, key=_sort_key):
        writer.writerow(
            [rec.seed, rec.cycle, rec.n_labeled, rec.scorer, rec.accumulator, format_float(rec.map)]
        )
    return buf.getvalue()


def write_report(records: Sequence[CycleRecord], path: str | os.PathLike) -> None:
    """Write cycle records as CSV sorted by (seed, cycle); output is byte-deterministic."""
    text = report_text(records)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_report(path: str | os.PathLike) -> list[dict]:
    """Read a report CSV back into typed row dictionaries."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != REPORT_HEADER:
            raise FormatError(f"{path}: header must be {','.join(REPORT_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(REPORT_HEADER):
                raise FormatError(f"{path}: line {lineno}: expected {len(REPORT_HEADER)} fields")
            try:
                rows.append(
                    {
                        "seed": int(row[0]),
                        "cycle": int(row[1]),
                        "n_labeled": int(row[2]),
                        "scorer": row[3],
                        "accumulator": row[4],
                        "map": float(row[5]),
                    }
                )
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
    return rows
