"""VOC-style detection evaluation: IoU, greedy matching, AP and mAP.

Detections are ranked by confidence (the maximum class probability) and
assigned to the argmax class. Within each image a detection claims the
still-unmatched ground-truth box of its class with the highest IoU, provided
that IoU reaches the threshold; everything else is a false positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .data import BoxGeometry, DatasetIndex, ImagePrediction
from .errors import DomainError

ALL_POINTS = "all-points"
ELEVEN_POINT = "11-point"
INTERPOLATIONS = (ALL_POINTS, ELEVEN_POINT)


@dataclass(frozen=True)
class MatchResult:
    """Per-detection outcome for one class; arrays share the detection order."""

    tp: np.ndarray
    confidence: np.ndarray
    n_gt: int
    matched: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_tp(self) -> int:
        return int(self.tp.sum())

    @property
    def n_fp(self) -> int:
        return int(self.tp.shape[0] - self.tp.sum())


@dataclass(frozen=True)
class ClassEval:
    category: int
    name: str
    n_gt: int
    n_det: int
    ap: float | None


@dataclass(frozen=True)
class EvalResult:
    per_class: tuple[ClassEval, ...]
    map: float


def iou(a: BoxGeometry, b: BoxGeometry) -> float:
    return float(kernels.iou_matrix([a.as_tuple()], [b.as_tuple()])[0, 0])


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold <= 1.0:
        raise DomainError(f"IoU threshold must lie in (0, 1], got {threshold}")


def match_detections(
    dets: Sequence[tuple[BoxGeometry, float]],
    gts: Sequence[BoxGeometry],
    threshold: float = 0.5,
) -> MatchResult:
    """Greedy matching of one image's detections of a single class."""
    _check_threshold(threshold)
    conf = np.array([c for _, c in dets], dtype=np.float64)
    det_boxes = np.array([b.as_tuple() for b, _ in dets], dtype=np.float64).reshape(-1, 4)
    gt_boxes = np.array([g.as_tuple() for g in gts], dtype=np.float64).reshape(-1, 4)
    tp, matched = kernels.greedy_match(
        np.zeros(len(dets), dtype=np.int64),
        det_boxes,
        conf,
        np.zeros(len(gts), dtype=np.int64),
        gt_boxes,
        threshold,
    )
    return MatchResult(tp=tp, confidence=conf, n_gt=len(gts), matched=matched)


def average_precision(matches: MatchResult, interpolation: str = ALL_POINTS) -> float | None:
    """Area under the precision envelope; None when the class has no ground truth."""
    if interpolation not in INTERPOLATIONS:
        raise DomainError(f"unknown interpolation {interpolation!r}")
    if matches.n_gt == 0:
        return None
    return float(
        kernels.average_precision(
            matches.confidence, matches.tp, matches.n_gt, interpolation == ELEVEN_POINT
        )
    )


def mean_ap(per_class: Iterable[tuple[int, float | None]]) -> float:
    """Unweighted mean over classes with an AP (classes without ground truth pass None)."""
    aps = [ap for _, ap in per_class if ap is not None]
    if not aps:
        raise DomainError("no class has ground truth in the evaluation split")
    return math.fsum(aps) / len(aps)


def match_dataset(
    index: DatasetIndex,
    preds: Iterable[ImagePrediction] | Mapping[str, ImagePrediction],
    iou_threshold: float = 0.5,
) -> dict[int, MatchResult]:
    """Match every class over all images of ``index`` in one kernel call per class."""
    _check_threshold(iou_threshold)
    if not isinstance(preds, Mapping):
        preds = {p.image_id: p for p in preds}
    D = index.categories.D
    det_group: list[list[int]] = [[] for _ in range(D)]
    det_box: list[list[tuple]] = [[] for _ in range(D)]
    det_conf: list[list[float]] = [[] for _ in range(D)]
    gt_group: list[list[int]] = [[] for _ in range(D)]
    gt_box: list[list[tuple]] = [[] for _ in range(D)]

    for pos, image_id in enumerate(index.images):
        for box in index.annotation(image_id).boxes:
            gt_group[box.category - 1].append(pos)
            gt_box[box.category - 1].append(box.geometry.as_tuple())
        pred = preds.get(image_id)
        if pred is None:
            continue
        for det in pred.detections:
            c = det.predicted_category - 1
            det_group[c].append(pos)
            det_box[c].append(det.geometry.as_tuple())
            det_conf[c].append(det.confidence)

    results = {}
    for c in range(D):
        conf = np.array(det_conf[c], dtype=np.float64)
        tp, matched = kernels.greedy_match(
            np.array(det_group[c], dtype=np.int64),
            np.array(det_box[c], dtype=np.float64).reshape(-1, 4),
            conf,
            np.array(gt_group[c], dtype=np.int64),
            np.array(gt_box[c], dtype=np.float64).reshape(-1, 4),
            iou_threshold,
        )
        results[c + 1] = MatchResult(tp=tp, confidence=conf, n_gt=len(gt_group[c]), matched=matched)
    return results


def evaluate(
    index: DatasetIndex,
    preds: Iterable[ImagePrediction] | Mapping[str, ImagePrediction],
    iou_threshold: float = 0.5,
    interpolation: str = ALL_POINTS,
) -> EvalResult:
    """Per-class AP and mAP of ``preds`` against the ground truth in ``index``."""
    matches = match_dataset(index, preds, iou_threshold)
    per_class = []
    for category, m in matches.items():
        ap = average_precision(m, interpolation)
        per_class.append(ClassEval(category, index.categories.name(category), m.n_gt, len(m.tp), ap))
    return EvalResult(tuple(per_class), mean_ap((c.category, c.ap) for c in per_class))
