"""Pure numpy implementations of the numeric kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``ZCAL_PURE_PYTHON=1`` is set. Signatures match ``_ckernels.pyx`` exactly.
"""

from __future__ import annotations

import numpy as np

MARGIN = 0
VARIANCE = 1
ENTROPY = 2


def box_scores(probs: np.ndarray, kind: int) -> np.ndarray:
    """Uncertainty score of every row of an ``(M, D)`` probability matrix."""
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    M, D = probs.shape
    if M == 0:
        return np.zeros(0, dtype=np.float64)
    if kind == MARGIN:
        top2 = np.sort(probs, axis=1)[:, -2:]
        return 1.0 - (top2[:, 1] - top2[:, 0])
    if kind == VARIANCE:
        mean = probs.sum(axis=1, keepdims=True) / D
        return 1.0 - ((probs - mean) ** 2).sum(axis=1) / (D - 1)
    if kind == ENTROPY:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(probs > 0.0, probs * np.log2(probs), 0.0)
        out = -terms.sum(axis=1) / np.log2(D)
        return np.clip(out, 0.0, 1.0)
    raise ValueError(f"unknown score kind {kind}")


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def greedy_match(det_group, det_boxes, det_conf, gt_group, gt_boxes, threshold):
    """Confidence-ordered greedy matching, independently per group (image).

    Returns ``(tp, matched)`` aligned with the input detection order: ``tp`` is
    int8 (1 = true positive) and ``matched`` the claimed ground-truth index or -1.
    """
    det_group = np.asarray(det_group, dtype=np.int64)
    det_boxes = np.asarray(det_boxes, dtype=np.float64).reshape(-1, 4)
    det_conf = np.asarray(det_conf, dtype=np.float64)
    gt_group = np.asarray(gt_group, dtype=np.int64)
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    n = det_conf.shape[0]
    tp = np.zeros(n, dtype=np.int8)
    matched = np.full(n, -1, dtype=np.int64)
    if n == 0 or gt_group.shape[0] == 0:
        return tp, matched

    by_group: dict[int, np.ndarray] = {}
    for g in np.unique(gt_group):
        by_group[int(g)] = np.flatnonzero(gt_group == g)
    taken = np.zeros(gt_group.shape[0], dtype=bool)

    for i in np.argsort(-det_conf, kind="stable"):
        cand = by_group.get(int(det_group[i]))
        if cand is None:
            continue
        ious = iou_matrix(det_boxes[i : i + 1], gt_boxes[cand])[0]
        ious[taken[cand]] = -1.0
        best = int(np.argmax(ious))
        if ious[best] >= threshold:
            g = cand[best]
            taken[g] = True
            tp[i] = 1
            matched[i] = g
    return tp, matched


def average_precision(conf, tp, n_gt: int, use_07_metric: bool = False) -> float:
    """AP of a ranked detection list; NaN when there is no ground truth."""
    if n_gt <= 0:
        return float("nan")
    conf = np.asarray(conf, dtype=np.float64)
    tp = np.asarray(tp, dtype=np.float64)
    if conf.shape[0] == 0:
        return 0.0
    order = np.argsort(-conf, kind="stable")
    tp = tp[order]
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    prec = ctp / (ctp + cfp)
    rec = ctp / n_gt
    if use_07_metric:
        total = 0.0
        for k in range(11):
            mask = rec >= k / 10.0
            total += float(prec[mask].max()) if mask.any() else 0.0
        return total / 11.0
    envelope = np.maximum.accumulate(prec[::-1])[::-1]
    return float(envelope[tp > 0].sum()) / n_gt
