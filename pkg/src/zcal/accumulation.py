"""Turn per-box scores into per-image scores and rank the unlabeled pool."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .data import ImagePrediction
from .errors import DomainError, ValidationError
from .scoring import ScorerKind, image_rng, score_boxes

DEFAULT_CONFIDENCE_THRESHOLD = 0.05


class AccumulatorKind(str, Enum):
    MEAN = "mean"
    SUM = "sum"
    MAX = "max"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ImageScore:
    image_id: str
    value: float
    n_boxes: int


@dataclass(frozen=True)
class RankedPool:
    entries: tuple[ImageScore, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def ids(self) -> list[str]:
        return [e.image_id for e in self.entries]


def accumulate(scores: Sequence[float] | np.ndarray, kind: AccumulatorKind | str) -> float:
    """Reduce box scores to one image score; an empty list gives 0.0."""
    kind = AccumulatorKind(kind)
    values = [float(v) for v in scores]
    if not values:
        return 0.0
    if kind is AccumulatorKind.MAX:
        return max(values)
    total = math.fsum(values)
    if kind is AccumulatorKind.SUM:
        return total
    # rounding of fsum/M can step one ulp outside [min, max]
    return min(max(total / len(values), min(values)), max(values))


def score_pool(
    preds: Iterable[ImagePrediction],
    scorer: ScorerKind | str,
    accumulator: AccumulatorKind | str,
    seed: int = 0,
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD,
    empty_image_score: float = 0.0,
) -> list[ImageScore]:
    """Score every image of the pool.

    Detections below ``confidence_threshold`` are dropped before scoring, so
    ``n_boxes`` and the mean's divisor count surviving boxes only. Images left
    without boxes get ``empty_image_score``.

    The random scorer is passive selection: each image receives one uniform
    draw from a generator keyed on (seed, image_id), independent of its
    detections and of the accumulator.
    """
    scorer = ScorerKind(scorer)
    accumulator = AccumulatorKind(accumulator)
    out = []
    for pred in preds:
        kept = pred.filtered(confidence_threshold)
        if scorer is ScorerKind.RANDOM:
            value = float(image_rng(seed, pred.image_id).random())
        elif kept.M == 0:
            value = float(empty_image_score)
        else:
            value = accumulate(score_boxes(kept, scorer), accumulator)
        out.append(ImageScore(pred.image_id, value, kept.M))
    return out


def rank(scores: Iterable[ImageScore]) -> RankedPool:
    """Order by descending value, ties by ascending image_id."""
    scores = list(scores)
    seen: set[str] = set()
    for s in scores:
        if s.image_id in seen:
            raise ValidationError(f"duplicate image_id {s.image_id!r} in pool scores")
        if math.isnan(s.value):
            raise ValidationError(f"image_id {s.image_id!r} has a NaN score")
        seen.add(s.image_id)
    return RankedPool(tuple(sorted(scores, key=lambda s: (-s.value, s.image_id))))


def select_top(pool: RankedPool, L: int) -> list[str]:
    """The first ``min(L, len(pool))`` image ids; an empty pool yields an empty list."""
    if L < 1:
        raise DomainError(f"selection size must be >= 1, got {L}")
    return [e.image_id for e in pool.entries[:L]]
