"""Domain types shared across the pipeline.

All types are frozen dataclasses; once loaded they are safe to share between
threads or processes. Category indices are 1-based everywhere, matching the
ground-truth file format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError

#: Largest deviation of a probability sum from 1 that is silently repaired.
PROB_SUM_TOLERANCE = 1e-6
# Deviations below this are float rounding; leaving them alone keeps normalization idempotent.
_RENORMALIZE_ABOVE = 1e-12


def normalize_probs(values: Iterable[float], tolerance: float = PROB_SUM_TOLERANCE) -> tuple[float, ...]:
    """Validate a probability vector and renormalize it onto the simplex.

    Raises ValidationError for non-finite or negative entries and for sums that
    deviate from 1 by more than ``tolerance``.
    """
    probs = tuple(float(v) for v in values)
    if not probs:
        raise ValidationError("probability vector is empty")
    for v in probs:
        if not math.isfinite(v) or v < 0.0:
            raise ValidationError(f"probability entries must be finite and non-negative, got {v!r}")
    total = math.fsum(probs)
    if abs(total - 1.0) > tolerance:
        raise ValidationError(f"probabilities sum to {total!r}, outside 1 +/- {tolerance:g}")
    if abs(total - 1.0) > _RENORMALIZE_ABOVE:
        probs = tuple(v / total for v in probs)
    return tuple(min(v, 1.0) for v in probs)


@dataclass(frozen=True)
class CategorySet:
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        if not self.names:
            raise ValidationError("category set must contain at least one category")
        if len(set(self.names)) != len(self.names):
            raise ValidationError(f"category names are not unique: {list(self.names)}")

    @property
    def D(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def name(self, category: int) -> str:
        """Name of a 1-based category index."""
        return self.names[category - 1]


@dataclass(frozen=True)
class BoxGeometry:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValidationError(f"box coordinates must be finite: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(f"degenerate box: {coords}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class ClassDistribution:
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if not probs:
            raise ValidationError("class distribution is empty")
        if any(not (0.0 <= p <= 1.0) for p in probs):
            raise ValidationError(f"probabilities must lie in [0, 1]: {probs}")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_SUM_TOLERANCE:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "ClassDistribution":
        """Build a distribution, renormalizing sums within tolerance."""
        return cls(normalize_probs(values))

    @property
    def D(self) -> int:
        return len(self.probs)

    @property
    def confidence(self) -> float:
        return max(self.probs)

    @property
    def predicted_category(self) -> int:
        """1-based argmax; ties resolve to the lowest index."""
        return self.probs.index(max(self.probs)) + 1


@dataclass(frozen=True)
class Detection:
    geometry: BoxGeometry
    distribution: ClassDistribution

    @property
    def confidence(self) -> float:
        return self.distribution.confidence

    @property
    def predicted_category(self) -> int:
        return self.distribution.predicted_category


@dataclass(frozen=True)
class ImagePrediction:
    image_id: str
    detections: tuple[Detection, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "detections", tuple(self.detections))

    @property
    def M(self) -> int:
        return len(self.detections)

    def prob_matrix(self, D: int | None = None) -> np.ndarray:
        """Stack the class distributions into an ``(M, D)`` float64 array."""
        if not self.detections:
            return np.zeros((0, D or 0), dtype=np.float64)
        return np.array([d.distribution.probs for d in self.detections], dtype=np.float64)

    def box_matrix(self) -> np.ndarray:
        if not self.detections:
            return np.zeros((0, 4), dtype=np.float64)
        return np.array([d.geometry.as_tuple() for d in self.detections], dtype=np.float64)

    def filtered(self, min_confidence: float) -> "ImagePrediction":
        """Drop detections whose confidence is below ``min_confidence``."""
        kept = tuple(d for d in self.detections if d.confidence >= min_confidence)
        if len(kept) == len(self.detections):
            return self
        return ImagePrediction(self.image_id, kept)


@dataclass(frozen=True)
class GroundTruthBox:
    geometry: BoxGeometry
    category: int


@dataclass(frozen=True)
class GroundTruthAnnotation:
    image_id: str
    boxes: tuple[GroundTruthBox, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", tuple(self.boxes))

    def category_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for box in self.boxes:
            counts[box.category] = counts.get(box.category, 0) + 1
        return counts


@dataclass(frozen=True)
class DatasetIndex:
    categories: CategorySet
    images: tuple[str, ...]
    annotations: Mapping[str, GroundTruthAnnotation] = field(default_factory=dict)

    def __post_init__(self) -> None:
        images = tuple(str(i) for i in self.images)
        object.__setattr__(self, "images", images)
        seen: set[str] = set()
        for image_id in images:
            if image_id in seen:
                raise ValidationError(f"duplicate image_id {image_id!r}")
            seen.add(image_id)
        annotations = dict(self.annotations)
        D = self.categories.D
        for image_id, ann in annotations.items():
            if image_id not in seen:
                raise ValidationError(f"annotation for unknown image_id {image_id!r}")
            if ann.image_id != image_id:
                raise ValidationError(f"annotation keyed {image_id!r} belongs to {ann.image_id!r}")
            for box in ann.boxes:
                if not 1 <= box.category <= D:
                    raise ValidationError(
                        f"image_id {image_id!r}: category index {box.category} outside [1, {D}]"
                    )
        object.__setattr__(self, "annotations", annotations)

    def annotation(self, image_id: str) -> GroundTruthAnnotation:
        """Ground truth for an image; images without an entry have no objects."""
        ann = self.annotations.get(image_id)
        if ann is None:
            if image_id not in self.image_set:
                raise ValidationError(f"unknown image_id {image_id!r}")
            return GroundTruthAnnotation(image_id, ())
        return ann

    @property
    def image_set(self) -> frozenset[str]:
        cached = self.__dict__.get("_image_set")
        if cached is None:
            cached = frozenset(self.images)
            object.__setattr__(self, "_image_set", cached)
        return cached

    def subset(self, image_ids: Sequence[str]) -> "DatasetIndex":
        """A new index restricted to ``image_ids`` (kept in the given order)."""
        return DatasetIndex(
            self.categories,
            tuple(image_ids),
            {i: self.annotations[i] for i in image_ids if i in self.annotations},
        )

    def object_count(self, image_id: str) -> int:
        return len(self.annotation(image_id).boxes)


@dataclass(frozen=True)
class CycleRecord:
    """Outcome of one active-learning cycle for one seed and one method pair."""

    seed: int
    cycle: int
    requested: int
    selected: tuple[str, ...]
    n_labeled: int
    map: float
    scorer: str
    accumulator: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "selected", tuple(self.selected))
        if not 0.0 <= self.map <= 1.0:
            raise ValidationError(f"mAP {self.map!r} outside [0, 1]")
