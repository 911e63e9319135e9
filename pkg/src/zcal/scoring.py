"""Per-box uncertainty scores computed from a single inference pass.

Every deterministic score maps a class distribution to ``[0, 1]`` (variance to
``[1 - 1/D, 1]``) with larger values meaning a less certain detector.
"""

from __future__ import annotations

import hashlib
from enum import Enum
from typing import Sequence, Union

import numpy as np

from . import kernels
from .data import ClassDistribution, ImagePrediction
from .errors import DomainError


class ScorerKind(str, Enum):
    MARGIN = "margin"
    VARIANCE = "variance"
    ENTROPY = "entropy"
    RANDOM = "random"

    def __str__(self) -> str:
        return self.value

    @property
    def deterministic(self) -> bool:
        return self is not ScorerKind.RANDOM


_KERNEL_KIND = {
    ScorerKind.MARGIN: kernels.MARGIN,
    ScorerKind.VARIANCE: kernels.VARIANCE,
    ScorerKind.ENTROPY: kernels.ENTROPY,
}

ProbsLike = Union[ClassDistribution, Sequence[float], np.ndarray]


def _as_row(p: ProbsLike) -> np.ndarray:
    probs = p.probs if isinstance(p, ClassDistribution) else p
    row = np.asarray(probs, dtype=np.float64).reshape(1, -1)
    if row.shape[1] < 2:
        raise DomainError(f"uncertainty scores need D >= 2 categories, got D={row.shape[1]}")
    return row


def margin_score(p: ProbsLike) -> float:
    """One minus the gap between the two most probable classes.

    Tied maxima give a score of exactly 1.
    """
    return float(kernels.box_scores(_as_row(p), kernels.MARGIN)[0])


def variance_score(p: ProbsLike) -> float:
    """One minus the sample variance (divisor ``D - 1``) of the class probabilities."""
    return float(kernels.box_scores(_as_row(p), kernels.VARIANCE)[0])


def entropy_score(p: ProbsLike) -> float:
    """Shannon entropy normalized by ``log2(D)``, using ``0 * log 0 = 0``."""
    return float(kernels.box_scores(_as_row(p), kernels.ENTROPY)[0])


def random_score(rng: np.random.Generator) -> float:
    return float(rng.random())


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def image_rng(seed: int, image_id: str) -> np.random.Generator:
    """Generator derived from (experiment seed, image_id), independent of call order."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, _stable_hash(image_id)])


def score_boxes(
    pred: ImagePrediction,
    kind: ScorerKind | str,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Score every detection of one image; returns an array of length M."""
    kind = ScorerKind(kind)
    if kind is ScorerKind.RANDOM:
        if rng is None:
            raise DomainError("the random scorer needs a seeded generator")
        return rng.random(pred.M)
    if pred.M == 0:
        return np.zeros(0, dtype=np.float64)
    probs = pred.prob_matrix()
    if probs.shape[1] < 2:
        raise DomainError(f"uncertainty scores need D >= 2 categories, got D={probs.shape[1]}")
    return kernels.box_scores(probs, _KERNEL_KIND[kind])
