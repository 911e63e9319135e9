"""Synthetic detector whose quality grows with the labeled set.

The surrogate stands in for a real detector so the whole active-learning loop
can be run and verified on a laptop. Given an image's ground truth and a skill
level in [0, 1] it emits jittered copies of the true boxes (some missed), a few
false positives, and class distributions that blend Dirichlet noise with a
one-hot vector on the noise's own top class. With probability growing with
the blend weight that top class is first swapped onto the true class.

In class-conditional mode each class has its own skill, driven by how many
objects of that class are labeled. Labeling images that contain poorly-known
classes then genuinely improves the surrogate, which is what allows an
uncertainty-driven selection to beat passive selection.

Run as ``python -m zcal.synthdet --gt TRAIN --val-gt VAL WORKDIR`` to use it
through the file-based adapter protocol.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import (
    BoxGeometry,
    CategorySet,
    ClassDistribution,
    DatasetIndex,
    Detection,
    GroundTruthAnnotation,
    GroundTruthBox,
    ImagePrediction,
    normalize_probs,
)
from .scoring import _stable_hash

MIN_BOX_SIZE = 1.0


@dataclass(frozen=True)
class SynthDetectorParams:
    skill_floor: float = 0.05
    skill_ceiling: float = 0.95
    box_jitter: float = 0.2
    miss_rate_at_floor: float = 0.6
    false_positive_rate_at_floor: float = 1.0
    # blend weight on the true class per unit of skill (capped at 1)
    concentration_at_ceiling: float = 1.0
    # probability per unit of blend weight that the boosted class is the true one (capped at 1)
    accuracy_gain: float = 2.0
    # Dirichlet concentration of the class-noise component; inf gives exact uniform noise
    noise_concentration: float = 1.0
    class_conditional: bool = True
    canvas_width: float = 640.0
    canvas_height: float = 480.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.skill_floor <= self.skill_ceiling <= 1.0:
            raise ValueError("need 0 <= skill_floor <= skill_ceiling <= 1")
        for name in ("box_jitter", "miss_rate_at_floor", "false_positive_rate_at_floor"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.concentration_at_ceiling <= 0 or self.noise_concentration <= 0 or self.accuracy_gain <= 0:
            raise ValueError("concentrations and accuracy_gain must be positive")

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> "SynthDetectorParams":
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(values) - set(known)
        if unknown:
            raise ValueError(f"unknown synthetic detector parameters: {sorted(unknown)}")
        kwargs = {}
        for k, v in values.items():
            default = getattr(cls, k)
            if isinstance(default, bool):
                kwargs[k] = v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[k] = int(v)
            else:
                kwargs[k] = float(v)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["noise_concentration"]):
            d["noise_concentration"] = "inf"
        return d


def skill(n_labeled: int, n_total: int, params: SynthDetectorParams) -> float:
    """Square-root learning curve from ``skill_floor`` (nothing labeled) to ``skill_ceiling``."""
    if n_total < 1:
        raise ValueError("n_total must be >= 1")
    if not 0 <= n_labeled <= n_total:
        raise ValueError(f"n_labeled={n_labeled} outside [0, {n_total}]")
    frac = n_labeled / n_total
    return params.skill_floor + (params.skill_ceiling - params.skill_floor) * math.sqrt(frac)


def _distribution(true_class: int | None, weight: float, D: int, rng: np.random.Generator,
                  params: SynthDetectorParams) -> ClassDistribution:
    if math.isinf(params.noise_concentration):
        noise = np.full(D, 1.0 / D)
    else:
        noise = rng.dirichlet(np.full(D, params.noise_concentration))
    u_correct = rng.random()
    top = int(np.argmax(noise))
    if true_class is not None and u_correct < params.accuracy_gain * weight:
        # the boosted class carries the noise maximum, so the top-two gap only widens with weight
        noise[[top, true_class - 1]] = noise[[true_class - 1, top]]
        top = true_class - 1
    probs = (1.0 - weight) * noise
    probs[top] += weight
    return ClassDistribution(normalize_probs(np.clip(probs, 0.0, 1.0)))


def _clean_box(x0: float, y0: float, x1: float, y1: float) -> BoxGeometry:
    x0, x1 = min(x0, x1), max(x0, x1)
    y0, y1 = min(y0, y1), max(y0, y1)
    if x1 - x0 < MIN_BOX_SIZE:
        x1 = x0 + MIN_BOX_SIZE
    if y1 - y0 < MIN_BOX_SIZE:
        y1 = y0 + MIN_BOX_SIZE
    return BoxGeometry(float(x0), float(y0), float(x1), float(y1))


def synth_predict(
    image: GroundTruthAnnotation,
    skill_level: float,
    rng: np.random.Generator,
    params: SynthDetectorParams,
    D: int,
    class_skill: Mapping[int, float] | None = None,
) -> ImagePrediction:
    """Emit a synthetic prediction for one image.

    ``skill_level`` drives false positives and, unless ``class_skill`` gives a
    per-class value, every true box as well. Random draws are consumed in a
    fixed order per box so outputs change smoothly with skill.
    """
    detections = []
    for box in image.boxes:
        s = skill_level if class_skill is None else class_skill.get(box.category, skill_level)
        u_keep = rng.random()
        shift = rng.standard_normal(4)
        weight = min(1.0, params.concentration_at_ceiling * s)
        dist = _distribution(box.category, weight, D, rng, params)
        if u_keep >= 1.0 - params.miss_rate_at_floor * (1.0 - s):
            continue
        g = box.geometry
        w, h = g.x_max - g.x_min, g.y_max - g.y_min
        sigma = params.box_jitter * (1.0 - s)
        geom = _clean_box(
            g.x_min + sigma * w * shift[0],
            g.y_min + sigma * h * shift[1],
            g.x_max + sigma * w * shift[2],
            g.y_max + sigma * h * shift[3],
        )
        detections.append(Detection(geom, dist))

    n_fp = rng.poisson(params.false_positive_rate_at_floor * (1.0 - skill_level))
    for _ in range(n_fp):
        w = rng.uniform(20.0, 160.0)
        h = rng.uniform(20.0, 160.0)
        x0 = rng.uniform(0.0, max(params.canvas_width - w, 1.0))
        y0 = rng.uniform(0.0, max(params.canvas_height - h, 1.0))
        dist = _distribution(None, 0.0, D, rng, params)
        detections.append(Detection(_clean_box(x0, y0, x0 + w, y0 + h), dist))
    return ImagePrediction(image.image_id, tuple(detections))


class SyntheticDetector:
    """In-process detector adapter backed by :func:`synth_predict`.

    ``train`` holds the full training split (the surrogate needs the pool's
    ground truth to fake predictions); ``val`` is the evaluation split.
    """

    def __init__(self, train: DatasetIndex, val: DatasetIndex, params: SynthDetectorParams | None = None):
        self.train = train
        self.val = val
        self.params = params or SynthDetectorParams()
        D = train.categories.D
        totals = np.zeros(D, dtype=np.int64)
        for image_id in train.images:
            for c, k in train.annotation(image_id).category_counts().items():
                totals[c - 1] += k
        # a class saturates once it has as many labeled objects as the average class
        self.class_reference = max(int(round(totals.sum() / D)), 1)

    def skills(self, labeled_ids: Sequence[str]) -> tuple[float, dict[int, float] | None]:
        n_total = len(self.train.images)
        global_skill = skill(min(len(labeled_ids), n_total), n_total, self.params)
        if not self.params.class_conditional:
            return global_skill, None
        counts = np.zeros(self.train.categories.D, dtype=np.int64)
        for image_id in labeled_ids:
            for c, k in self.train.annotation(image_id).category_counts().items():
                counts[c - 1] += k
        ref = self.class_reference
        per_class = {c + 1: skill(min(int(n), ref), ref, self.params) for c, n in enumerate(counts)}
        return global_skill, per_class

    def predict_images(self, index: DatasetIndex, image_ids: Sequence[str],
                       labeled_ids: Sequence[str]) -> dict[str, ImagePrediction]:
        global_skill, per_class = self.skills(labeled_ids)
        D = index.categories.D
        out = {}
        for image_id in image_ids:
            rng = np.random.default_rng([self.params.seed, _stable_hash(image_id), len(labeled_ids)])
            out[image_id] = synth_predict(index.annotation(image_id), global_skill, rng,
                                          self.params, D, per_class)
        return out

    def predict(self, labeled_ids: Sequence[str], pool_ids: Sequence[str]):
        """Pool and validation predictions of the surrogate trained on ``labeled_ids``."""
        pool = self.predict_images(self.train, pool_ids, labeled_ids)
        val = self.predict_images(self.val, self.val.images, labeled_ids)
        return pool, val


# --------------------------------------------------------------------------- synthetic data


def make_dataset(
    n_images: int,
    n_classes: int,
    seed: int = 0,
    prefix: str = "img",
    mean_objects: float = 3.0,
    class_decay: float = 0.6,
    canvas: tuple[float, float] = (640.0, 480.0),
) -> DatasetIndex:
    """Random ground truth with a skewed class frequency (weights ``class_decay**c``)."""
    rng = np.random.default_rng(seed)
    weights = class_decay ** np.arange(n_classes)
    weights = weights / weights.sum()
    width = len(str(n_images))
    images = []
    annotations = {}
    for k in range(n_images):
        image_id = f"{prefix}_{k:0{width}d}"
        images.append(image_id)
        n_obj = 1 + int(rng.poisson(max(mean_objects - 1.0, 0.0)))
        boxes = []
        for _ in range(n_obj):
            c = int(rng.choice(n_classes, p=weights)) + 1
            w = float(rng.uniform(24.0, 200.0))
            h = float(rng.uniform(24.0, 200.0))
            x0 = float(rng.uniform(0.0, canvas[0] - w))
            y0 = float(rng.uniform(0.0, canvas[1] - h))
            boxes.append(GroundTruthBox(BoxGeometry(x0, y0, x0 + w, y0 + h), c))
        annotations[image_id] = GroundTruthAnnotation(image_id, tuple(boxes))
    categories = CategorySet(tuple(f"class_{c + 1}" for c in range(n_classes)))
    return DatasetIndex(categories, tuple(images), annotations)


# --------------------------------------------------------------------------- adapter command


def load_params(path: str | None, overrides: Mapping[str, object] | None = None) -> SynthDetectorParams:
    values: dict[str, object] = {}
    if path:
        values.update(json.loads(Path(path).read_text(encoding="utf-8")))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return SynthDetectorParams.from_mapping(values)


def run_adapter(workdir: str | Path, train: DatasetIndex, val: DatasetIndex,
                params: SynthDetectorParams) -> None:
    """Serve one protocol round: read labeled.json and pool.txt, write both prediction files."""
    from .io import load_ground_truth, write_predictions

    workdir = Path(workdir)
    labeled = load_ground_truth(workdir / "labeled.json")
    pool_ids = [line.strip() for line in (workdir / "pool.txt").read_text(encoding="utf-8").splitlines()
                if line.strip()]
    detector = SyntheticDetector(train, val, params)
    pool, val_preds = detector.predict(list(labeled.images), pool_ids)
    write_predictions((pool[i] for i in pool_ids), workdir / "predictions.jsonl")
    write_predictions((val_preds[i] for i in val.images), workdir / "val_predictions.jsonl")


def build_parser(parser: argparse.ArgumentParser | None = None) -> argparse.ArgumentParser:
    parser = parser or argparse.ArgumentParser(
        prog="python -m zcal.synthdet",
        description="Synthetic detector speaking the file-based adapter protocol.",
    )
    parser.add_argument("workdir", help="directory holding labeled.json and pool.txt")
    parser.add_argument("--gt", required=True, help="training-split ground truth JSON")
    parser.add_argument("--val-gt", required=True, help="validation-split ground truth JSON")
    parser.add_argument("--params", help="JSON file with SynthDetectorParams fields")
    parser.add_argument("--detector-seed", type=int, dest="seed", help="overrides params seed")
    return parser


def adapter_main(args: argparse.Namespace) -> int:
    from .io import load_ground_truth

    params = load_params(args.params, {"seed": args.seed})
    run_adapter(args.workdir, load_ground_truth(args.gt), load_ground_truth(args.val_gt), params)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    return adapter_main(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
