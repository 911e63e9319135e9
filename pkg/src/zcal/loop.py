"""Active-learning cycles: select, label with a ground-truth oracle, retrain, evaluate.

A detector adapter is anything with a ``predict(labeled_ids, pool_ids)`` method
returning ``(pool_predictions, val_predictions)`` as dicts keyed by image_id.
The adapter is asked once per labeled-set state; the validation predictions
of that call score the cycle that produced the state, and the pool
predictions drive the next cycle's selection.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .accumulation import DEFAULT_CONFIDENCE_THRESHOLD, AccumulatorKind, rank, score_pool, select_top
from .data import CycleRecord, DatasetIndex, GroundTruthAnnotation, ImagePrediction
from .errors import ConfigError, DomainError, ProtocolError, ValidationError
from .evaluation import ALL_POINTS, INTERPOLATIONS, evaluate
from .io import load_predictions, write_ground_truth
from .scoring import ScorerKind
from .synthdet import SynthDetectorParams, SyntheticDetector

log = logging.getLogger(__name__)

Predictions = Mapping[str, ImagePrediction]


class DetectorAdapter(Protocol):
    def predict(self, labeled_ids: Sequence[str], pool_ids: Sequence[str]) -> tuple[Predictions, Predictions]:
        ...


def schedule(cycle: int) -> int:
    """Number of new images labeled in cycle ``cycle`` (1-based): ``10 * cycle + 10``."""
    if cycle < 1:
        raise DomainError(f"cycle index must be >= 1, got {cycle}")
    return 10 * cycle + 10


@dataclass
class LabeledSet:
    """Labeled images in labeling order, with the oracle's annotations."""

    image_ids: list[str] = field(default_factory=list)
    annotations: dict[str, GroundTruthAnnotation] = field(default_factory=dict)

    def __contains__(self, image_id: object) -> bool:
        return image_id in self.annotations

    def __len__(self) -> int:
        return len(self.image_ids)

    def add(self, annotations: Sequence[GroundTruthAnnotation]) -> None:
        for ann in annotations:
            if ann.image_id in self.annotations:
                raise ProtocolError(f"image_id {ann.image_id!r} is already labeled")
            self.image_ids.append(ann.image_id)
            self.annotations[ann.image_id] = ann


def oracle_label(ids: Sequence[str], index: DatasetIndex,
                 labeled: LabeledSet | None = None) -> list[GroundTruthAnnotation]:
    """Perfect, complete annotations for ``ids``, straight from the ground truth."""
    seen: set[str] = set()
    out = []
    for image_id in ids:
        if image_id not in index.image_set:
            raise ValidationError(f"oracle asked to label unknown image_id {image_id!r}")
        if (labeled is not None and image_id in labeled) or image_id in seen:
            raise ProtocolError(f"image_id {image_id!r} is already labeled")
        seen.add(image_id)
        out.append(index.annotation(image_id))
    return out


# --------------------------------------------------------------------------- adapters


class CommandAdapter:
    """Drive an external detector through the working-directory file protocol.

    Each call writes ``labeled.json`` and ``pool.txt`` into ``workdir``, runs
    ``command`` with the directory appended as last argument, then reads
    ``predictions.jsonl`` and ``val_predictions.jsonl``.
    """

    def __init__(self, command: str | Sequence[str], train: DatasetIndex, val: DatasetIndex,
                 workdir: str | Path | None = None, timeout: float | None = None):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.argv:
            raise ConfigError("detector command is empty")
        self.train = train
        self.val = val
        self.timeout = timeout
        if workdir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="zcal_adapter_")
            workdir = self._tmp.name
        self.workdir = Path(workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)

    def predict(self, labeled_ids: Sequence[str], pool_ids: Sequence[str]):
        write_ground_truth(self.train, self.workdir / "labeled.json", list(labeled_ids))
        (self.workdir / "pool.txt").write_text("".join(f"{i}\n" for i in pool_ids), encoding="utf-8")
        for name in ("predictions.jsonl", "val_predictions.jsonl"):
            (self.workdir / name).unlink(missing_ok=True)
        proc = subprocess.run(
            [*self.argv, str(self.workdir)], capture_output=True, text=True, timeout=self.timeout
        )
        if proc.returncode != 0:
            raise ProtocolError(
                f"detector command exited with status {proc.returncode}: {proc.stderr.strip()[-2000:]}"
            )
        try:
            pool = load_predictions(self.workdir / "predictions.jsonl", self.train)
            val = load_predictions(self.workdir / "val_predictions.jsonl", self.val)
        except FileNotFoundError as exc:
            raise ProtocolError(f"detector command did not write {Path(exc.filename).name}") from None
        return {p.image_id: p for p in pool}, {p.image_id: p for p in val}


# --------------------------------------------------------------------------- experiment


@dataclass(frozen=True)
class ExperimentConfig:
    scorer: ScorerKind = ScorerKind.MARGIN
    accumulator: AccumulatorKind = AccumulatorKind.MAX
    initial_size: int = 10
    cycles: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    confidence_threshold: float = DEFAULT_CONFIDENCE_THRESHOLD
    empty_image_score: float = 0.0
    iou_threshold: float = 0.5
    interpolation: str = ALL_POINTS
    detector: str = "synthetic"
    detector_command: str | None = None
    synth: SynthDetectorParams = field(default_factory=SynthDetectorParams)

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "scorer", ScorerKind(self.scorer))
            object.__setattr__(self, "accumulator", AccumulatorKind(self.accumulator))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.initial_size < 1:
            raise ConfigError("initial_size must be >= 1")
        if self.cycles < 1:
            raise ConfigError("cycles must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"duplicate seeds: {list(self.seeds)}")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ConfigError("iou_threshold must lie in (0, 1]")
        if self.interpolation not in INTERPOLATIONS:
            raise ConfigError(f"interpolation must be one of {INTERPOLATIONS}")
        if self.detector not in ("synthetic", "command"):
            raise ConfigError(f"detector must be 'synthetic' or 'command', got {self.detector!r}")
        if self.detector == "command" and not self.detector_command:
            raise ConfigError("detector 'command' needs detector_command")

    def with_method(self, scorer, accumulator) -> "ExperimentConfig":
        return replace(self, scorer=ScorerKind(scorer), accumulator=AccumulatorKind(accumulator))


def make_adapter(config: ExperimentConfig, train: DatasetIndex, val: DatasetIndex,
                 workdir: str | Path | None = None) -> DetectorAdapter:
    if config.detector == "synthetic":
        return SyntheticDetector(train, val, config.synth)
    return CommandAdapter(config.detector_command, train, val, workdir)


@dataclass
class ExperimentState:
    seed: int
    train: DatasetIndex
    val: DatasetIndex
    labeled: LabeledSet
    pool: list[str]
    cycle: int = 0
    pool_predictions: Predictions | None = None
    records: list[CycleRecord] = field(default_factory=list)

    @classmethod
    def initial(cls, seed: int, train: DatasetIndex, val: DatasetIndex, initial_size: int) -> "ExperimentState":
        """Draw ``initial_size`` images uniformly without replacement and label them."""
        if len(train.images) < initial_size:
            raise ConfigError(
                f"dataset has {len(train.images)} images, fewer than initial_size={initial_size}"
            )
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(train.images), size=initial_size, replace=False)
        labeled = LabeledSet()
        labeled.add(oracle_label([train.images[int(k)] for k in picks], train))
        pool = [i for i in train.images if i not in labeled]
        return cls(seed=seed, train=train, val=val, labeled=labeled, pool=pool)

    def check_conservation(self) -> None:
        if len(self.labeled) + len(self.pool) != len(self.train.images):
            raise ProtocolError("labeled set and pool no longer partition the dataset")


def _require_coverage(preds: Predictions, ids: Sequence[str], what: str) -> None:
    missing = [i for i in ids if i not in preds]
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise ProtocolError(f"adapter returned no {what} predictions for {len(missing)} image(s): {shown}")


def run_cycle(state: ExperimentState, config: ExperimentConfig, adapter: DetectorAdapter) -> CycleRecord:
    """Advance ``state`` by one cycle and return its record."""
    cycle = state.cycle + 1
    if state.pool_predictions is None:
        state.pool_predictions, _ = adapter.predict(list(state.labeled.image_ids), list(state.pool))
    preds = state.pool_predictions
    _require_coverage(preds, state.pool, "pool")

    scores = score_pool(
        (preds[i] for i in state.pool),
        config.scorer,
        config.accumulator,
        seed=state.seed,
        confidence_threshold=config.confidence_threshold,
        empty_image_score=config.empty_image_score,
    )
    requested = schedule(cycle)
    selected = select_top(rank(scores), requested)
    state.labeled.add(oracle_label(selected, state.train, state.labeled))
    chosen = set(selected)
    state.pool = [i for i in state.pool if i not in chosen]
    state.check_conservation()

    pool_preds, val_preds = adapter.predict(list(state.labeled.image_ids), list(state.pool))
    _require_coverage(val_preds, state.val.images, "validation")
    result = evaluate(state.val, val_preds, config.iou_threshold, config.interpolation)
    state.pool_predictions = pool_preds
    state.cycle = cycle

    record = CycleRecord(
        seed=state.seed,
        cycle=cycle,
        requested=requested,
        selected=tuple(selected),
        n_labeled=len(state.labeled),
        map=result.map,
        scorer=config.scorer.value,
        accumulator=config.accumulator.value,
    )
    state.records.append(record)
    return record


def run_seed(seed: int, config: ExperimentConfig, train: DatasetIndex, val: DatasetIndex,
             adapter: DetectorAdapter) -> list[CycleRecord]:
    state = ExperimentState.initial(seed, train, val, config.initial_size)
    for _ in range(config.cycles):
        if not state.pool:
            log.warning(
                "seed %d: pool exhausted after cycle %d of %d; curve truncated",
                seed, state.cycle, config.cycles,
            )
            break
        run_cycle(state, config, adapter)
    return state.records


def run_experiment(config: ExperimentConfig, train: DatasetIndex, val: DatasetIndex,
                   adapter: DetectorAdapter | None = None) -> list[CycleRecord]:
    """All cycles for every seed; seeds run sequentially with independent streams."""
    if len(train.images) < config.initial_size:
        raise ConfigError(
            f"dataset has {len(train.images)} images, fewer than initial_size={config.initial_size}"
        )
    adapter = adapter or make_adapter(config, train, val)
    records: list[CycleRecord] = []
    for seed in config.seeds:
        records.extend(run_seed(seed, config, train, val, adapter))
    return records
