"""Command-line interface: ``zcal <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .accumulation import DEFAULT_CONFIDENCE_THRESHOLD, AccumulatorKind, rank, score_pool, select_top
from .data import DatasetIndex, ImagePrediction
from .errors import ConfigError, ZcalError
from .evaluation import ALL_POINTS, INTERPOLATIONS, evaluate
from .io import format_float, load_ground_truth, load_predictions, write_ground_truth, write_report
from .loop import ExperimentConfig, LabeledSet, make_adapter, oracle_label, run_experiment, schedule
from .report import summarize, summary_text, write_summary
from .scoring import ScorerKind
from .synthdet import SynthDetectorParams, make_dataset
from . import synthdet

log = logging.getLogger("zcal")

SCORERS = [k.value for k in ScorerKind]
ACCUMULATORS = [k.value for k in AccumulatorKind]

DEFAULTS: dict[str, Any] = {
    "scorer": "margin",
    "accumulator": "max",
    "seed": 0,
    "seeds": "0,1,2,3,4",
    "cycles": 5,
    "initial_size": 10,
    "iou": 0.5,
    "confidence_threshold": DEFAULT_CONFIDENCE_THRESHOLD,
    "empty_image_score": 0.0,
    "interpolation": ALL_POINTS,
    "detector": "synthetic",
    "detector_command": None,
    "synthetic_images": 500,
    "synthetic_val_images": 200,
    "synthetic_classes": 5,
    "dataset_seed": 1234,
}


# --------------------------------------------------------------------------- helpers


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or any(isinstance(v, dict) for v in doc.values()):
        raise ConfigError(f"{path}: config must be a flat JSON object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


class Settings:
    """CLI flags over config file over built-in defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file = _load_config(getattr(args, "config", None))

    def get(self, key: str, default: Any = None) -> Any:
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.file:
            return self.file[key]
        return DEFAULTS.get(key, default)

    def synth_params(self) -> SynthDetectorParams:
        values = {k[len("synth_"):]: v for k, v in self.file.items() if k.startswith("synth_")}
        if getattr(self.args, "detector_seed", None) is not None:
            values["seed"] = self.args.detector_seed
        try:
            return SynthDetectorParams.from_mapping(values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"synthetic detector parameters: {exc}") from None


def _require(settings: Settings, key: str) -> Any:
    value = settings.get(key)
    if value is None:
        raise ConfigError(f"--{key.replace('_', '-')} is required")
    return value


def _choice_list(value: Any, allowed: Sequence[str], what: str) -> list[str]:
    items = value if isinstance(value, list) else [v.strip() for v in str(value).split(",") if v.strip()]
    if items == ["all"]:
        return list(allowed)
    for item in items:
        if item not in allowed:
            raise ConfigError(f"unknown {what} {item!r}; choose from {', '.join(allowed)}")
    return items


def _seed_list(value: Any) -> list[int]:
    items = value if isinstance(value, list) else str(value).split(",")
    try:
        return [int(str(s).strip()) for s in items if str(s).strip()]
    except ValueError:
        raise ConfigError(f"seeds must be comma-separated integers, got {value!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _predictions_by_id(settings: Settings, index: DatasetIndex) -> dict[str, ImagePrediction]:
    return {p.image_id: p for p in load_predictions(_require(settings, "pred"), index)}


def _labeled_ids(path: str | None, index: DatasetIndex) -> list[str]:
    if not path:
        return []
    labeled = load_ground_truth(path)
    unknown = [i for i in labeled.images if i not in index.image_set]
    if unknown:
        raise ConfigError(f"{path}: labeled images not in ground truth: {unknown[:10]}")
    return list(labeled.images)


def _pool_scores(settings: Settings, index: DatasetIndex, preds, ids):
    scorer = _choice_list(settings.get("scorer"), SCORERS, "scorer")
    accumulator = _choice_list(settings.get("accumulator"), ACCUMULATORS, "accumulator")
    if len(scorer) != 1 or len(accumulator) != 1:
        raise ConfigError("exactly one scorer and one accumulator are required")
    return score_pool(
        (preds.get(i, ImagePrediction(i)) for i in ids),
        scorer[0],
        accumulator[0],
        seed=int(settings.get("seed")),
        confidence_threshold=float(settings.get("confidence_threshold")),
        empty_image_score=float(settings.get("empty_image_score")),
    )


# --------------------------------------------------------------------------- subcommands


def cmd_score(args: argparse.Namespace) -> int:
    """Score every image of the ground-truth index and print them ranked."""
    settings = Settings(args)
    index = load_ground_truth(_require(settings, "gt"))
    preds = _predictions_by_id(settings, index)
    ranked = rank(_pool_scores(settings, index, preds, index.images))
    rows = [(e.image_id, e.n_boxes, format_float(e.value)) for e in ranked.entries]
    _emit(_csv_text(("image_id", "n_boxes", "score"), rows), settings.get("out"))
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    settings = Settings(args)
    index = load_ground_truth(_require(settings, "gt"))
    preds = _predictions_by_id(settings, index)
    labeled = set(_labeled_ids(args.labeled, index))
    pool_ids = [i for i in index.images if i not in labeled]
    ranked = rank(_pool_scores(settings, index, preds, pool_ids))
    entries = list(ranked.entries)
    if args.top is not None or args.cycle is not None:
        L = args.top if args.top is not None else schedule(args.cycle)
        keep = set(select_top(ranked, L))
        entries = [e for e in entries if e.image_id in keep]
    rows = [(k + 1, e.image_id, format_float(e.value)) for k, e in enumerate(entries)]
    _emit(_csv_text(("rank", "image_id", "score"), rows), settings.get("out"))
    return 0


def cmd_cycle(args: argparse.Namespace) -> int:
    """One manual cycle: rank the pool, select ``10*cycle+10`` images, label them."""
    settings = Settings(args)
    index = load_ground_truth(_require(settings, "gt"))
    preds = _predictions_by_id(settings, index)
    labeled = LabeledSet()
    labeled.add(oracle_label(_labeled_ids(args.labeled, index), index))
    pool_ids = [i for i in index.images if i not in labeled]
    missing = [i for i in pool_ids if i not in preds]
    if missing:
        raise ConfigError(f"predictions missing for {len(missing)} pool image(s): {missing[:20]}")
    ranked = rank(_pool_scores(settings, index, preds, pool_ids))
    selected = select_top(ranked, schedule(args.cycle)) if len(ranked) else []
    labeled.add(oracle_label(selected, index, labeled))
    out = Path(_require(settings, "out"))
    write_ground_truth(index, out, labeled.image_ids)
    chosen = set(selected)
    remaining = [i for i in pool_ids if i not in chosen]
    (out.parent / "pool.txt").write_text("".join(f"{i}\n" for i in remaining), encoding="utf-8")
    for image_id in selected:
        sys.stdout.write(image_id + "\n")
    log.info("cycle %d: labeled %d new images, %d remain in pool", args.cycle, len(selected), len(remaining))
    return 0


def _datasets(settings: Settings) -> tuple[DatasetIndex, DatasetIndex]:
    gt = settings.get("gt")
    if gt:
        return load_ground_truth(gt), load_ground_truth(_require(settings, "val_gt"))
    n_classes = int(settings.get("synthetic_classes"))
    seed = int(settings.get("dataset_seed"))
    train = make_dataset(int(settings.get("synthetic_images")), n_classes, seed=seed, prefix="train")
    val = make_dataset(int(settings.get("synthetic_val_images")), n_classes, seed=seed + 1, prefix="val")
    return train, val


def method_pairs(scorers: Sequence[str], accumulators: Sequence[str]) -> list[tuple[str, str]]:
    """Cartesian product of deterministic scorers and accumulators; random runs once."""
    pairs = [(s, a) for s in scorers if s != "random" for a in accumulators]
    if "random" in scorers:
        pairs.append(("random", accumulators[0]))
    return pairs


def experiment_config(settings: Settings) -> ExperimentConfig:
    return ExperimentConfig(
        initial_size=int(settings.get("initial_size")),
        cycles=int(settings.get("cycles")),
        seeds=tuple(_seed_list(settings.get("seeds"))),
        confidence_threshold=float(settings.get("confidence_threshold")),
        empty_image_score=float(settings.get("empty_image_score")),
        iou_threshold=float(settings.get("iou")),
        interpolation=settings.get("interpolation"),
        detector=settings.get("detector"),
        detector_command=settings.get("detector_command"),
        synth=settings.synth_params(),
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    explicit = getattr(args, "scorer", None) is not None or "scorer" in settings.file
    scorers = _choice_list(settings.get("scorer") if explicit else "all", SCORERS, "scorer")
    explicit_acc = getattr(args, "accumulator", None) is not None or "accumulator" in settings.file
    accumulators = _choice_list(settings.get("accumulator") if explicit_acc else "all", ACCUMULATORS,
                                "accumulator")
    base = experiment_config(settings)
    out = Path(settings.get("out") or "report.csv")
    summary_path = Path(args.summary) if args.summary else out.with_name(out.stem + "_summary.csv")

    train, val = _datasets(settings)
    if len(train.images) < base.initial_size:
        raise ConfigError(
            f"dataset has {len(train.images)} images, fewer than initial_size={base.initial_size}"
        )
    capacity = len(train.images) - base.initial_size
    needed = sum(schedule(c) for c in range(1, base.cycles + 1))
    if needed > capacity:
        log.warning("%d cycles need %d images but the pool holds %d; curves will be truncated",
                    base.cycles, needed, capacity)

    records = []
    workdir = getattr(args, "workdir", None)
    for scorer, accumulator in method_pairs(scorers, accumulators):
        config = base.with_method(scorer, accumulator)
        adapter = make_adapter(config, train, val, workdir)
        log.info("running %s/%s over %d seed(s)", scorer, accumulator, len(config.seeds))
        records.extend(run_experiment(config, train, val, adapter))
    write_report(records, out)
    write_summary(summarize(records), summary_path)
    log.info("wrote %s and %s", out, summary_path)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    settings = Settings(args)
    index = load_ground_truth(_require(settings, "gt"))
    preds = load_predictions(_require(settings, "pred"), index)
    result = evaluate(index, preds, float(settings.get("iou")), settings.get("interpolation"))
    rows = [
        (c.category, c.name, c.n_gt, c.n_det, "" if c.ap is None else format_float(c.ap))
        for c in result.per_class
    ]
    text = _csv_text(("category", "name", "n_gt", "n_det", "ap"), rows)
    sys.stdout.write(text)
    sys.stdout.write(f"mAP,{format_float(result.map)}\n")
    if settings.get("out"):
        _emit(text + f"mAP,,,,{format_float(result.map)}\n", settings.get("out"))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from .io import read_report

    settings = Settings(args)
    rows = read_report(args.report)
    _emit(summary_text(summarize(rows)), settings.get("out"))
    return 0


def cmd_make_data(args: argparse.Namespace) -> int:
    index = make_dataset(args.images, args.classes, seed=args.seed, prefix=args.prefix,
                         mean_objects=args.mean_objects)
    write_ground_truth(index, args.out)
    return 0


# --------------------------------------------------------------------------- parser


def _common(parser: argparse.ArgumentParser, *names: str) -> None:
    spec = {
        "gt": dict(help="ground-truth JSON"),
        "pred": dict(help="predictions JSON Lines"),
        "scorer": dict(help=f"box score: {'|'.join(SCORERS)}"),
        "accumulator": dict(help=f"image accumulation: {'|'.join(ACCUMULATORS)}"),
        "seed": dict(type=int, help="seed for the random scorer (default 0)"),
        "seeds": dict(help="comma-separated experiment seeds (default 0,1,2,3,4)"),
        "cycles": dict(type=int, help="number of active-learning cycles (default 5)"),
        "initial-size": dict(type=int, help="initially labeled images (default 10)"),
        "iou": dict(type=float, help="IoU match threshold (default 0.5)"),
        "confidence-threshold": dict(type=float, help="drop detections below this confidence (default 0.05)"),
        "empty-image-score": dict(type=float, help="score of images without detections (default 0)"),
        "interpolation": dict(choices=INTERPOLATIONS, help="AP interpolation (default all-points)"),
        "out": dict(help="output file (default: standard output)"),
        "config": dict(help="flat JSON config file; flags override it"),
    }
    for name in names:
        parser.add_argument(f"--{name}", **spec[name])


def _validate_choices(args: argparse.Namespace, parser: argparse.ArgumentParser, multi: bool) -> None:
    for key, allowed in (("scorer", SCORERS), ("accumulator", ACCUMULATORS)):
        value = getattr(args, key, None)
        if value is None:
            continue
        items = value.split(",") if multi else [value]
        if multi and items == ["all"]:
            continue
        bad = [v for v in items if v not in allowed]
        if bad:
            parser.error(f"argument --{key}: invalid choice: {bad[0]!r} (choose from {', '.join(allowed)})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zcal", description=__doc__)
    parser.add_argument("--version", action="version", version=f"zcal {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("score", help="score and rank every image")
    _common(p, "gt", "pred", "scorer", "accumulator", "seed", "confidence-threshold",
            "empty-image-score", "out", "config")
    p.set_defaults(func=cmd_score, multi=False)

    p = sub.add_parser("rank", help="rank the unlabeled pool, optionally keeping the top L")
    _common(p, "gt", "pred", "scorer", "accumulator", "seed", "confidence-threshold",
            "empty-image-score", "out", "config")
    p.add_argument("--labeled", help="labeled.json; these images are excluded from the pool")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--top", type=int, help="keep the first TOP images")
    g.add_argument("--cycle", type=int, help="keep the 10*CYCLE+10 first images")
    p.set_defaults(func=cmd_rank, multi=False)

    p = sub.add_parser("cycle", help="run one selection + oracle labeling step on files")
    _common(p, "gt", "pred", "scorer", "accumulator", "seed", "confidence-threshold",
            "empty-image-score", "out", "config")
    p.add_argument("--labeled", help="current labeled.json (omit for an empty labeled set)")
    p.add_argument("--cycle", type=int, required=True, help="cycle index, starting at 1")
    p.set_defaults(func=cmd_cycle, multi=False)

    p = sub.add_parser("simulate", help="run full active-learning experiments")
    _common(p, "gt", "scorer", "accumulator", "seeds", "cycles", "initial-size", "iou",
            "confidence-threshold", "empty-image-score", "interpolation", "out", "config")
    p.add_argument("--val-gt", help="validation-split ground truth (required with --gt)")
    p.add_argument("--summary", help="summary CSV path (default: <out>_summary.csv)")
    p.add_argument("--detector", choices=("synthetic", "command"), help="detector adapter kind")
    p.add_argument("--detector-command", help="external adapter command; the work directory is appended")
    p.add_argument("--detector-seed", type=int, help="seed of the synthetic detector")
    p.add_argument("--workdir", help="work directory for the external adapter protocol")
    p.add_argument("--synthetic-images", type=int, help="training images generated when --gt is absent")
    p.add_argument("--synthetic-val-images", type=int, help="validation images generated when --gt is absent")
    p.add_argument("--synthetic-classes", type=int, help="categories generated when --gt is absent")
    p.add_argument("--dataset-seed", type=int, help="seed of the generated dataset")
    p.set_defaults(func=cmd_simulate, multi=True)

    p = sub.add_parser("eval", help="per-class AP and mAP of a prediction file")
    _common(p, "gt", "pred", "iou", "interpolation", "out", "config")
    p.set_defaults(func=cmd_eval, multi=False)

    p = sub.add_parser("report", help="summarize a report CSV across seeds")
    p.add_argument("report", help="report CSV written by simulate")
    _common(p, "out")
    p.set_defaults(func=cmd_report, multi=False)

    p = sub.add_parser("make-data", help="write a synthetic ground-truth file")
    p.add_argument("--images", type=int, default=500)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prefix", default="img")
    p.add_argument("--mean-objects", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_data, multi=False)

    p = sub.add_parser("synth-adapter", help="synthetic detector speaking the adapter file protocol")
    synthdet.build_parser(p)
    p.set_defaults(func=synthdet.adapter_main, multi=False)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate_choices(args, parser, args.multi)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ZcalError, OSError) as exc:
        print(f"zcal: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
