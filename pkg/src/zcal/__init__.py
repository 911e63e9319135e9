"""zcal: zero-cost active learning for object detection.

Scores detected boxes by margin, variance or entropy of their class
distribution, accumulates them per image (mean, sum or max), ranks the
unlabeled pool, and simulates annotation cycles evaluated by VOC mAP@0.5.
"""

__version__ = "0.1.0"

from .accumulation import AccumulatorKind, ImageScore, RankedPool, accumulate, rank, score_pool, select_top
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
)
from .errors import ConfigError, DomainError, FormatError, ProtocolError, ValidationError, ZcalError
from .evaluation import average_precision, evaluate, iou, match_detections, mean_ap
from .io import load_ground_truth, load_predictions, write_ground_truth, write_predictions, write_report
from .kernels import BACKEND
from .loop import ExperimentConfig, LabeledSet, oracle_label, run_cycle, run_experiment, schedule
from .report import CurveSummary, summarize
from .scoring import ScorerKind, entropy_score, margin_score, random_score, score_boxes, variance_score
from .synthdet import SynthDetectorParams, SyntheticDetector, make_dataset, skill, synth_predict

__all__ = [
    "AccumulatorKind", "ImageScore", "RankedPool", "accumulate", "rank", "score_pool", "select_top",
    "BoxGeometry", "CategorySet", "ClassDistribution", "CycleRecord", "DatasetIndex", "Detection",
    "GroundTruthAnnotation", "GroundTruthBox", "ImagePrediction",
    "ConfigError", "DomainError", "FormatError", "ProtocolError", "ValidationError", "ZcalError",
    "average_precision", "evaluate", "iou", "match_detections", "mean_ap",
    "load_ground_truth", "load_predictions", "write_ground_truth", "write_predictions", "write_report",
    "BACKEND",
    "ExperimentConfig", "LabeledSet", "oracle_label", "run_cycle", "run_experiment", "schedule",
    "CurveSummary", "summarize",
    "ScorerKind", "entropy_score", "margin_score", "random_score", "score_boxes", "variance_score",
    "SynthDetectorParams", "SyntheticDetector", "make_dataset", "skill", "synth_predict",
]
