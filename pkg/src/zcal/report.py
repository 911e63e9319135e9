"""Learning-curve summaries across seeds."""

from __future__ import annotations

import csv
import io as _io
import math
import os
import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .data import CycleRecord
from .io import format_float

SUMMARY_HEADER = ("scorer", "accumulator", "n_labeled", "n_seeds", "mean_map", "std_map")

Row = Union[CycleRecord, Mapping[str, object]]


@dataclass(frozen=True)
class CurveSummary:
    scorer: str
    accumulator: str
    n_labeled: int
    n_seeds: int
    mean_map: float
    std_map: float | None


def _field(row: Row, name: str):
    return row[name] if isinstance(row, Mapping) else getattr(row, name)


def summarize(records: Iterable[Row]) -> list[CurveSummary]:
    """Mean and sample standard deviation of mAP per (scorer, accumulator, n_labeled).

    Accepts CycleRecords or rows read back from a report CSV. The standard
    deviation is None for groups with a single seed.
    """
    groups: dict[tuple[str, str, int], list[float]] = {}
    for row in records:
        key = (str(_field(row, "scorer")), str(_field(row, "accumulator")), int(_field(row, "n_labeled")))
        groups.setdefault(key, []).append(float(_field(row, "map")))
    out = []
    for (scorer, accumulator, n_labeled), maps in sorted(groups.items()):
        mean = math.fsum(maps) / len(maps)
        std = statistics.stdev(maps) if len(maps) >= 2 else None
        out.append(CurveSummary(scorer, accumulator, n_labeled, len(maps), mean, std))
    return out


def summary_text(summaries: Iterable[CurveSummary]) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for s in summaries:
        writer.writerow([
            s.scorer,
            s.accumulator,
            s.n_labeled,
            s.n_seeds,
            format_float(s.mean_map),
            "" if s.std_map is None else format_float(s.std_map),
        ])
    return buf.getvalue()


def write_summary(summaries: Iterable[CurveSummary], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(summary_text(summaries))
