"""Aggregated experiment results and their serialisations.

A :class:`MetricReport` stores only the per-fold metric values; every cell,
row average, F1, IMAE and top-3 flag is derived from them on demand, so a
report loaded back from JSON re-derives exactly the same numbers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

from .ratings import MOVIELENS_SCALE, RatingScale
from .similarity import Measure

__all__ = [
    "FORMATS",
    "METRICS",
    "MetricReport",
    "UndefinedMetricError",
    "emit_report",
    "f1",
    "imae",
    "load_report",
]

SCHEMA_VERSION = 1
METRICS = ("mae", "precision", "recall")
SUMMARY_METRICS = ("f1", "imae")
FORMATS = ("csv", "markdown", "json", "radar-data")
AVERAGE = "Average"
_TITLES = {"mae": "MAE", "precision": "Precision", "recall": "Recall", "f1": "F1", "imae": "IMAE"}


class UndefinedMetricError(ValueError):
    pass


def f1(precision: float, recall: float) -> float:
    if precision < 0 or recall < 0:
        raise ValueError("precision and recall must be non-negative")
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def imae(mae: float, scale: RatingScale = MOVIELENS_SCALE) -> float:
    """1 - MAE / r_max."""
    if mae < 0:
        raise ValueError("mae must be non-negative")
    return 1.0 - mae / scale.r_max


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    if not vals:
        return None
    return sum(vals) / len(vals)


def ratio_label(r: float) -> str:
    return f"r={r:g}"


@dataclass
class MetricReport:
    """Fold-level results of a measure x ratio grid.

    ``fold_values[metric][measure][ratio_index]`` is the list of per-fold
    values; ``None`` marks a fold where the metric was undefined.
    """

    measures: list[str]
    ratios: list[float]
    fold_values: dict[str, dict[str, list[list[float | None]]]]
    scale: RatingScale = MOVIELENS_SCALE
    provenance: dict[str, Any] = field(default_factory=dict)

    def _values(self, metric: str, measure: str) -> list[list[float | None]]:
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}")
        try:
            return self.fold_values[metric][measure]
        except KeyError:
            raise KeyError(f"measure {measure!r} not in report; available: {', '.join(self.measures)}") from None

    def row(self, metric: str, measure: str | Measure) -> list[float | None]:
        """Fold-averaged values, one per ratio."""
        return [_mean(folds) for folds in self._values(metric, str(measure))]

    def average(self, metric: str, measure: str | Measure) -> float | None:
        """Mean of the ratio cells, or, for f1/imae, the value derived from the averages."""
        measure = str(measure)
        if metric == "f1":
            p, r = self.average("precision", measure), self.average("recall", measure)
            return None if p is None or r is None else f1(p, r)
        if metric == "imae":
            m = self.average("mae", measure)
            return None if m is None else imae(m, self.scale)
        return _mean(self.row(metric, measure))

    def radar(self, measure: str | Measure) -> tuple[float | None, float | None, float | None]:
        """(IMAE, precision, recall) averages."""
        return (self.average("imae", measure), self.average("precision", measure), self.average("recall", measure))

    def gaps(self) -> list[tuple[str, str, float, int]]:
        out = []
        for metric in METRICS:
            for measure in self.measures:
                for ri, folds in enumerate(self.fold_values.get(metric, {}).get(measure, [])):
                    out.extend((metric, measure, self.ratios[ri], fi) for fi, v in enumerate(folds) if v is None)
        return out

    def columns(self, metric: str) -> list[str]:
        if metric in SUMMARY_METRICS:
            return [AVERAGE]
        return [ratio_label(r) for r in self.ratios] + [AVERAGE]

    def column_values(self, metric: str, column: str) -> dict[str, float | None]:
        if column == AVERAGE:
            return {m: self.average(metric, m) for m in self.measures}
        ri = [ratio_label(r) for r in self.ratios].index(column)
        return {m: self.row(metric, m)[ri] for m in self.measures}

    def top3(self, metric: str, column: str = AVERAGE) -> list[str]:
        """Best three measures in a column; lowest MAE, highest otherwise.

        Ties go to the measure declared first.
        """
        vals = self.column_values(metric, column)
        sign = 1.0 if metric == "mae" else -1.0
        order = {m: i for i, m in enumerate(Measure)}
        ranked = sorted(
            (m for m, v in vals.items() if v is not None),
            key=lambda m: (sign * vals[m], order.get(Measure.parse(m), len(order))),
        )
        return ranked[:3]

    def to_dict(self) -> dict[str, Any]:
        derived: dict[str, Any] = {}
        for metric in METRICS:
            derived[metric] = {m: {"cells": self.row(metric, m), "average": self.average(metric, m)} for m in self.measures}
        for metric in SUMMARY_METRICS:
            derived[metric] = {m: self.average(metric, m) for m in self.measures}
        derived["top3"] = {
            metric: {col: self.top3(metric, col) for col in self.columns(metric)}
            for metric in METRICS + SUMMARY_METRICS
        }
        return {
            "schema_version": SCHEMA_VERSION,
            "measures": list(self.measures),
            "ratios": list(self.ratios),
            "scale": {"r_min": self.scale.r_min, "r_max": self.scale.r_max, "r_m": self.scale.r_m},
            "fold_values": self.fold_values,
            "provenance": self.provenance,
            "derived": derived,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MetricReport":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {version!r}")
        return cls(
            measures=list(data["measures"]),
            ratios=[float(r) for r in data["ratios"]],
            fold_values=data["fold_values"],
            scale=RatingScale(**data["scale"]),
            provenance=data.get("provenance", {}),
        )


def load_report(source: bytes | str) -> MetricReport:
    return MetricReport.from_dict(json.loads(source))


def _fmt(v: float | None, digits: int = 4) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.{digits}f}"


def _flagged_rows(report: MetricReport, metric: str):
    cols = report.columns(metric)
    tops = {c: set(report.top3(metric, c)) for c in cols}
    for m in report.measures:
        cells = report.row(metric, m) + [report.average(metric, m)] if metric in METRICS else [report.average(metric, m)]
        yield m, [(v, m in tops[c]) for v, c in zip(cells, cols)]


def _csv(report: MetricReport) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    ratio_cols = [ratio_label(r) for r in report.ratios]
    w.writerow(["metric", "measure", *ratio_cols, AVERAGE])
    for metric in METRICS + SUMMARY_METRICS:
        for m, cells in _flagged_rows(report, metric):
            text = [_fmt(v) + ("*" if top and v is not None else "") for v, top in cells]
            if metric in SUMMARY_METRICS:
                text = [""] * len(ratio_cols) + text
            w.writerow([_TITLES[metric], m, *text])
    return buf.getvalue().encode()


def _markdown(report: MetricReport) -> bytes:
    lines = []
    ratio_cols = [ratio_label(r) for r in report.ratios]
    for metric in METRICS:
        lines.append(f"### {_TITLES[metric]}")
        lines.append("")
        lines.append("| Measure | " + " | ".join(ratio_cols + [AVERAGE]) + " |")
        lines.append("|---|" + "---:|" * (len(ratio_cols) + 1))
        for m, cells in _flagged_rows(report, metric):
            text = [f"**{_fmt(v)}**" if top and v is not None else _fmt(v) for v, top in cells]
            lines.append(f"| {m} | " + " | ".join(text) + " |")
        lines.append("")
    lines.append("### Summary")
    lines.append("")
    lines.append("| Measure | MAE | F1 | IMAE |")
    lines.append("|---|---:|---:|---:|")
    tops = {metric: set(report.top3(metric)) for metric in ("mae", "f1", "imae")}
    for m in report.measures:
        cells = []
        for metric, digits in (("mae", 4), ("f1", 6), ("imae", 4)):
            v = report.average(metric, m)
            s = _fmt(v, digits)
            cells.append(f"**{s}**" if m in tops[metric] and v is not None else s)
        lines.append(f"| {m} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("Bold cells are the top three of their column.")
    if report.provenance:
        lines.append("")
        lines.append("```json")
        lines.append(json.dumps(report.provenance, indent=2, sort_keys=True))
        lines.append("```")
    return ("\n".join(lines) + "\n").encode()


def _radar(report: MetricReport) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["measure", "imae", "precision", "recall"])
    for m in report.measures:
        w.writerow([m, *(_fmt(v) for v in report.radar(m))])
    return buf.getvalue().encode()


def emit_report(report: MetricReport, fmt: str) -> bytes:
    if fmt == "csv":
        return _csv(report)
    if fmt == "markdown":
        return _markdown(report)
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n").encode()
    if fmt == "radar-data":
        return _radar(report)
    raise ValueError(f"unknown report format {fmt!r}; expected one of {', '.join(FORMATS)}")
