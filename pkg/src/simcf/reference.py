"""Published MovieLens-100K benchmark values and calibration against them.

The tables hold one row per measure: nine per-ratio cells (r = 0.1 .. 0.9)
followed by the average.  :func:`reference_report` turns them into a
:class:`~simcf.report.MetricReport` with one "fold" per cell, so the
published numbers can go through the same ``compare`` and ``report``
plumbing as a reproduction run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

from .ratings import MOVIELENS_SCALE
from .report import MetricReport, ratio_label
from .similarity import Measure

__all__ = [
    "CALIBRATION_MEASURES",
    "MAE_BAND",
    "PUBLISHED",
    "PUBLISHED_F1",
    "PUBLISHED_RATIOS",
    "Calibration",
    "TrendCheck",
    "calibrate",
    "precision_gap_trend",
    "reference_report",
]

PUBLISHED_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

_MAE = """
Jaccard   0.7465 0.7491 0.7502 0.7543 0.7583 0.7620 0.7717 0.7939 0.8651 0.7723
IJ        0.7572 0.7574 0.7578 0.7581 0.7618 0.7658 0.7787 0.8118 0.9135 0.7847
Cosine    0.7532 0.7551 0.7560 0.7593 0.7630 0.7654 0.7736 0.7905 0.8255 0.7713
Pearson   0.7395 0.7462 0.7519 0.7611 0.7734 0.7882 0.8091 0.8435 0.8473 0.7845
PSS       0.7452 0.7479 0.7490 0.7529 0.7568 0.7606 0.7708 0.7929 0.8591 0.7706
TA        0.7518 0.7538 0.7547 0.7581 0.7618 0.7643 0.7726 0.7901 0.8487 0.7729
CosineJ   0.7459 0.7485 0.7496 0.7537 0.7577 0.7615 0.7712 0.7921 0.8537 0.7704
PearsonJ  0.7311 0.7375 0.7427 0.7510 0.7624 0.7766 0.7992 0.8379 0.9173 0.7840
PSSJ      0.7405 0.7441 0.7456 0.7505 0.7550 0.7605 0.7735 0.8016 0.8718 0.7715
TAJ       0.7449 0.7475 0.7486 0.7527 0.7568 0.7606 0.7704 0.7920 0.8552 0.7699
CosineIJ  0.7637 0.7660 0.7668 0.7706 0.7748 0.7767 0.7846 0.7996 0.8515 0.7838
PearsonIJ 0.7580 0.7678 0.7756 0.7864 0.8005 0.8151 0.8321 0.8603 0.9233 0.8132
PSSIJ     0.7504 0.7526 0.7534 0.7569 0.7608 0.7638 0.7731 0.7931 0.8569 0.7734
TAIJ      0.7620 0.7643 0.7651 0.7689 0.7731 0.7751 0.7831 0.7988 0.8525 0.7825
"""

_PRECISION = """
Jaccard   0.0056 0.0105 0.0155 0.0207 0.0261 0.0317 0.0377 0.0438 0.0511 0.0270
IJ        0.0062 0.0121 0.0180 0.0240 0.0290 0.0329 0.0321 0.0276 0.0196 0.0224
Cosine    0.0055 0.0104 0.0154 0.0207 0.0262 0.0324 0.0396 0.0508 0.0836 0.0316
Pearson   0.0051 0.0095 0.0141 0.0187 0.0237 0.0291 0.0359 0.0467 0.0803 0.0292
PSS       0.0057 0.0106 0.0157 0.0210 0.0266 0.0329 0.0401 0.0512 0.0834 0.0319
TA        0.0055 0.0104 0.0155 0.0207 0.0263 0.0325 0.0397 0.0509 0.0836 0.0317
CosineJ   0.0056 0.0105 0.0156 0.0209 0.0265 0.0327 0.0399 0.0510 0.0835 0.0318
PearsonJ  0.0052 0.0097 0.0143 0.0190 0.0240 0.0295 0.0362 0.0471 0.0804 0.0295
PSSJ      0.0057 0.0107 0.0158 0.0212 0.0268 0.0331 0.0403 0.0512 0.0831 0.0320
TAJ       0.0056 0.0106 0.0157 0.0209 0.0265 0.0328 0.0400 0.0511 0.0835 0.0319
CosineIJ  0.0055 0.0103 0.0153 0.0205 0.0260 0.0322 0.0394 0.0506 0.0835 0.0315
PearsonIJ 0.0051 0.0095 0.0140 0.0186 0.0236 0.0289 0.0356 0.0465 0.0801 0.0291
PSSIJ     0.0056 0.0106 0.0156 0.0209 0.0265 0.0328 0.0399 0.0511 0.0836 0.0318
TAIJ      0.0055 0.0104 0.0154 0.0206 0.0261 0.0323 0.0395 0.0507 0.0835 0.0316
"""

_RECALL = """
Jaccard   0.9266 0.9230 0.9221 0.9191 0.9158 0.9155 0.9073 0.8947 0.8496 0.9082
IJ        0.7928 0.7514 0.6938 0.6142 0.5099 0.3757 0.2249 0.0940 0.0199 0.4530
Cosine    0.9241 0.9208 0.9211 0.9177 0.9150 0.9147 0.9066 0.8937 0.8021 0.9018
Pearson   0.9439 0.9402 0.9388 0.9359 0.9331 0.9309 0.9190 0.8948 0.7834 0.9133
PSS       0.9248 0.9219 0.9215 0.9179 0.9152 0.9143 0.9055 0.8903 0.7936 0.9006
TA        0.9242 0.9211 0.9211 0.9177 0.9149 0.9145 0.9060 0.8928 0.8005 0.9014
CosineJ   0.9266 0.9232 0.9223 0.9193 0.9159 0.9153 0.9066 0.8914 0.7970 0.9020
PearsonJ  0.9429 0.9440 0.9373 0.9351 0.9323 0.9309 0.9186 0.8948 0.7814 0.9130
PSSJ      0.9276 0.9239 0.9232 0.9191 0.9160 0.9142 0.9037 0.8844 0.7860 0.8998
TAJ       0.9265 0.9229 0.9224 0.9191 0.9154 0.9149 0.9060 0.8907 0.7957 0.9015
CosineIJ  0.9198 0.9160 0.9162 0.9127 0.9100 0.9096 0.9009 0.8886 0.8006 0.8972
PearsonIJ 0.9388 0.9334 0.9308 0.9270 0.9214 0.9181 0.9061 0.8844 0.7787 0.9043
PSSIJ     0.9215 0.9189 0.9186 0.9158 0.9132 0.9125 0.9040 0.8905 0.7957 0.8990
TAIJ      0.9207 0.9165 0.9164 0.9131 0.9099 0.9097 0.9009 0.8878 0.7990 0.8971
"""

_F1 = """
Jaccard 0.052378  IJ 0.042669  Cosine 0.061102  Pearson 0.056653  PSS 0.061638
TA 0.061205  CosineJ 0.061434  PearsonJ 0.057133  PSSJ 0.061781  TAJ 0.061537
CosineIJ 0.060822  PearsonIJ 0.056386  PSSIJ 0.061510  TAIJ 0.060967
"""


def _parse(block: str) -> dict[str, tuple[tuple[float, ...], float]]:
    out = {}
    for line in block.strip().splitlines():
        name, *nums = line.split()
        vals = tuple(float(x) for x in nums)
        out[Measure.parse(name).value] = (vals[:-1], vals[-1])
    return out


PUBLISHED: dict[str, dict[str, tuple[tuple[float, ...], float]]] = {
    "mae": _parse(_MAE),
    "precision": _parse(_PRECISION),
    "recall": _parse(_RECALL),
}
"""metric -> measure -> (per-ratio cells, average)."""

_f1_tokens = _F1.split()
PUBLISHED_F1 = {Measure.parse(n).value: float(v) for n, v in zip(_f1_tokens[::2], _f1_tokens[1::2])}

CALIBRATION_MEASURES = (
    Measure.JACCARD,
    Measure.COSINE,
    Measure.PSS,
    Measure.TA,
    Measure.COSINE_J,
    Measure.TA_J,
)
MAE_BAND = 0.05
# (better, worse) pairs whose average-MAE order the reproduction should keep
ORDERINGS = ((Measure.TA_J, Measure.PEARSON), (Measure.COSINE_J, Measure.COSINE))


def reference_report() -> MetricReport:
    """Published cells as a report with a single fold per cell.

    Derived averages re-round to the published average column.
    """
    measures = [m.value for m in Measure]
    fold_values = {
        metric: {m: [[v] for v in table[m][0]] for m in measures}
        for metric, table in PUBLISHED.items()
    }
    return MetricReport(
        measures=measures,
        ratios=list(PUBLISHED_RATIOS),
        fold_values=fold_values,
        scale=MOVIELENS_SCALE,
        provenance={"source": "published MovieLens-100K benchmark tables"},
    )


@dataclass
class Calibration:
    """Average-MAE comparison of reproduction runs (one per ``k``) with the published values."""

    rows: dict[int, dict[str, dict[str, float | None]]]
    orderings: dict[int, dict[str, bool | None]]
    band: float = MAE_BAND
    notes: list[str] = field(default_factory=list)

    def in_band(self, k: int) -> bool:
        return all(r["within_band"] for r in self.rows[k].values())

    def orderings_hold(self, k: int) -> bool:
        return all(v is True for v in self.orderings[k].values())

    @property
    def passing_ks(self) -> list[int]:
        return [k for k in sorted(self.rows) if self.in_band(k) and self.orderings_hold(k)]

    @property
    def passed(self) -> bool:
        return bool(self.passing_ks)

    def max_gap(self, k: int) -> float:
        return max(abs(r["gap"]) for r in self.rows[k].values() if r["gap"] is not None)

    def to_dict(self) -> dict[str, Any]:
        return {
            "band": self.band,
            "passed": self.passed,
            "passing_ks": self.passing_ks,
            "rows": {str(k): v for k, v in self.rows.items()},
            "orderings": {str(k): v for k, v in self.orderings.items()},
            "max_abs_gap": {str(k): self.max_gap(k) for k in self.rows},
            "notes": list(self.notes),
        }

    def to_markdown(self) -> str:
        lines = ["# MAE calibration", ""]
        lines.append(f"Band: published average MAE +/- {self.band}.")
        lines.append("")
        for k in sorted(self.rows):
            verdict = "within band" if self.in_band(k) else f"outside band (max gap {self.max_gap(k):+.4f})"
            lines.append(f"## k = {k}: {verdict}")
            lines.append("")
            lines.append("| Measure | Reproduced | Published | Gap | In band |")
            lines.append("|---|---:|---:|---:|:---:|")
            for m, r in self.rows[k].items():
                rep = "" if r["reproduced"] is None else f"{r['reproduced']:.4f}"
                gap = "" if r["gap"] is None else f"{r['gap']:+.4f}"
                lines.append(f"| {m} | {rep} | {r['published']:.4f} | {gap} | {'yes' if r['within_band'] else 'no'} |")
            lines.append("")
            for name, ok in self.orderings[k].items():
                lines.append(f"- {name}: {'holds' if ok else 'fails' if ok is False else 'undefined'}")
            lines.append("")
        if self.notes:
            lines.extend(f"- {n}" for n in self.notes)
            lines.append("")
        return "\n".join(lines)


def calibrate(reports: Mapping[int, MetricReport], band: float = MAE_BAND, notes=()) -> Calibration:
    """Compare each report's average MAE with the published averages."""
    rows: dict[int, dict[str, dict[str, float | None]]] = {}
    orderings: dict[int, dict[str, bool | None]] = {}
    for k, report in sorted(reports.items()):
        krows = {}
        for m in CALIBRATION_MEASURES:
            published = PUBLISHED["mae"][m.value][1]
            got = report.average("mae", m) if m.value in report.measures else None
            gap = None if got is None else got - published
            krows[m.value] = {
                "reproduced": got,
                "published": published,
                "gap": gap,
                "within_band": gap is not None and abs(gap) <= band,
            }
        rows[k] = krows
        korder = {}
        for better, worse in ORDERINGS:
            a = report.average("mae", better) if better.value in report.measures else None
            b = report.average("mae", worse) if worse.value in report.measures else None
            korder[f"{better.value} < {worse.value}"] = None if a is None or b is None else a < b
        orderings[k] = korder
    return Calibration(rows, orderings, band, list(notes))


@dataclass(frozen=True)
class TrendCheck:
    """Precision gap ``first - second`` at each ratio of interest."""

    ratios: tuple[float, ...]
    gaps: tuple[float | None, ...]

    @property
    def sign_change(self) -> bool:
        g = [x for x in self.gaps if x is not None]
        return any(a > 0 >= b for a, b in zip(g, g[1:]))

    @property
    def shrinking(self) -> bool:
        g = [x for x in self.gaps if x is not None]
        return len(g) >= 2 and all(b < a for a, b in zip(g, g[1:]))

    @property
    def holds(self) -> bool:
        return self.sign_change or self.shrinking

    def describe(self) -> str:
        cells = ", ".join(
            f"{ratio_label(r)}: {'n/a' if g is None else f'{g:+.5f}'}" for r, g in zip(self.ratios, self.gaps)
        )
        return f"{cells} -> {'declining' if self.holds else 'not declining'}"


def precision_gap_trend(
    report: MetricReport,
    first: Measure | str = Measure.IJ,
    second: Measure | str = Measure.JACCARD,
    ratios=(0.6, 0.7, 0.8, 0.9),
) -> TrendCheck:
    """Whether ``first`` loses precision ground to ``second`` as the test ratio grows."""
    p1, p2 = report.row("precision", str(first)), report.row("precision", str(second))
    gaps = []
    for r in ratios:
        i = report.ratios.index(r)
        gaps.append(None if p1[i] is None or p2[i] is None else p1[i] - p2[i])
    return TrendCheck(tuple(ratios), tuple(gaps))


def dump_calibration(cal: Calibration) -> bytes:
    return (json.dumps(cal.to_dict(), indent=2, sort_keys=True) + "\n").encode()
