"""Fold x ratio x measure experiment grid.

For every test ratio ``r`` and fold the ratings are split, a similarity
context is built on the training part, and each measure is scored twice:
MAE over every test rating (estimation) and per-user precision/recall of
the recommendation lists against the user's relevant test items
(recommendation).  Per-user precision/recall are averaged within a fold;
the report averages folds, then ratios.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .knn import DEFAULT_K, predict_all, recommended_items
from .ratings import MOVIELENS_SCALE, RatingMatrix, RatingScale, Split, split_fold
from .report import MetricReport, UndefinedMetricError, f1, imae
from .similarity import Measure, SimilarityContext

__all__ = [
    "DEFAULT_RATIOS",
    "ExperimentConfig",
    "evaluate_split",
    "f1",
    "imae",
    "mae",
    "precision_recall",
    "run_experiment",
    "sweep_k",
]

log = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def mae(predictions) -> float:
    """Mean absolute error of ``(predicted, actual)`` pairs."""
    arr = np.asarray(predictions, dtype=np.float64).reshape(-1, 2)
    if len(arr) == 0:
        raise UndefinedMetricError("MAE of an empty prediction list is undefined")
    return float(np.abs(arr[:, 0] - arr[:, 1]).mean())


def precision_recall(recommended: Iterable[int], relevant: Iterable[int]) -> tuple[float, float] | None:
    """``(precision, recall)``, or None when either set is empty (user skipped)."""
    recommended, relevant = set(recommended), set(relevant)
    if not recommended or not relevant:
        return None
    hits = len(recommended & relevant)
    return hits / len(recommended), hits / len(relevant)


@dataclass(frozen=True)
class ExperimentConfig:
    ratios: tuple[float, ...] = DEFAULT_RATIOS
    n_folds: int = 5
    measures: tuple[Measure, ...] = tuple(Measure)
    k: int = DEFAULT_K
    relevance_threshold: float = 4.0
    seed: int = 0
    scale: RatingScale = MOVIELENS_SCALE
    allow_negative: bool = False
    full_norms: bool = False

    def __post_init__(self):
        ratios = tuple(float(r) for r in self.ratios)
        if not ratios or any(not 0 < r < 1 for r in ratios):
            raise ValueError(f"ratios must be non-empty and inside (0, 1), got {ratios}")
        if self.n_folds < 1:
            raise ValueError(f"n_folds must be >= 1, got {self.n_folds}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        measures = tuple(Measure.parse(m) for m in self.measures)
        if not measures:
            raise ValueError("at least one measure is required")
        if not self.scale.contains(self.relevance_threshold):
            raise ValueError(f"relevance threshold {self.relevance_threshold} outside the rating scale")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "measures", measures)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["ratios"] = list(self.ratios)
        d["measures"] = [m.value for m in self.measures]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        d = dict(d)
        d["ratios"] = tuple(d["ratios"])
        d["measures"] = tuple(d["measures"])
        d["scale"] = RatingScale(**d["scale"])
        return cls(**d)


@dataclass
class FoldResult:
    mae: float | None
    precision: float | None = None
    recall: float | None = None
    users_scored: int = 0


def evaluate_split(
    split: Split,
    config: ExperimentConfig,
    ks: Sequence[int] | None = None,
    recommendation: bool = True,
) -> dict[int, dict[Measure, FoldResult]]:
    """Score every configured measure on one split, for each ``k`` in ``ks``."""
    ks = sorted(set(ks or [config.k]))
    ctx = SimilarityContext(split.train, config.relevance_threshold, config.full_norms)
    shape = split.train.shape
    if split.test:
        tu, ti, tv = (np.array(col) for col in list(zip(*split.test))[:3])
        tu, ti, tv = tu.astype(np.int64) - 1, ti.astype(np.int64) - 1, tv.astype(np.float64)
    else:
        tu = ti = np.zeros(0, dtype=np.int64)
        tv = np.zeros(0)
    relevant = np.zeros(shape, dtype=bool)
    keep = tv >= config.relevance_threshold
    relevant[tu[keep], ti[keep]] = True
    n_relevant = relevant.sum(axis=1)

    out: dict[int, dict[Measure, FoldResult]] = {k: {} for k in ks}
    for measure in config.measures:
        for table in predict_all(ctx, measure, ks, allow_negative=config.allow_negative):
            pred = table.values[tu, ti]
            res = FoldResult(mae(np.column_stack([pred, tv])) if len(tv) else None)
            if recommendation:
                indptr, items = recommended_items(ctx, table)
                lengths = np.diff(indptr)
                rows = np.repeat(np.arange(len(lengths)), lengths)
                hits = np.bincount(rows, weights=relevant[rows, items], minlength=len(lengths))
                scored = (lengths > 0) & (n_relevant > 0)
                if scored.any():
                    res.precision = float(np.mean(hits[scored] / lengths[scored]))
                    res.recall = float(np.mean(hits[scored] / n_relevant[scored]))
                res.users_scored = int(scored.sum())
            out[table.k][measure] = res
    return out


def _run_cell(args):
    matrix, ratio, fold, config, ks, recommendation = args
    start = time.perf_counter()
    split = split_fold(matrix, ratio, fold, config.seed)
    result = evaluate_split(split, config, ks, recommendation)
    log.info("r=%g fold=%d done in %.1fs", ratio, fold, time.perf_counter() - start)
    return result


def sweep_k(
    matrix: RatingMatrix,
    config: ExperimentConfig,
    ks: Iterable[int],
    jobs: int = 1,
    recommendation: bool = True,
) -> dict[int, MetricReport]:
    """One report per ``k``; all ``k`` share the splits and similarity matrices.

    Each report equals what :func:`run_experiment` gives for that ``k``.
    """
    ks = sorted(set(ks))
    cells = [(r, f) for r in config.ratios for f in range(config.n_folds)]
    tasks = [(matrix, r, f, config, ks, recommendation) for r, f in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    dataset_hash = matrix.content_hash()
    reports = {}
    for k in ks:
        fold_values: dict[str, dict[str, list[list[float | None]]]] = {
            metric: {m.value: [[None] * config.n_folds for _ in config.ratios] for m in config.measures}
            for metric in ("mae", "precision", "recall")
        }
        for (r, f), res in zip(cells, results):
            ri = config.ratios.index(r)
            for m, fr in res[k].items():
                fold_values["mae"][m.value][ri][f] = fr.mae
                fold_values["precision"][m.value][ri][f] = fr.precision
                fold_values["recall"][m.value][ri][f] = fr.recall
        cfg = ExperimentConfig(**{**config.__dict__, "k": k})
        provenance = {
            "config": cfg.to_dict(),
            "dataset_hash": dataset_hash,
            "dataset_shape": list(matrix.shape),
            "dataset_ratings": len(matrix),
            "recommendation": recommendation,
            "tool_version": __version__,
        }
        reports[k] = MetricReport(
            measures=[m.value for m in config.measures],
            ratios=list(config.ratios),
            fold_values=fold_values,
            scale=config.scale,
            provenance=provenance,
        )
    return reports


def run_experiment(
    matrix: RatingMatrix, config: ExperimentConfig, jobs: int = 1, recommendation: bool = True
) -> MetricReport:
    """Run the full grid for ``config.k``.

    With ``recommendation=False`` precision and recall are not computed;
    MAE cells are unaffected.
    """
    return sweep_k(matrix, config, [config.k], jobs, recommendation)[config.k]
