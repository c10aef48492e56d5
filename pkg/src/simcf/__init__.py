"""Neighbourhood collaborative filtering with Jaccard-combined similarity measures."""

__version__ = "0.1.0"

from .ratings import (  # noqa: E402
    MOVIELENS_SCALE,
    Rating,
    RatingMatrix,
    RatingScale,
    compute_stats,
    load_ratings,
    split_folds,
)
from .similarity import Measure, SimilarityContext, combine, registry  # noqa: E402
from .knn import neighbors, predict, recommend, recommendation_count  # noqa: E402
from .evaluation import ExperimentConfig, run_experiment, sweep_k  # noqa: E402
from .report import MetricReport, emit_report, load_report  # noqa: E402

__all__ = [
    "MOVIELENS_SCALE",
    "ExperimentConfig",
    "Measure",
    "MetricReport",
    "Rating",
    "RatingMatrix",
    "RatingScale",
    "SimilarityContext",
    "combine",
    "compute_stats",
    "emit_report",
    "load_ratings",
    "load_report",
    "neighbors",
    "predict",
    "recommend",
    "recommendation_count",
    "registry",
    "run_experiment",
    "split_folds",
    "sweep_k",
]
