import numpy as np
import pytest

from simcf.evaluation import (
    DEFAULT_RATIOS,
    ExperimentConfig,
    evaluate_split,
    mae,
    precision_recall,
    run_experiment,
    sweep_k,
)
from simcf.knn import predict_all, recommend_all
from simcf.ratings import Rating, RatingMatrix, split_fold
from simcf.report import UndefinedMetricError
from simcf.similarity import Measure, SimilarityContext


def random_matrix(seed, nu=12, nv=15, density=0.5):
    rng = np.random.default_rng(seed)
    rows = [(u, i, int(rng.integers(1, 6))) for u in range(1, nu + 1) for i in range(1, nv + 1) if rng.random() < density]
    return RatingMatrix.from_ratings([Rating(*r) for r in rows], num_users=nu, num_items=nv)


class TestMetrics:
    def test_mae(self):
        assert mae([(3, 4), (5, 5)]) == 0.5

    def test_mae_exact(self):
        assert mae([(2, 2), (4.5, 4.5)]) == 0

    def test_mae_naive_loop(self):
        rng = np.random.default_rng(0)
        pairs = rng.uniform(1, 5, size=(20, 2))
        total = 0.0
        for p, a in pairs:
            total += abs(p - a)
        assert mae(pairs) == pytest.approx(total / 20, abs=1e-15)

    def test_mae_empty(self):
        with pytest.raises(UndefinedMetricError):
            mae([])

    def test_precision_recall(self):
        assert precision_recall("abcd", "be") == (0.25, 0.5)
        assert precision_recall({1, 2}, {1, 2}) == (1, 1)

    def test_skip(self):
        assert precision_recall({1}, set()) is None
        assert precision_recall(set(), {1}) is None


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig()
        assert c.ratios == DEFAULT_RATIOS and c.n_folds == 5 and len(c.measures) == 14 and c.k == 40

    @pytest.mark.parametrize(
        "kw",
        [{"ratios": (0.0,)}, {"ratios": (1.0,)}, {"ratios": ()}, {"n_folds": 0}, {"k": 0}, {"measures": ()}, {"relevance_threshold": 9}],
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)

    def test_unknown_measure(self):
        with pytest.raises(ValueError, match="TAIJ"):
            ExperimentConfig(measures=("nope",))

    def test_dict_roundtrip(self):
        c = ExperimentConfig(ratios=(0.2, 0.4), measures=("taj", "PSS"), k=7, seed=3, full_norms=True)
        assert ExperimentConfig.from_dict(c.to_dict()) == c


def test_split_cells_match_unit_oracles():
    matrix = random_matrix(1, nu=6, nv=8, density=0.7)
    config = ExperimentConfig(ratios=(0.3,), n_folds=1, measures=("Cosine",), k=2)
    split = split_fold(matrix, 0.3, 0, config.seed)
    res = evaluate_split(split, config)[2][Measure.COSINE]

    ctx = SimilarityContext(split.train)
    (table,) = predict_all(ctx, "Cosine", 2)
    pairs = [(table.values[r.user - 1, r.item - 1], r.value) for r in split.test]
    assert res.mae == mae(pairs)

    lists = recommend_all(ctx, table)
    scores = []
    for u in range(1, 7):
        relevant = {r.item for r in split.test if r.user == u and r.value >= 4}
        pr = precision_recall(lists[u - 1].item_ids(), relevant)
        if pr is not None:
            scores.append(pr)
    assert res.users_scored == len(scores)
    assert res.precision == pytest.approx(np.mean([p for p, _ in scores]), abs=1e-15)
    assert res.recall == pytest.approx(np.mean([r for _, r in scores]), abs=1e-15)


def test_report_shape_and_averages():
    matrix = random_matrix(2)
    config = ExperimentConfig(ratios=(0.2, 0.5), n_folds=2, measures=("TAJ", "PSS", "IJ"), k=4)
    report = run_experiment(matrix, config)
    assert report.measures == ["TAJ", "PSS", "IJ"]
    assert report.ratios == [0.2, 0.5]
    for m in report.measures:
        folds = report.fold_values["mae"][m]
        assert len(folds) == 2 and all(len(f) == 2 for f in folds)
        cells = report.row("mae", m)
        assert cells[0] == pytest.approx(np.mean(folds[0]), abs=1e-12)
        assert report.average("mae", m) == pytest.approx(np.mean(cells), abs=1e-12)
    assert report.provenance["config"]["k"] == 4
    assert report.provenance["dataset_hash"] == matrix.content_hash()


def test_deterministic_reports():
    matrix = random_matrix(3)
    config = ExperimentConfig(ratios=(0.3,), n_folds=2, measures=("CosineJ", "Pearson"), k=3)
    assert run_experiment(matrix, config).to_dict() == run_experiment(matrix, config).to_dict()


def test_measure_subset_leaves_cells_unchanged():
    matrix = random_matrix(4)
    big = run_experiment(matrix, ExperimentConfig(ratios=(0.3,), n_folds=2, measures=("TA", "PSSIJ", "Jaccard"), k=3))
    small = run_experiment(matrix, ExperimentConfig(ratios=(0.3,), n_folds=2, measures=("PSSIJ",), k=3))
    for metric in ("mae", "precision", "recall"):
        assert big.fold_values[metric]["PSSIJ"] == small.fold_values[metric]["PSSIJ"]


def test_recommendation_off_keeps_mae():
    matrix = random_matrix(5)
    config = ExperimentConfig(ratios=(0.4,), n_folds=2, measures=("PearsonJ",), k=5)
    on = run_experiment(matrix, config)
    off = run_experiment(matrix, config, recommendation=False)
    assert on.fold_values["mae"] == off.fold_values["mae"]
    assert off.row("precision", "PearsonJ") == [None]


def test_sweep_matches_single_k_runs():
    matrix = random_matrix(6)
    config = ExperimentConfig(ratios=(0.2,), n_folds=2, measures=("TAJ", "Cosine"))
    reports = sweep_k(matrix, config, [2, 5])
    for k in (2, 5):
        single = run_experiment(matrix, ExperimentConfig(**{**config.__dict__, "k": k}))
        assert reports[k].to_dict() == single.to_dict()


def test_parallel_equals_serial():
    matrix = random_matrix(7)
    config = ExperimentConfig(ratios=(0.2, 0.6), n_folds=2, measures=("PSSJ",), k=3)
    assert run_experiment(matrix, config, jobs=2).to_dict() == run_experiment(matrix, config).to_dict()


def test_gap_recorded_not_zero():
    # nothing reaches the relevance threshold, so precision and recall are undefined
    rows = [Rating(u, i, 1 + (u * i) % 3) for u in range(1, 6) for i in range(1, 6)]
    matrix = RatingMatrix.from_ratings(rows)
    report = run_experiment(matrix, ExperimentConfig(ratios=(0.4,), n_folds=1, measures=("Jaccard",), k=2))
    assert report.row("mae", "Jaccard")[0] is not None
    assert report.row("precision", "Jaccard") == [None]
    assert ("precision", "Jaccard", 0.4, 0) in report.gaps()
