"""User-based KNN: neighbour selection, rating prediction, top-N lists.

Prediction is the mean-centred weighted average

    pred(u, i) = mean(u) + sum_n s(u, n) * (r(n, i) - mean(n)) / sum_n |s(u, n)|

over the neighbours ``n`` of ``u`` (one list per target user, reused for
every item) that rated ``i``.  Sums are accumulated neighbour by neighbour
in list order, so the batched and the single-user paths produce the same
bits, and the tables for several ``k`` come out of a single pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numba
import numpy as np

from .ratings import MatrixStats
from .similarity import Measure, SimilarityContext

__all__ = [
    "NeighborList",
    "Prediction",
    "PredictionTable",
    "RecommendationList",
    "neighbors",
    "predict",
    "predict_all",
    "recommend",
    "recommendation_count",
]

DEFAULT_K = 40


@dataclass(frozen=True)
class NeighborList:
    target: int
    entries: tuple[tuple[int, float], ...]
    k: int

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def users(self) -> list[int]:
        return [u for u, _ in self.entries]


@dataclass(frozen=True)
class Prediction:
    user: int
    item: int
    value: float
    support: int


@dataclass(frozen=True)
class RecommendationList:
    user: int
    items: tuple[tuple[int, float], ...]

    @property
    def count(self) -> int:
        return len(self.items)

    def item_ids(self) -> list[int]:
        return [i for i, _ in self.items]


def _check_user(ctx: SimilarityContext, user: int):
    if not 1 <= user <= ctx.num_users:
        raise ValueError(f"unknown user {user}; universe has {ctx.num_users} users")


def _rank(ctx: SimilarityContext, measure: Measure, rows: np.ndarray, k: int, allow_negative: bool):
    """Neighbour indices and weights for the given target rows.

    Returns ``(idx, weights)`` of shape (len(rows), k).  Slots past the
    last qualifying neighbour hold index 0 and weight 0.
    """
    sims = ctx.matrix(measure)[rows]
    key = np.abs(sims) if allow_negative else sims.copy()
    key[np.arange(len(rows)), rows] = -np.inf
    key[~(key > 0)] = -np.inf
    k = min(k, ctx.num_users)
    # stable sort keeps equal similarities in ascending user order
    order = np.argsort(-key, axis=1, kind="stable")[:, :k]
    taken = np.take_along_axis(key, order, axis=1)
    valid = np.isfinite(taken)
    weights = np.where(valid, np.take_along_axis(sims, order, axis=1), 0.0)
    idx = np.where(valid, order, 0)
    return idx, weights


def neighbors(
    ctx: SimilarityContext, measure: Measure | str, target: int, k: int = DEFAULT_K, allow_negative: bool = False
) -> NeighborList:
    """The ``k`` most similar users with positive similarity.

    Ties are broken by ascending user id.  With ``allow_negative`` users are
    ranked by absolute similarity and negative ones are kept.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    _check_user(ctx, target)
    measure = Measure.parse(measure)
    idx, w = _rank(ctx, measure, np.array([target - 1]), k, allow_negative)
    entries = tuple((int(i) + 1, float(s)) for i, s in zip(idx[0], w[0]) if s != 0.0)
    return NeighborList(target, entries, k)


@dataclass(frozen=True, eq=False)
class PredictionTable:
    """Predictions for every (target row, item) cell under one measure and ``k``.

    ``values`` is clamped to the rating scale; ``support`` counts the
    neighbours that rated each item.  Rows follow ``users`` (1-based ids).
    """

    measure: Measure
    k: int
    users: np.ndarray
    values: np.ndarray
    support: np.ndarray


def _centered_rows(ctx: SimilarityContext):
    """CSR view of the train ratings, each centred by its user's mean."""

    def build():
        train = ctx.train
        indptr = np.zeros(train.num_users + 1, dtype=np.int64)
        np.cumsum(ctx.stats.user_counts, out=indptr[1:])
        centered = train.values - ctx.stats.user_means[train.users - 1]
        return indptr, train.items - 1, centered

    with ctx._lock:
        if "_csr" not in ctx._cache:
            ctx._cache["_csr"] = build()
        return ctx._cache["_csr"]


@numba.njit(cache=True)
def _accumulate(idx, w, indptr, item_idx, centered, start, stop, num, den, support):
    """Add ranks ``start:stop`` of every row's neighbour list into the sums.

    Each cell receives its neighbours' terms in rank order.
    """
    for row in range(idx.shape[0]):
        for t in range(start, stop):
            wt = w[row, t]
            if wt == 0.0:
                continue
            nb = idx[row, t]
            aw = abs(wt)
            for p in range(indptr[nb], indptr[nb + 1]):
                j = item_idx[p]
                num[row, j] += wt * centered[p]
                den[row, j] += aw
                support[row, j] += 1


def _baseline(ctx: SimilarityContext, rows: np.ndarray) -> np.ndarray:
    """Fallback prediction per target: own mean, else the global train mean."""
    means = ctx.stats.user_means[rows]
    g = ctx.stats.global_mean
    if math.isnan(g):
        g = ctx.scale.r_m
    return np.where(np.isnan(means), g, means)


def predict_all(
    ctx: SimilarityContext,
    measure: Measure | str,
    ks: int | Iterable[int] = DEFAULT_K,
    users: Sequence[int] | None = None,
    allow_negative: bool = False,
) -> Iterator[PredictionTable]:
    """Yield a :class:`PredictionTable` for each ``k`` in ascending order.

    Neighbour lists for a smaller ``k`` are prefixes of the list for a
    larger one, so all tables share one accumulation pass.
    """
    measure = Measure.parse(measure)
    ks = sorted({ks} if isinstance(ks, int) else set(ks))
    if not ks or ks[0] < 1:
        raise ValueError(f"k must be >= 1, got {ks}")
    if users is None:
        rows = np.arange(ctx.num_users)
    else:
        for u in users:
            _check_user(ctx, u)
        rows = np.asarray(users, dtype=np.int64) - 1

    idx, w = _rank(ctx, measure, rows, ks[-1], allow_negative)
    indptr, item_idx, centered = _centered_rows(ctx)
    base = _baseline(ctx, rows)
    has_ratings = ctx.stats.user_counts[rows] > 0

    shape = (len(rows), ctx.train.num_items)
    num = np.zeros(shape)
    den = np.zeros(shape)
    support = np.zeros(shape, dtype=np.int64)
    done = 0
    for k in ks:
        stop = min(k, idx.shape[1])
        _accumulate(idx, w, indptr, item_idx, centered, done, stop, num, den, support)
        done = stop
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.where(den > 0, base[:, None] + num / den, base[:, None])
        raw = np.where(has_ratings[:, None], raw, base[:, None])
        values = ctx.scale.clamp(raw)
        yield PredictionTable(measure, k, rows + 1, values, support.copy())


def predict(
    ctx: SimilarityContext,
    measure: Measure | str,
    target: int,
    item: int,
    k: int = DEFAULT_K,
    allow_negative: bool = False,
) -> Prediction:
    if not 1 <= item <= ctx.train.num_items:
        raise ValueError(f"unknown item {item}; universe has {ctx.train.num_items} items")
    _check_user(ctx, target)
    (table,) = predict_all(ctx, measure, k, users=[target], allow_negative=allow_negative)
    return Prediction(target, item, float(table.values[0, item - 1]), int(table.support[0, item - 1]))


def recommendation_count(stats: MatrixStats, target: int) -> int:
    """ceil(sr * (T - |I_target|)), at least 1.

    Evaluated in integer arithmetic so an integral product is never bumped
    up by rounding.
    """
    return int(_counts(stats, np.array([target - 1]))[0])


def _counts(stats: MatrixStats, rows: np.ndarray) -> np.ndarray:
    if stats.grid_size == 0:
        return np.ones(len(rows), dtype=np.int64)
    remaining = stats.rated_item_count - stats.user_counts[rows].astype(np.int64)
    c = -((-stats.relevant_count * remaining) // stats.grid_size)
    return np.maximum(1, c)


@numba.njit(cache=True)
def _top_n(values, support, candidate, counts):
    """Per-row recommended item indices as a CSR pair ``(indptr, items)``.

    Scored candidates (support > 0) come first, by value descending with
    ascending item index on ties; unscored candidates pad the list in item
    order.
    """
    n_rows, n_items = values.shape
    lengths = np.zeros(n_rows, dtype=np.int64)
    for row in range(n_rows):
        lengths[row] = min(counts[row], candidate[row].sum())
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(lengths)
    items = np.empty(indptr[-1], dtype=np.int64)
    scored = np.empty(n_items, dtype=np.int64)
    keys = np.empty(n_items)
    for row in range(n_rows):
        n_scored = 0
        for j in range(n_items):
            if candidate[row, j] and support[row, j] > 0:
                scored[n_scored] = j
                keys[n_scored] = -values[row, j]
                n_scored += 1
        order = np.argsort(keys[:n_scored], kind="mergesort")
        pos = indptr[row]
        end = indptr[row + 1]
        for q in range(n_scored):
            if pos == end:
                break
            items[pos] = scored[order[q]]
            pos += 1
        j = 0
        while pos < end:
            if candidate[row, j] and support[row, j] == 0:
                items[pos] = j
                pos += 1
            j += 1
    return indptr, items


def recommend_all(ctx: SimilarityContext, table: PredictionTable) -> list[RecommendationList]:
    """Recommendation lists for every row of a prediction table."""
    indptr, items = recommended_items(ctx, table)
    out = []
    for row, user in enumerate(table.users):
        picked = items[indptr[row]:indptr[row + 1]]
        vals = table.values[row, picked]
        out.append(RecommendationList(int(user), tuple(zip((picked + 1).tolist(), vals.tolist()))))
    return out


def recommended_items(ctx: SimilarityContext, table: PredictionTable) -> tuple[np.ndarray, np.ndarray]:
    """CSR ``(indptr, item_index)`` of the recommendation lists of ``table``'s rows."""
    rows = table.users - 1
    _, mask = ctx.train.dense
    candidate = (ctx.stats.item_counts > 0)[None, :] & ~mask[rows]
    counts = _counts(ctx.stats, rows)
    return _top_n(table.values, table.support, candidate, counts)


def recommend(
    ctx: SimilarityContext,
    measure: Measure | str,
    target: int,
    k: int = DEFAULT_K,
    allow_negative: bool = False,
) -> RecommendationList:
    """Top items the target has not rated, sized by :func:`recommendation_count`.

    Candidates are items with at least one training rating.  Items some
    neighbour rated come first, best prediction first; if they run out the
    list is padded with the remaining candidates in id order.
    """
    _check_user(ctx, target)
    (table,) = predict_all(ctx, measure, k, users=[target], allow_negative=allow_negative)
    return recommend_all(ctx, table)[0]
