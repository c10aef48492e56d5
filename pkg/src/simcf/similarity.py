"""User-user similarity measures and their Jaccard/IJ products.

Every measure is available two ways:

* as a pure function ``measure(ctx, u1, u2) -> float`` that walks the
  co-rated items of one pair in ascending item order, and
* as a dense |U| x |U| matrix from :meth:`SimilarityContext.matrix`, which is
  what the KNN engine consumes.

Both routes agree to rounding; combined measures are the exact elementwise
product of their two factors in either route.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ratings import MatrixStats, RatingMatrix, RatingScale, co_rated, compute_stats

__all__ = [
    "BASE_MEASURES",
    "COMBINED_MEASURES",
    "CombinedMeasure",
    "Measure",
    "SimilarityContext",
    "SingularityTables",
    "build_singularity_tables",
    "combine",
    "cosine",
    "ij",
    "jaccard",
    "pearson",
    "proximity",
    "pss",
    "registry",
    "significance",
    "singularity",
    "ta",
]


class Measure(str, enum.Enum):
    JACCARD = "Jaccard"
    IJ = "IJ"
    COSINE = "Cosine"
    PEARSON = "Pearson"
    PSS = "PSS"
    TA = "TA"
    COSINE_J = "CosineJ"
    PEARSON_J = "PearsonJ"
    PSS_J = "PSSJ"
    TA_J = "TAJ"
    COSINE_IJ = "CosineIJ"
    PEARSON_IJ = "PearsonIJ"
    PSS_IJ = "PSSIJ"
    TA_IJ = "TAIJ"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: "str | Measure") -> "Measure":
        if isinstance(name, Measure):
            return name
        key = str(name).strip().lower()
        for m in cls:
            if m.value.lower() == key:
                return m
        valid = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown measure {name!r}; valid measures: {valid}")

    @property
    def is_combined(self) -> bool:
        return self in _FACTORS

    @property
    def factors(self) -> tuple["Measure", "Measure"]:
        """``(set_measure, numeric)`` for a combined measure."""
        return _FACTORS[self]


SET_MEASURES = (Measure.JACCARD, Measure.IJ)
NUMERIC_MEASURES = (Measure.COSINE, Measure.PEARSON, Measure.PSS, Measure.TA)
BASE_MEASURES = SET_MEASURES + NUMERIC_MEASURES

_FACTORS = {
    Measure(num.value + ("J" if s is Measure.JACCARD else "IJ")): (s, num)
    for s in SET_MEASURES
    for num in NUMERIC_MEASURES
}
COMBINED_MEASURES = tuple(m for m in Measure if m in _FACTORS)


@dataclass(frozen=True, eq=False)
class SingularityTables:
    """Per-item positive / negative / empty singularity, indexed by ``item - 1``."""

    positive: np.ndarray
    negative: np.ndarray
    empty: np.ndarray


def build_singularity_tables(train: RatingMatrix, scale: RatingScale | None = None) -> SingularityTables:
    """One minus the fraction of the user population in each rating state.

    A rating is positive when it exceeds the scale median ``r_m``, negative
    otherwise.  The population is the declared user universe.
    """
    scale = scale or train.scale
    nu, nv = train.shape
    i_idx = train.items - 1
    pos = np.bincount(i_idx, weights=train.values > scale.r_m, minlength=nv)
    raters = np.bincount(i_idx, minlength=nv)
    neg = raters - pos
    if nu == 0:
        ones = np.ones(nv)
        return SingularityTables(ones, ones.copy(), np.zeros(nv))
    tables = SingularityTables(
        positive=1.0 - pos / nu,
        negative=1.0 - neg / nu,
        empty=1.0 - (nu - raters) / nu,
    )
    for arr in (tables.positive, tables.negative, tables.empty):
        arr.setflags(write=False)
    return tables


def proximity(r1: float, r2: float) -> float:
    return 1.0 - 1.0 / (1.0 + math.exp(-abs(r1 - r2)))


def significance(r1: float, r2: float, r_m: float) -> float:
    return 1.0 / (1.0 + math.exp(-abs(r1 - r_m) * abs(r2 - r_m)))


def singularity(r1: float, r2: float, item_mean: float) -> float:
    return 1.0 - 1.0 / (1.0 + math.exp(-abs((r1 + r2) / 2 - item_mean)))


class SimilarityContext:
    """A training matrix bundled with the tables the measures read.

    The dense similarity matrices are memoised per measure.  The memo is a
    transparent cache: it only stores what :meth:`matrix` would compute, and
    fills are serialised by a lock so concurrent readers are safe.

    ``full_norms`` makes cosine and TA take vector lengths over each user's
    full rating vector instead of over the co-rated items only; the dot
    product is over co-rated items either way.
    """

    def __init__(
        self,
        train: RatingMatrix,
        relevance_threshold: float = 4.0,
        full_norms: bool = False,
        stats: MatrixStats | None = None,
        singularities: SingularityTables | None = None,
    ):
        self.train = train
        self.scale = train.scale
        self.stats = stats if stats is not None else compute_stats(train, relevance_threshold)
        self.singularities = singularities if singularities is not None else build_singularity_tables(train)
        self.full_norms = full_norms
        means = np.where(np.isnan(self.stats.item_means), self.scale.r_m, self.stats.item_means)
        means.setflags(write=False)
        self.item_means = means
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.RLock()

    @property
    def num_users(self) -> int:
        return self.train.num_users

    def user_mean(self, user: int) -> float:
        return float(self.stats.user_means[user - 1])

    def matrix(self, measure: Measure | str) -> np.ndarray:
        """Read-only |U| x |U| similarity matrix (row/column ``user - 1``)."""
        measure = Measure.parse(measure)
        return self._cached(measure.value, lambda: _MATRIX_BUILDERS[measure](self))

    def _cached(self, key: str, build: Callable[[], np.ndarray]) -> np.ndarray:
        with self._lock:
            out = self._cache.get(key)
            if out is None:
                out = build()
                out.setflags(write=False)
                self._cache[key] = out
            return out

    def _dense(self):
        vals, mask = self.train.dense
        return vals, mask.astype(np.float64)


# -- pairwise route ---------------------------------------------------------


def jaccard(ctx: SimilarityContext, u1: int, u2: int) -> float:
    c = co_rated(ctx.train, u1, u2)
    if c.n_union == 0:
        return 0.0
    return len(c.pairs) / c.n_union


def _clip(x: float, lo: float = -1.0, hi: float = 1.0) -> float:
    return min(max(x, lo), hi)


def _full_square_norm(ctx: SimilarityContext, user: int) -> float:
    s = 0.0
    ratings = ctx.train.user_ratings(user)
    for j in sorted(ratings):
        s += ratings[j] * ratings[j]
    return s


def cosine(ctx: SimilarityContext, u1: int, u2: int) -> float:
    c = co_rated(ctx.train, u1, u2)
    if not c.pairs:
        return 0.0
    dot = s1 = s2 = 0.0
    for _, a, b in c.pairs:
        dot += a * b
        s1 += a * a
        s2 += b * b
    if ctx.full_norms:
        s1 = _full_square_norm(ctx, u1)
        s2 = _full_square_norm(ctx, u2)
    if s1 == 0.0 or s2 == 0.0:
        return 0.0
    return _clip(dot / (math.sqrt(s1) * math.sqrt(s2)))


def pearson(ctx: SimilarityContext, u1: int, u2: int) -> float:
    """Correlation over co-rated items, each user centred by their overall mean."""
    c = co_rated(ctx.train, u1, u2)
    if not c.pairs:
        return 0.0
    m1, m2 = ctx.user_mean(u1), ctx.user_mean(u2)
    num = s1 = s2 = 0.0
    for _, a, b in c.pairs:
        d1 = a - m1
        d2 = b - m2
        num += d1 * d2
        s1 += d1 * d1
        s2 += d2 * d2
    if s1 == 0.0 or s2 == 0.0:
        return 0.0
    return _clip(num / (math.sqrt(s1) * math.sqrt(s2)))


def pss(ctx: SimilarityContext, u1: int, u2: int) -> float:
    c = co_rated(ctx.train, u1, u2)
    r_m = ctx.scale.r_m
    total = 0.0
    for j, a, b in c.pairs:
        total += proximity(a, b) * significance(a, b, r_m) * singularity(a, b, ctx.item_means[j - 1])
    return total


def _ta_value(dot: float, n1: float, n2: float) -> float:
    if dot >= 0:
        if n1 <= n2:
            return dot * dot / (n1 * (n2 * n2 * n2))
        return dot * dot / ((n1 * n1 * n1) * n2)
    if n1 <= n2:
        return dot / (n2 * n2)
    return dot / (n1 * n1)


def ta(ctx: SimilarityContext, u1: int, u2: int) -> float:
    """Triangle-area refinement of cosine over the co-rated items."""
    c = co_rated(ctx.train, u1, u2)
    if not c.pairs:
        return 0.0
    dot = s1 = s2 = 0.0
    for _, a, b in c.pairs:
        dot += a * b
        s1 += a * a
        s2 += b * b
    if ctx.full_norms:
        s1 = _full_square_norm(ctx, u1)
        s2 = _full_square_norm(ctx, u2)
    if s1 == 0.0 or s2 == 0.0:
        return 0.0
    return _clip(_ta_value(dot, math.sqrt(s1), math.sqrt(s2)))


def ij(ctx: SimilarityContext, u1: int, u2: int) -> float:
    """Singularity-weighted Jaccard.

    Shared items contribute to both numerator and denominator according to
    whether the two ratings agree positive, agree negative or disagree;
    items rated by only one of the users add to the denominator only.
    """
    a = ctx.train.user_ratings(u1)
    b = ctx.train.user_ratings(u2)
    r_m = ctx.scale.r_m
    sp, sn, se = ctx.singularities.positive, ctx.singularities.negative, ctx.singularities.empty
    num = 0.0
    for j in sorted(a.keys() & b.keys()):
        pa, pb = a[j] > r_m, b[j] > r_m
        k = j - 1
        if pa and pb:
            num += sp[k]
        elif not pa and not pb:
            num += sn[k]
        else:
            num += math.sqrt(sp[k] * sn[k])
    extra = 0.0
    for j in sorted(a.keys() ^ b.keys()):
        v = a[j] if j in a else b[j]
        k = j - 1
        if v > r_m:
            extra += math.sqrt(sp[k] * se[k])
        else:
            extra += math.sqrt(sn[k] * se[k])
    den = num + extra
    if den == 0.0:
        return 0.0
    return num / den


_BASE_FUNCS: dict[Measure, Callable[[SimilarityContext, int, int], float]] = {
    Measure.JACCARD: jaccard,
    Measure.IJ: ij,
    Measure.COSINE: cosine,
    Measure.PEARSON: pearson,
    Measure.PSS: pss,
    Measure.TA: ta,
}


@dataclass(frozen=True)
class CombinedMeasure:
    """Product of a set-overlap measure and a numeric measure."""

    set_measure: Measure
    numeric: Measure

    @property
    def id(self) -> Measure:
        suffix = "J" if self.set_measure is Measure.JACCARD else "IJ"
        return Measure(self.numeric.value + suffix)

    def __call__(self, ctx: SimilarityContext, u1: int, u2: int) -> float:
        return _BASE_FUNCS[self.set_measure](ctx, u1, u2) * _BASE_FUNCS[self.numeric](ctx, u1, u2)


def combine(set_measure: Measure | str, numeric: Measure | str) -> CombinedMeasure:
    set_measure, numeric = Measure.parse(set_measure), Measure.parse(numeric)
    if set_measure not in SET_MEASURES:
        raise ValueError(f"{set_measure} is not a set measure; expected Jaccard or IJ")
    if numeric not in NUMERIC_MEASURES:
        raise ValueError(f"{numeric} is not a numeric measure; expected Cosine, Pearson, PSS or TA")
    return CombinedMeasure(set_measure, numeric)


def registry() -> dict[Measure, Callable[[SimilarityContext, int, int], float]]:
    """All 14 measures in declaration order."""
    out: dict[Measure, Callable] = {}
    for m in Measure:
        out[m] = combine(*m.factors) if m.is_combined else _BASE_FUNCS[m]
    return out


# -- dense route ------------------------------------------------------------


def _mirror_upper(m: np.ndarray) -> np.ndarray:
    """Copy the upper triangle onto the lower one so the result is exactly symmetric."""
    lower = np.tril_indices(m.shape[0], -1)
    m[lower] = m.T[lower]
    return m


def _safe_div(num: np.ndarray, den: np.ndarray, ok: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=ok)
    return out


def _intersection(ctx: SimilarityContext) -> np.ndarray:
    def build():
        _, b = ctx._dense()
        return b @ b.T

    return ctx._cached("_inter", build)


def _raw_products(ctx: SimilarityContext):
    """Dot products over co-rated items and the squared lengths of both sides.

    ``sq[a, b]`` is user a's squared length, taken over the items a shares
    with b, or over all of a's items under ``full_norms``.
    """

    def dot():
        r, _ = ctx._dense()
        return r @ r.T

    def sq():
        r, b = ctx._dense()
        if ctx.full_norms:
            full = (r * r).sum(axis=1)
            return np.repeat(full[:, None], len(full), axis=1)
        return (r * r) @ b.T

    return ctx._cached("_dot", dot), ctx._cached("_sq", sq)


def _jaccard_matrix(ctx: SimilarityContext) -> np.ndarray:
    inter = _intersection(ctx)
    n = ctx.stats.user_counts.astype(np.float64)
    union = n[:, None] + n[None, :] - inter
    return _mirror_upper(_safe_div(inter, union, union > 0))


def _cosine_matrix(ctx: SimilarityContext) -> np.ndarray:
    dot, sq = _raw_products(ctx)
    inter = _intersection(ctx)
    s1, s2 = sq, sq.T
    ok = (inter > 0) & (s1 > 0) & (s2 > 0)
    out = _safe_div(dot, np.sqrt(s1) * np.sqrt(s2), ok)
    return _mirror_upper(np.clip(out, -1.0, 1.0))


def _pearson_matrix(ctx: SimilarityContext) -> np.ndarray:
    r, b = ctx._dense()
    means = ctx.stats.user_means
    c = np.where(b > 0, r - np.nan_to_num(means)[:, None], 0.0)
    num = c @ c.T
    csq = (c * c) @ b.T
    inter = _intersection(ctx)
    ok = (inter > 0) & (csq > 0) & (csq.T > 0)
    out = _safe_div(num, np.sqrt(csq) * np.sqrt(csq.T), ok)
    return _mirror_upper(np.clip(out, -1.0, 1.0))


def _ta_matrix(ctx: SimilarityContext) -> np.ndarray:
    dot, sq = _raw_products(ctx)
    inter = _intersection(ctx)
    n1, n2 = np.sqrt(sq), np.sqrt(sq.T)
    ok = (inter > 0) & (sq > 0) & (sq.T > 0)
    first_shorter = n1 <= n2
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(first_shorter, dot * dot / (n1 * (n2 * n2 * n2)), dot * dot / ((n1 * n1 * n1) * n2))
        neg = np.where(first_shorter, dot / (n2 * n2), dot / (n1 * n1))
    out = np.where(ok, np.where(dot >= 0, pos, neg), 0.0)
    return _mirror_upper(np.clip(out, -1.0, 1.0))


def _pss_matrix(ctx: SimilarityContext) -> np.ndarray:
    """Scatter each item's rater-pair terms into the matrix, items ascending."""
    train = ctx.train
    nu = train.num_users
    out = np.zeros((nu, nu))
    r_m = ctx.scale.r_m
    order = np.lexsort((train.users, train.items))
    items, users, vals = train.items[order], train.users[order] - 1, train.values[order]
    bounds = np.flatnonzero(np.diff(items)) + 1
    for idx in np.split(np.arange(len(items)), bounds):
        if len(idx) == 0:
            continue
        j = items[idx[0]]
        u, v = users[idx], vals[idx]
        prox = 1.0 - 1.0 / (1.0 + np.exp(-np.abs(v[:, None] - v[None, :])))
        dm = np.abs(v - r_m)
        sig = 1.0 / (1.0 + np.exp(-dm[:, None] * dm[None, :]))
        sing = 1.0 - 1.0 / (1.0 + np.exp(-np.abs((v[:, None] + v[None, :]) / 2 - ctx.item_means[j - 1])))
        out[np.ix_(u, u)] += prox * sig * sing
    return _mirror_upper(out)


def _ij_matrix(ctx: SimilarityContext) -> np.ndarray:
    r, b = ctx._dense()
    r_m = ctx.scale.r_m
    p = ((r > r_m) & (b > 0)).astype(np.float64)
    n = ((r <= r_m) & (b > 0)).astype(np.float64)
    sp, sn, se = ctx.singularities.positive, ctx.singularities.negative, ctx.singularities.empty
    g = np.sqrt(sp * sn)
    num = (p * sp) @ p.T + (n * sn) @ n.T + (p * g) @ n.T + (n * g) @ p.T
    w = p * np.sqrt(sp * se) + n * np.sqrt(sn * se)
    one_sided = w @ (1.0 - b).T
    den = num + (one_sided + one_sided.T)
    return _mirror_upper(_safe_div(num, den, den > 0))


def _combined_builder(m: Measure):
    s, num = m.factors

    def build(ctx: SimilarityContext) -> np.ndarray:
        return ctx.matrix(s) * ctx.matrix(num)

    return build


_MATRIX_BUILDERS: dict[Measure, Callable[[SimilarityContext], np.ndarray]] = {
    Measure.JACCARD: _jaccard_matrix,
    Measure.IJ: _ij_matrix,
    Measure.COSINE: _cosine_matrix,
    Measure.PEARSON: _pearson_matrix,
    Measure.PSS: _pss_matrix,
    Measure.TA: _ta_matrix,
    **{m: _combined_builder(m) for m in COMBINED_MEASURES},
}
