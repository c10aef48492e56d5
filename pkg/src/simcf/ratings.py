"""Rating storage, statistics and train/test splitting.

Ratings live in an immutable :class:`RatingMatrix` indexed by 1-based user
and item ids inside a declared universe (943 x 1682 for MovieLens-100K).
Users or items absent from a matrix keep their ids and simply have empty
rating sets.
"""

from __future__ import annotations

import hashlib
import io
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import BinaryIO, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

__all__ = [
    "MOVIELENS_100K_SHAPE",
    "MOVIELENS_SCALE",
    "CoRated",
    "MatrixStats",
    "Rating",
    "RatingMatrix",
    "RatingParseError",
    "RatingScale",
    "RatingValidationError",
    "Split",
    "co_rated",
    "compute_stats",
    "dump_ratings",
    "load_ratings",
    "split_fold",
    "split_folds",
]

MOVIELENS_100K_SHAPE = (943, 1682)


class RatingParseError(ValueError):
    """A record could not be parsed; ``lineno`` is 1-based."""

    def __init__(self, lineno: int, line: str, reason: str):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {reason}: {line!r}")


class RatingValidationError(ValueError):
    """A record parsed but violates the matrix invariants."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class RatingScale:
    """Closed rating interval with its median value ``r_m``.

    ``r_m`` defaults to the midpoint, which is the median of the possible
    values for any evenly stepped scale (3 for 1-5 stars).
    """

    r_min: float
    r_max: float
    r_m: float | None = None

    def __post_init__(self):
        if not self.r_min < self.r_max:
            raise ValueError(f"r_min must be < r_max, got {self.r_min}, {self.r_max}")
        if self.r_m is None:
            object.__setattr__(self, "r_m", (self.r_min + self.r_max) / 2)
        if not self.r_min <= self.r_m <= self.r_max:
            raise ValueError(f"r_m={self.r_m} outside [{self.r_min}, {self.r_max}]")

    def contains(self, value: float) -> bool:
        return self.r_min <= value <= self.r_max

    def clamp(self, value):
        return np.clip(value, self.r_min, self.r_max)


MOVIELENS_SCALE = RatingScale(1.0, 5.0, 3.0)


class Rating(NamedTuple):
    user: int
    item: int
    value: float
    timestamp: int = 0


class RatingMatrix:
    """Immutable sparse user x item rating store.

    Entries are kept as parallel arrays sorted by (user, item).  The
    user-major and item-major mapping views and the dense arrays are built
    lazily and are read-only.
    """

    def __init__(
        self,
        users: Sequence[int],
        items: Sequence[int],
        values: Sequence[float],
        scale: RatingScale = MOVIELENS_SCALE,
        num_users: int | None = None,
        num_items: int | None = None,
        timestamps: Sequence[int] | None = None,
    ):
        users = np.asarray(users, dtype=np.int64).ravel()
        items = np.asarray(items, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        if timestamps is None:
            timestamps = np.zeros(len(users), dtype=np.int64)
        timestamps = np.asarray(timestamps, dtype=np.int64).ravel()
        if not len(users) == len(items) == len(values) == len(timestamps):
            raise ValueError("users, items, values and timestamps must have equal length")

        if len(users) and (users.min() < 1 or items.min() < 1):
            raise RatingValidationError("user and item ids must be >= 1")
        if num_users is None:
            num_users = int(users.max()) if len(users) else 0
        if num_items is None:
            num_items = int(items.max()) if len(items) else 0
        if len(users) and (users.max() > num_users or items.max() > num_items):
            raise RatingValidationError(
                f"ids exceed the declared universe of {num_users} users x {num_items} items"
            )
        bad = (values < scale.r_min) | (values > scale.r_max) | ~np.isfinite(values)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise RatingValidationError(
                f"rating {values[i]} for ({users[i]}, {items[i]}) outside [{scale.r_min}, {scale.r_max}]"
            )

        order = np.lexsort((items, users))
        users, items, values, timestamps = users[order], items[order], values[order], timestamps[order]
        dup = (users[1:] == users[:-1]) & (items[1:] == items[:-1])
        if dup.any():
            i = int(np.flatnonzero(dup)[0])
            raise RatingValidationError(f"duplicate rating for (user {users[i]}, item {items[i]})")

        for arr in (users, items, values, timestamps):
            arr.setflags(write=False)
        self._users = users
        self._items = items
        self._values = values
        self._timestamps = timestamps
        self.scale = scale
        self.num_users = int(num_users)
        self.num_items = int(num_items)

    @classmethod
    def from_ratings(cls, ratings: Iterable[Rating], scale=MOVIELENS_SCALE, num_users=None, num_items=None):
        ratings = list(ratings)
        cols = list(zip(*ratings)) if ratings else [(), (), (), ()]
        return cls(cols[0], cols[1], cols[2], scale, num_users, num_items, cols[3])

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"RatingMatrix({len(self)} ratings, {self.num_users} users x {self.num_items} items)"

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatingMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.scale == other.scale
            and np.array_equal(self._users, other._users)
            and np.array_equal(self._items, other._items)
            and np.array_equal(self._values, other._values)
        )

    __hash__ = None

    def __getstate__(self):
        # lazy views are rebuilt on demand; mapping proxies do not pickle
        return {k: v for k, v in self.__dict__.items() if k not in ("by_user", "by_item", "dense")}

    def __setstate__(self, state):
        self.__dict__.update(state)
        for arr in (self._users, self._items, self._values, self._timestamps):
            arr.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.num_users, self.num_items

    @property
    def users(self) -> np.ndarray:
        return self._users

    @property
    def items(self) -> np.ndarray:
        return self._items

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def timestamps(self) -> np.ndarray:
        return self._timestamps

    def ratings(self) -> list[Rating]:
        return [
            Rating(int(u), int(i), float(v), int(t))
            for u, i, v, t in zip(self._users, self._items, self._values, self._timestamps)
        ]

    def __iter__(self):
        return iter(self.ratings())

    @cached_property
    def by_user(self) -> Mapping[int, Mapping[int, float]]:
        """user -> (item -> value); every user in the universe is a key."""
        view: dict[int, dict[int, float]] = {u: {} for u in range(1, self.num_users + 1)}
        for u, i, v in zip(self._users.tolist(), self._items.tolist(), self._values.tolist()):
            view[u][i] = v
        return MappingProxyType({u: MappingProxyType(d) for u, d in view.items()})

    @cached_property
    def by_item(self) -> Mapping[int, Mapping[int, float]]:
        """item -> (user -> value); every item in the universe is a key."""
        view: dict[int, dict[int, float]] = {i: {} for i in range(1, self.num_items + 1)}
        for u, i, v in zip(self._users.tolist(), self._items.tolist(), self._values.tolist()):
            view[i][u] = v
        return MappingProxyType({i: MappingProxyType(d) for i, d in view.items()})

    def user_ratings(self, user: int) -> Mapping[int, float]:
        self._check_user(user)
        return self.by_user[user]

    def item_ratings(self, item: int) -> Mapping[int, float]:
        self._check_item(item)
        return self.by_item[item]

    @cached_property
    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """``(values, mask)`` as |U| x |V| arrays, row/column ``id - 1``.

        Missing entries hold 0 in ``values``.
        """
        vals = np.zeros(self.shape, dtype=np.float64)
        mask = np.zeros(self.shape, dtype=bool)
        vals[self._users - 1, self._items - 1] = self._values
        mask[self._users - 1, self._items - 1] = True
        vals.setflags(write=False)
        mask.setflags(write=False)
        return vals, mask

    def content_hash(self) -> str:
        """SHA-256 over the canonical (user, item, value) triples and universe."""
        h = hashlib.sha256()
        h.update(np.array(self.shape, dtype=np.int64).tobytes())
        h.update(self._users.tobytes())
        h.update(self._items.tobytes())
        h.update(self._values.tobytes())
        return h.hexdigest()

    def _check_user(self, user: int):
        if not 1 <= user <= self.num_users:
            raise ValueError(f"unknown user {user}; universe has {self.num_users} users")

    def _check_item(self, item: int):
        if not 1 <= item <= self.num_items:
            raise ValueError(f"unknown item {item}; universe has {self.num_items} items")


def _open_binary(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "rb"), True
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source), True
    return source, False


def load_ratings(
    source: BinaryIO | str | os.PathLike | bytes,
    scale: RatingScale = MOVIELENS_SCALE,
    num_users: int | None = None,
    num_items: int | None = None,
) -> RatingMatrix:
    """Read ``user<TAB>item<TAB>rating<TAB>timestamp`` records.

    ``source`` is a binary stream, raw bytes or a path.  Blank lines are
    ignored.  When the universe sizes are not given they are taken from the
    largest ids seen.
    """
    stream, owned = _open_binary(source)
    users, items, values, stamps = [], [], [], []
    seen: dict[tuple[int, int], int] = {}
    try:
        for lineno, raw in enumerate(stream, start=1):
            line = raw.decode("utf-8").rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise RatingParseError(lineno, line, f"expected 4 tab-separated fields, got {len(parts)}")
            try:
                u, i, t = int(parts[0]), int(parts[1]), int(parts[3])
                v = float(parts[2])
            except ValueError as exc:
                raise RatingParseError(lineno, line, str(exc)) from None
            if u < 1 or i < 1:
                raise RatingValidationError(f"ids must be >= 1, got ({u}, {i})", lineno)
            if not scale.contains(v):
                raise RatingValidationError(f"rating {v} outside [{scale.r_min}, {scale.r_max}]", lineno)
            if (u, i) in seen:
                raise RatingValidationError(
                    f"duplicate rating for (user {u}, item {i}), first seen on line {seen[u, i]}", lineno
                )
            seen[u, i] = lineno
            users.append(u)
            items.append(i)
            values.append(v)
            stamps.append(t)
    finally:
        if owned:
            stream.close()
    return RatingMatrix(users, items, values, scale, num_users, num_items, stamps)


def _format_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def dump_ratings(ratings: RatingMatrix | Iterable[Rating], dest: BinaryIO | str | os.PathLike | None = None) -> bytes:
    """Serialize ratings in the same tab-separated layout ``load_ratings`` reads.

    Returns the bytes and also writes them to ``dest`` when given.
    """
    rows = ratings.ratings() if isinstance(ratings, RatingMatrix) else list(ratings)
    data = "".join(f"{r.user}\t{r.item}\t{_format_value(r.value)}\t{r.timestamp}\n" for r in rows).encode()
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "wb") as fh:
            fh.write(data)
    elif dest is not None:
        dest.write(data)
    return data


@dataclass(frozen=True)
class Split:
    train: RatingMatrix
    test: list[Rating]
    ratio: float
    fold_index: int
    seed: int


def holdout_size(n: int, ratio: float) -> int:
    """round(ratio * n), halves rounded up."""
    return int(math.floor(ratio * n + 0.5))


def split_fold(matrix: RatingMatrix, r: float, fold_index: int, seed: int) -> Split:
    """One train/test partition; the test set is a uniform sample of round(r * N) ratings.

    The sampler is seeded by ``(seed, fold_index)``.
    """
    if not 0 < r < 1:
        raise ValueError(f"test ratio must lie in (0, 1), got {r}")
    n = len(matrix)
    rng = np.random.default_rng([seed, fold_index])
    in_test = np.zeros(n, dtype=bool)
    in_test[rng.choice(n, size=holdout_size(n, r), replace=False)] = True
    keep = ~in_test
    train = RatingMatrix(
        matrix.users[keep], matrix.items[keep], matrix.values[keep],
        matrix.scale, matrix.num_users, matrix.num_items, matrix.timestamps[keep],
    )
    idx = np.flatnonzero(in_test)
    test = [
        Rating(int(matrix.users[j]), int(matrix.items[j]), float(matrix.values[j]), int(matrix.timestamps[j]))
        for j in idx
    ]
    return Split(train, test, r, fold_index, seed)


def split_folds(matrix: RatingMatrix, r: float, n_folds: int, seed: int) -> list[Split]:
    """``n_folds`` independent random partitions (seeded resamples, not a k-fold partition)."""
    if not 0 < r < 1:
        raise ValueError(f"test ratio must lie in (0, 1), got {r}")
    if n_folds < 1:
        raise ValueError(f"n_folds must be >= 1, got {n_folds}")
    return [split_fold(matrix, r, fold, seed) for fold in range(n_folds)]


@dataclass(frozen=True, eq=False)
class MatrixStats:
    """Derived statistics of a training matrix.

    Arrays are indexed by ``id - 1``; means of users/items without ratings
    are NaN.
    """

    item_means: np.ndarray
    user_means: np.ndarray
    item_counts: np.ndarray
    user_counts: np.ndarray
    rated_item_count: int
    relevant_count: int
    grid_size: int
    relevance_threshold: float
    global_mean: float
    sr: float = field(init=False)

    def __post_init__(self):
        sr = self.relevant_count / self.grid_size if self.grid_size else 0.0
        object.__setattr__(self, "sr", sr)


def compute_stats(train: RatingMatrix, relevance_threshold: float = 4.0) -> MatrixStats:
    if not train.scale.contains(relevance_threshold):
        raise ValueError(f"relevance threshold {relevance_threshold} outside the rating scale")
    nu, nv = train.shape
    u_idx, i_idx, vals = train.users - 1, train.items - 1, train.values
    item_counts = np.bincount(i_idx, minlength=nv)
    user_counts = np.bincount(u_idx, minlength=nu)
    with np.errstate(invalid="ignore", divide="ignore"):
        item_means = np.bincount(i_idx, weights=vals, minlength=nv) / item_counts
        user_means = np.bincount(u_idx, weights=vals, minlength=nu) / user_counts
    for arr in (item_means, user_means, item_counts, user_counts):
        arr.setflags(write=False)
    return MatrixStats(
        item_means=item_means,
        user_means=user_means,
        item_counts=item_counts,
        user_counts=user_counts,
        rated_item_count=int(np.count_nonzero(item_counts)),
        relevant_count=int(np.count_nonzero(vals >= relevance_threshold)),
        grid_size=nu * nv,
        relevance_threshold=float(relevance_threshold),
        global_mean=float(vals.mean()) if len(vals) else float("nan"),
    )


class CoRated(NamedTuple):
    pairs: list[tuple[int, float, float]]
    n1: int
    n2: int
    n_union: int


def co_rated(matrix: RatingMatrix, u1: int, u2: int) -> CoRated:
    """Co-rated ``(item, r1, r2)`` triples in ascending item order plus set sizes."""
    a = matrix.user_ratings(u1)
    b = matrix.user_ratings(u2)
    pairs = [(j, a[j], b[j]) for j in sorted(a.keys() & b.keys())]
    return CoRated(pairs, len(a), len(b), len(a) + len(b) - len(pairs))
