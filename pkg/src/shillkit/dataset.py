"""Rating data: loading, filtering, splitting, summary statistics and item picks.

All computation uses dense integer indices; external user/item IDs are kept
as strings in ``user_ids`` / ``item_ids`` (position = dense index).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class DatasetError(ValueError):
    """Invalid rating data or an operation that would leave it empty."""


class ParseError(DatasetError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class RatingMatrix:
    """Sparse users x items matrix of discrete ratings in ``[1, rating_max]``."""

    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    user_ids: tuple
    item_ids: tuple
    rating_max: int = 5

    def __post_init__(self):
        users = np.ascontiguousarray(self.users, dtype=np.int64)
        items = np.ascontiguousarray(self.items, dtype=np.int64)
        ratings = np.ascontiguousarray(self.ratings, dtype=np.int64)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "ratings", ratings)
        object.__setattr__(self, "user_ids", tuple(self.user_ids))
        object.__setattr__(self, "item_ids", tuple(self.item_ids))
        if not (len(users) == len(items) == len(ratings)):
            raise DatasetError("users/items/ratings length mismatch")
        if len(set(self.user_ids)) != len(self.user_ids):
            raise DatasetError("duplicate external user id")
        if len(set(self.item_ids)) != len(self.item_ids):
            raise DatasetError("duplicate external item id")
        if len(users):
            if users.min() < 0 or users.max() >= self.num_users:
                raise DatasetError("user index out of range")
            if items.min() < 0 or items.max() >= self.num_items:
                raise DatasetError("item index out of range")
            if ratings.min() < 1 or ratings.max() > self.rating_max:
                raise DatasetError(f"rating outside [1, {self.rating_max}]")
            keys = users * self.num_items + items
            if len(np.unique(keys)) != len(keys):
                raise DatasetError("duplicate (user, item) pair")

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_items(self) -> int:
        return len(self.item_ids)

    @property
    def num_ratings(self) -> int:
        return len(self.ratings)

    def __len__(self):
        return self.num_ratings

    def to_csr(self) -> sp.csr_matrix:
        m = sp.csr_matrix(
            (self.ratings.astype(np.float64), (self.users, self.items)),
            shape=(self.num_users, self.num_items),
        )
        m.sort_indices()
        return m

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.num_users, self.num_items))
        dense[self.users, self.items] = self.ratings
        return dense

    def user_counts(self) -> np.ndarray:
        return np.bincount(self.users, minlength=self.num_users)

    def item_counts(self) -> np.ndarray:
        return np.bincount(self.items, minlength=self.num_items)

    def rated_items(self, user: int) -> np.ndarray:
        return np.sort(self.items[self.users == user])

    def subset(self, mask: np.ndarray) -> "RatingMatrix":
        """Keep the entries selected by ``mask``; index space unchanged."""
        return RatingMatrix(self.users[mask], self.items[mask], self.ratings[mask],
                            self.user_ids, self.item_ids, self.rating_max)

    def with_rows(self, rows: np.ndarray, ids: Sequence[str]) -> "RatingMatrix":
        """Append dense rows (0 = unrated) as new users after the existing ones."""
        rows = np.asarray(rows)
        if rows.ndim != 2 or rows.shape[1] != self.num_items:
            raise DatasetError(f"rows must be (k, {self.num_items}), got {rows.shape}")
        if len(ids) != rows.shape[0]:
            raise DatasetError("one id per appended row required")
        r, c = np.nonzero(rows)
        return RatingMatrix(
            np.concatenate([self.users, r + self.num_users]),
            np.concatenate([self.items, c]),
            np.concatenate([self.ratings, np.rint(rows[r, c]).astype(np.int64)]),
            self.user_ids + tuple(ids),
            self.item_ids,
            self.rating_max,
        )

    @classmethod
    def from_dense(cls, dense, user_ids=None, item_ids=None, rating_max=5):
        dense = np.asarray(dense)
        r, c = np.nonzero(dense)
        n, m = dense.shape
        return cls(r, c, np.rint(dense[r, c]).astype(np.int64),
                   user_ids or [str(u) for u in range(n)],
                   item_ids or [str(i) for i in range(m)], rating_max)


@dataclass(frozen=True)
class DatasetSplit:
    train: RatingMatrix
    test: RatingMatrix
    seed: int


@dataclass(frozen=True)
class AttackBudget:
    attack_size: int
    profile_size: int
    targets: tuple
    selected: tuple = ()
    rating_max: int = 5

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "selected", tuple(int(s) for s in self.selected))
        if self.attack_size < 1:
            raise DatasetError("attack size A must be >= 1")
        if self.profile_size < 1:
            raise DatasetError("profile size P must be >= 1")
        if not self.targets:
            raise DatasetError("at least one target item required")
        if set(self.targets) & set(self.selected):
            raise DatasetError("target items overlap the selected items")


@dataclass(frozen=True)
class MatrixStats:
    num_users: int
    num_items: int
    num_ratings: int
    sparsity: float  # percent
    global_mean: float
    global_std: float
    item_mean: np.ndarray = field(repr=False)
    item_std: np.ndarray = field(repr=False)
    item_count: np.ndarray = field(repr=False)


def sort_ids(ids: Iterable[str]) -> list:
    ids = list(ids)
    try:
        return sorted(ids, key=int)
    except ValueError:
        return sorted(ids)


def _build(triples, path, rating_max) -> RatingMatrix:
    if not triples:
        raise DatasetError(f"{path}: no ratings found (empty matrix)")
    user_ids = sort_ids({t[0] for t in triples})
    item_ids = sort_ids({t[1] for t in triples})
    uidx = {u: k for k, u in enumerate(user_ids)}
    iidx = {i: k for k, i in enumerate(item_ids)}
    seen = set()
    users, items, ratings = [], [], []
    for u, i, r, lineno in triples:
        if (u, i) in seen:
            raise ParseError(path, lineno, f"duplicate rating for user {u!r}, item {i!r}")
        seen.add((u, i))
        users.append(uidx[u])
        items.append(iidx[i])
        ratings.append(r)
    return RatingMatrix(users, items, ratings, user_ids, item_ids, rating_max)


def _parse_rating(text, path, lineno, rating_max):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, lineno, f"non-numeric rating {text!r}") from None
    if value != int(value) or not 1 <= value <= rating_max:
        raise DatasetError(f"{path}:{lineno}: rating {text!r} outside [1, {rating_max}]")
    return int(value)


def load_movielens(path, rating_max: int = 5) -> RatingMatrix:
    """Read ``user\\titem\\trating\\ttimestamp`` lines; timestamps are dropped."""
    triples = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) not in (3, 4):
                raise ParseError(path, lineno, f"expected 4 fields, got {len(fields)}")
            rating = _parse_rating(fields[2], path, lineno, rating_max)
            triples.append((fields[0], fields[1], rating, lineno))
    return _build(triples, path, rating_max)


def load_csv(path, has_header: bool = False, rating_max: int = 5) -> RatingMatrix:
    """Read comma-separated ``user,item,rating`` rows (extra columns ignored)."""
    triples = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if lineno == 1 and has_header:
                continue
            if not row or not "".join(row).strip():
                continue
            if len(row) < 3:
                raise ParseError(path, lineno, f"expected user,item,rating; got {len(row)} fields")
            rating = _parse_rating(row[2].strip(), path, lineno, rating_max)
            triples.append((row[0].strip(), row[1].strip(), rating, lineno))
    return _build(triples, path, rating_max)


def save_csv(matrix: RatingMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user", "item", "rating"])
        for u, i, r in zip(matrix.users, matrix.items, matrix.ratings):
            writer.writerow([matrix.user_ids[u], matrix.item_ids[i], int(r)])


def load_matrix(path, fmt: str | None = None) -> RatingMatrix:
    """Dispatch on ``fmt`` ("movielens" / "csv") or the file extension."""
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "movielens")
    if fmt == "csv":
        with open(path) as fh:
            first = fh.readline().split(",")
        has_header = len(first) >= 3 and not _is_number(first[2])
        return load_csv(path, has_header=has_header)
    if fmt == "movielens":
        return load_movielens(path)
    raise DatasetError(f"unknown matrix format {fmt!r}")


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def filter_matrix(matrix: RatingMatrix, min_user_ratings: int) -> RatingMatrix:
    """Drop users under ``min_user_ratings``, then unrated items; reindex densely.

    A single pass, not iterated to a fixed point.
    """
    if min_user_ratings < 0:
        raise DatasetError("min_user_ratings must be >= 0")
    keep_user = matrix.user_counts() >= min_user_ratings
    mask = keep_user[matrix.users]
    item_left = np.bincount(matrix.items[mask], minlength=matrix.num_items) > 0
    if not mask.any():
        raise DatasetError("filter removed every rating")
    new_u = np.cumsum(keep_user) - 1
    new_i = np.cumsum(item_left) - 1
    return RatingMatrix(
        new_u[matrix.users[mask]],
        new_i[matrix.items[mask]],
        matrix.ratings[mask],
        [uid for uid, k in zip(matrix.user_ids, keep_user) if k],
        [iid for iid, k in zip(matrix.item_ids, item_left) if k],
        matrix.rating_max,
    )


def split(matrix: RatingMatrix, test_fraction: float, seed: int) -> DatasetSplit:
    """Shuffle entries with ``seed`` and hold out the first floor(N * fraction)."""
    if not 0 < test_fraction < 1:
        raise DatasetError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(matrix.num_ratings)
    n_test = int(np.floor(matrix.num_ratings * test_fraction))
    test_mask = np.zeros(matrix.num_ratings, dtype=bool)
    test_mask[perm[:n_test]] = True
    return DatasetSplit(matrix.subset(~test_mask), matrix.subset(test_mask), seed)


def stats(matrix: RatingMatrix) -> MatrixStats:
    if matrix.num_ratings == 0:
        raise DatasetError("stats of an empty matrix")
    r = matrix.ratings.astype(np.float64)
    count = matrix.item_counts()
    sums = np.bincount(matrix.items, weights=r, minlength=matrix.num_items)
    sq = np.bincount(matrix.items, weights=r * r, minlength=matrix.num_items)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = sums / count
        var = np.maximum(sq / count - mean * mean, 0.0)
    std = np.sqrt(var)
    std[count == 1] = 0.0
    return MatrixStats(
        num_users=matrix.num_users,
        num_items=matrix.num_items,
        num_ratings=matrix.num_ratings,
        sparsity=100.0 * (1.0 - matrix.num_ratings / (matrix.num_users * matrix.num_items)),
        global_mean=float(r.mean()),
        global_std=float(r.std()),
        item_mean=mean,
        item_std=std,
        item_count=count,
    )


def pick_targets(matrix: RatingMatrix, n: int, seed: int) -> list:
    if n > matrix.num_items:
        raise DatasetError(f"cannot pick {n} targets from {matrix.num_items} items")
    rng = np.random.default_rng(seed)
    return [int(i) for i in rng.choice(matrix.num_items, size=n, replace=False)]


def pick_selected(matrix: RatingMatrix, n: int, strategy: str = "popular",
                  exclude: Iterable[int] = ()) -> list:
    """Top-``n`` items by rating count, ties to the lower index."""
    if strategy != "popular":
        raise DatasetError(f"unknown selection strategy {strategy!r}")
    if n > matrix.num_items:
        raise DatasetError(f"cannot select {n} of {matrix.num_items} items")
    count = matrix.item_counts().astype(np.int64)
    order = np.lexsort((np.arange(matrix.num_items), -count))
    banned = set(int(e) for e in exclude)
    return [int(i) for i in order if int(i) not in banned][:n]


def average_profile_size(matrix: RatingMatrix) -> int:
    return int(round(matrix.num_ratings / matrix.num_users))
