"""Interaction data model, CSV ingestion, sparse views and synthetic data."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np
import scipy.sparse as sp

from ._rng import derive_rng
from .exceptions import DataError, EmptyDataset, InvalidSpec, MalformedRow

DEFAULT_SCHEMA = {
    "user": "user_id",
    "item": "item_id",
    "rating": "rating",
    "timestamp": "timestamp",
}
AGGREGATIONS = ("last", "sum", "max")


class Interaction(NamedTuple):
    user: str
    item: str
    rating: float
    timestamp: int


def _first_appearance(values):
    index = {}
    codes = np.empty(len(values), dtype=np.int64)
    for pos, v in enumerate(values):
        code = index.get(v)
        if code is None:
            code = index[v] = len(index)
        codes[pos] = code
    return codes, tuple(index)


class InteractionSet:
    """Immutable, columnar collection of interactions with dense id maps.

    ``users`` and ``items`` hold dense indices into ``user_ids`` and
    ``item_ids``.  Subsets produced by the splitters share the parent's id
    maps, so a user may be mapped without appearing in a particular subset.
    """

    __slots__ = ("users", "items", "ratings", "timestamps", "user_ids", "item_ids",
                 "_user_index", "_item_index")

    def __init__(self, users, items, ratings, timestamps, user_ids, item_ids):
        self.users = np.asarray(users, dtype=np.int64)
        self.items = np.asarray(items, dtype=np.int64)
        self.ratings = np.asarray(ratings, dtype=np.float64)
        self.timestamps = np.asarray(timestamps, dtype=np.int64)
        self.user_ids = tuple(user_ids)
        self.item_ids = tuple(item_ids)
        n = len(self.users)
        if not (len(self.items) == len(self.ratings) == len(self.timestamps) == n):
            raise DataError("column lengths differ")
        if not np.all(np.isfinite(self.ratings)):
            raise DataError("ratings must be finite")
        if n and self.timestamps.min() < 0:
            raise DataError("timestamps must be non-negative")
        if n and (self.users.min() < 0 or self.users.max() >= len(self.user_ids)):
            raise DataError("user index out of range")
        if n and (self.items.min() < 0 or self.items.max() >= len(self.item_ids)):
            raise DataError("item index out of range")
        for arr in (self.users, self.items, self.ratings, self.timestamps):
            arr.flags.writeable = False
        self._user_index = None
        self._item_index = None

    @classmethod
    def from_records(cls, records: Iterable) -> "InteractionSet":
        """Build a set from ``(user, item, rating, timestamp)`` tuples.

        Dense ids are assigned in order of first appearance.
        """
        records = [Interaction(str(u), str(i), float(r), int(t)) for u, i, r, t in records]
        users, user_ids = _first_appearance([r.user for r in records])
        items, item_ids = _first_appearance([r.item for r in records])
        return cls(
            users,
            items,
            [r.rating for r in records],
            [r.timestamp for r in records],
            user_ids,
            item_ids,
        )

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def user_index(self) -> dict:
        if self._user_index is None:
            self._user_index = {u: k for k, u in enumerate(self.user_ids)}
        return self._user_index

    @property
    def item_index(self) -> dict:
        if self._item_index is None:
            self._item_index = {i: k for k, i in enumerate(self.item_ids)}
        return self._item_index

    @property
    def interactions(self) -> list[Interaction]:
        return list(self)

    def __len__(self):
        return len(self.users)

    def __iter__(self):
        uids, iids = self.user_ids, self.item_ids
        for u, i, r, t in zip(self.users.tolist(), self.items.tolist(),
                              self.ratings.tolist(), self.timestamps.tolist()):
            yield Interaction(uids[u], iids[i], r, t)

    def __eq__(self, other):
        if not isinstance(other, InteractionSet):
            return NotImplemented
        return (
            self.user_ids == other.user_ids
            and self.item_ids == other.item_ids
            and np.array_equal(self.users, other.users)
            and np.array_equal(self.items, other.items)
            and np.array_equal(self.ratings, other.ratings)
            and np.array_equal(self.timestamps, other.timestamps)
        )

    __hash__ = None

    def __repr__(self):
        return (f"<InteractionSet: {len(self)} interactions, "
                f"{self.n_users} users, {self.n_items} items>")

    def take(self, positions) -> "InteractionSet":
        """Subset by positions, keeping this set's id maps."""
        positions = np.asarray(positions, dtype=np.int64)
        return InteractionSet(
            self.users[positions],
            self.items[positions],
            self.ratings[positions],
            self.timestamps[positions],
            self.user_ids,
            self.item_ids,
        )

    def compact(self) -> "InteractionSet":
        """Re-index so only present users/items are mapped, by first appearance."""
        ucodes, upos = np.unique(self.users, return_index=True)
        icodes, ipos = np.unique(self.items, return_index=True)
        uorder = ucodes[np.argsort(upos, kind="stable")]
        iorder = icodes[np.argsort(ipos, kind="stable")]
        umap = np.empty(self.n_users, dtype=np.int64)
        umap[uorder] = np.arange(len(uorder))
        imap = np.empty(self.n_items, dtype=np.int64)
        imap[iorder] = np.arange(len(iorder))
        return InteractionSet(
            umap[self.users],
            imap[self.items],
            self.ratings,
            self.timestamps,
            [self.user_ids[k] for k in uorder],
            [self.item_ids[k] for k in iorder],
        )

    def seen_matrix(self) -> sp.csr_matrix:
        """Binary user x item incidence matrix."""
        return to_sparse(self, "max").binary().to_scipy() if len(self) else sp.csr_matrix(
            (self.n_users, self.n_items))


@dataclass(frozen=True)
class SparseMatrixView:
    """CSR layout of an :class:`InteractionSet` after duplicate merging."""

    rows: int
    cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    aggregation: str

    @property
    def nnz(self):
        return len(self.data)

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.rows, self.cols))

    def binary(self) -> "SparseMatrixView":
        return SparseMatrixView(self.rows, self.cols, self.indptr, self.indices,
                                np.ones_like(self.data), self.aggregation)

    def row_entries(self, row):
        lo, hi = self.indptr[row], self.indptr[row + 1]
        return self.indices[lo:hi], self.data[lo:hi]


def to_sparse(interactions: InteractionSet, aggregation: str = "last") -> SparseMatrixView:
    """Merge duplicate (user, item) pairs and lay the result out as CSR.

    ``last`` keeps the value with the greatest timestamp (later input
    position wins ties), ``sum`` adds values, ``max`` keeps the maximum.
    """
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}")
    if len(interactions) == 0:
        raise EmptyDataset("cannot build a sparse view of an empty set")
    n_items = interactions.n_items
    keys = interactions.users * n_items + interactions.items
    positions = np.arange(len(keys))
    # lexsort: last key is primary
    order = np.lexsort((positions, interactions.timestamps, keys))
    skeys = keys[order]
    values = interactions.ratings[order]
    starts = np.flatnonzero(np.r_[True, skeys[1:] != skeys[:-1]])
    if aggregation == "last":
        ends = np.r_[starts[1:], len(skeys)] - 1
        data = values[ends]
    elif aggregation == "sum":
        data = np.add.reduceat(values, starts)
    else:
        data = np.maximum.reduceat(values, starts)
    ukeys = skeys[starts]
    rows = ukeys // n_items
    cols = ukeys % n_items
    indptr = np.zeros(interactions.n_users + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return SparseMatrixView(interactions.n_users, n_items, indptr, cols.astype(np.int64),
                            np.asarray(data, dtype=np.float64), aggregation)


def _parse_timestamp(text):
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise
        return int(value)


def load_interactions(path, schema: Mapping | None = None, delimiter: str = ",") -> InteractionSet:
    """Read a header-bearing delimited file into an :class:`InteractionSet`.

    ``schema`` maps the logical fields ``user``, ``item``, ``rating`` and
    ``timestamp`` to header names.  Rating and timestamp are optional: a
    field mapped to ``None`` or absent from the header defaults to 1.0 and 0.
    Row numbers in :class:`MalformedRow` count data rows from 1.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: no header row") from None
        col = {name: k for k, name in enumerate(header)}
        for field in ("user", "item"):
            if schema[field] not in col:
                raise DataError(f"{path}: column {schema[field]!r} not in header")
        ucol, icol = col[schema["user"]], col[schema["item"]]
        rcol = col.get(schema["rating"]) if schema.get("rating") else None
        tcol = col.get(schema["timestamp"]) if schema.get("timestamp") else None
        width = len(header)

        records = []
        for rowno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) < width:
                raise MalformedRow(rowno, f"expected {width} fields, got {len(row)}")
            user, item = row[ucol], row[icol]
            if user == "" or item == "":
                raise MalformedRow(rowno, "empty user or item")
            try:
                rating = float(row[rcol]) if rcol is not None else 1.0
            except ValueError:
                raise MalformedRow(rowno, f"non-numeric rating {row[rcol]!r}") from None
            if not math.isfinite(rating):
                raise MalformedRow(rowno, f"non-finite rating {row[rcol]!r}")
            try:
                ts = _parse_timestamp(row[tcol]) if tcol is not None else 0
            except ValueError:
                raise MalformedRow(rowno, f"non-integer timestamp {row[tcol]!r}") from None
            if ts < 0:
                raise MalformedRow(rowno, f"negative timestamp {ts}")
            records.append((user, item, rating, ts))

    if not records:
        raise EmptyDataset(f"{path}: no data rows")
    return InteractionSet.from_records(records)


def write_interactions(interactions: InteractionSet, path, delimiter: str = ",") -> None:
    """Write ``interactions`` as CSV with the canonical header, in set order."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["user_id", "item_id", "rating", "timestamp"])
        for rec in interactions:
            writer.writerow([rec.user, rec.item, repr(rec.rating), rec.timestamp])


@dataclass(frozen=True)
class SyntheticSpec:
    n_users: int = 200
    n_items: int = 100
    rank: int = 3
    density: float = 0.3
    noise_sigma: float = 0.1
    rating_range: tuple = (-2.0, 2.0)
    seed: int = 0
    time_window: tuple = (1_500_000_000, 1_600_000_000)

    def validate(self):
        if self.n_users < 1 or self.n_items < 1:
            raise InvalidSpec("n_users and n_items must be >= 1")
        if self.rank < 1:
            raise InvalidSpec("rank must be >= 1")
        if not 0 < self.density <= 1:
            raise InvalidSpec("density must lie in (0, 1]")
        if not self.noise_sigma >= 0:
            raise InvalidSpec("noise_sigma must be >= 0")
        lo, hi = self.rating_range
        if not lo < hi:
            raise InvalidSpec("rating_range must satisfy low < high")
        t0, t1 = self.time_window
        if not 0 <= t0 < t1:
            raise InvalidSpec("time_window must satisfy 0 <= start < end")
        if not -(1 << 63) <= int(self.seed) < (1 << 64):
            raise InvalidSpec("seed must fit in 64 bits")


class SyntheticData(NamedTuple):
    interactions: InteractionSet
    user_factors: np.ndarray
    item_factors: np.ndarray
    spec: SyntheticSpec

    def planted_rating(self, user, item):
        """Noise-free, unclamped rating for planted user/item numbers."""
        return rescale_planted(self.user_factors[user] @ self.item_factors[item], self.spec)


def rescale_planted(dot, spec: SyntheticSpec):
    """Affine map from planted inner products to the rating scale.

    Inner products of the planted factors have standard deviation
    ``1/sqrt(rank)``; they are standardized and mapped so that three
    standard deviations reach the ends of ``rating_range``.
    """
    lo, hi = spec.rating_range
    center = 0.5 * (lo + hi)
    scale = 0.5 * (hi - lo) / 3.0 * math.sqrt(spec.rank)
    return center + scale * np.asarray(dot)


def generate_synthetic(spec: SyntheticSpec | None = None, **kwargs) -> SyntheticData:
    """Generate interactions with planted low-rank structure.

    User ``"u{k}"`` corresponds to row ``k`` of ``user_factors`` and item
    ``"i{k}"`` to row ``k`` of ``item_factors``; dense ids in the returned set
    follow first appearance and generally differ from those numbers for items.
    """
    if spec is None:
        spec = SyntheticSpec(**kwargs)
    elif kwargs:
        raise TypeError("pass either a SyntheticSpec or keyword arguments")
    spec.validate()
    seed = spec.seed
    scale = 1.0 / math.sqrt(spec.rank)
    P = derive_rng(seed, "user_factors").standard_normal((spec.n_users, spec.rank)) * scale
    Q = derive_rng(seed, "item_factors").standard_normal((spec.n_items, spec.rank)) * scale

    observed = derive_rng(seed, "mask").random((spec.n_users, spec.n_items)) < spec.density
    us, its = np.nonzero(observed)
    n = len(us)
    dots = np.einsum("ij,ij->i", P[us], Q[its])
    ratings = rescale_planted(dots, spec)
    if spec.noise_sigma > 0:
        ratings = ratings + derive_rng(seed, "noise").normal(0.0, spec.noise_sigma, n)
    ratings = np.clip(ratings, *spec.rating_range)
    t0, t1 = spec.time_window
    timestamps = derive_rng(seed, "timestamps").integers(t0, t1, n, endpoint=False)

    users, user_ids = _first_appearance([f"u{u}" for u in us.tolist()])
    items, item_ids = _first_appearance([f"i{i}" for i in its.tolist()])
    if n == 0:
        raise InvalidSpec("density too low: no cells were observed")
    data = InteractionSet(users, items, ratings, timestamps, user_ids, item_ids)
    return SyntheticData(data, P, Q, spec)
