"""Implicit-feedback ingestion, leave-one-out splitting, and samplers.

Input files are delimited text with columns user, item[, rating[,
timestamp]]; every listed pair counts as a positive (one-class setting),
so the rating column is parsed but ignored. Per-user interactions are
ordered by timestamp when every line carries one, otherwise by file
order; the last item becomes the test item and the penultimate the
validation item.

Samplers take an explicit numpy Generator so independent workers never
share random state; evaluation candidates are derived from (seed, split,
user) alone and are therefore identical across models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, TextIO

import numpy as np

from .errors import DataFormatError, InvalidInputError, SamplingExhaustedError

VALIDATION = "validation"
TEST = "test"
_SPLIT_CODES = {VALIDATION: 1, TEST: 2}

# Rejection-sampling retry budget for one batch of negatives.
MAX_NEG_RETRIES = 1000


class Interaction(NamedTuple):
    user: str
    item: str
    timestamp: int | None = None


class Triplet(NamedTuple):
    user: int
    pos_item: int
    neg_item: int


def _check_split(split: str) -> str:
    if split not in _SPLIT_CODES:
        raise InvalidInputError(f"split must be '{VALIDATION}' or '{TEST}', got {split!r}")
    return split


def load_interactions(path: str | TextIO, delimiter: str = "\t",
                      header: bool = False) -> list[Interaction]:
    """Parse a delimited interaction file into (user, item, timestamp) rows.

    Column layout is user, item[, rating[, timestamp]]; set header=True to
    skip a leading header line. Blank lines are ignored; any other
    malformed line raises with its line number.
    """
    if isinstance(path, str):
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = path.read().splitlines()
    out: list[Interaction] = []
    for lineno, raw in enumerate(lines, start=1):
        if lineno == 1 and header:
            continue
        if not raw.strip():
            continue
        fields = [f.strip() for f in raw.split(delimiter)]
        if len(fields) < 2:
            raise DataFormatError(f"line {lineno}: expected at least user and item fields")
        user, item = fields[0], fields[1]
        if not user or not item:
            raise DataFormatError(f"line {lineno}: empty user or item id")
        if any(ch.isspace() for ch in user + item):
            raise DataFormatError(f"line {lineno}: ids must not contain whitespace")
        ts: int | None = None
        if len(fields) >= 4 and fields[3]:
            try:
                ts = int(fields[3])
            except ValueError:
                raise DataFormatError(f"line {lineno}: timestamp {fields[3]!r} is not an integer") from None
        out.append(Interaction(user, item, ts))
    if not out:
        raise DataFormatError("no interactions found in input")
    return out


def k_core_filter(interactions: Sequence[Interaction], k: int) -> list[Interaction]:
    """Iteratively drop users and items with fewer than k unique partners.

    Repeats until stable (the usual k-core fixpoint); k <= 1 is a no-op.
    """
    if k <= 1:
        return list(interactions)
    current = list(interactions)
    while True:
        user_items: dict[str, set] = {}
        item_users: dict[str, set] = {}
        for it in current:
            user_items.setdefault(it.user, set()).add(it.item)
            item_users.setdefault(it.item, set()).add(it.user)
        bad_users = {u for u, s in user_items.items() if len(s) < k}
        bad_items = {i for i, s in item_users.items() if len(s) < k}
        if not bad_users and not bad_items:
            return current
        current = [it for it in current
                   if it.user not in bad_users and it.item not in bad_items]
        if not current:
            return current


@dataclass
class Dataset:
    """Leave-one-out split dataset with dense internal ids.

    train_flat/train_offsets form a CSR layout of per-user training items;
    pos_keys is the sorted array of user * n_items + item over every
    positive (train, validation, and test), used for O(log n) membership
    during negative sampling.
    """

    user_ids: list[str]
    item_ids: list[str]
    train_flat: np.ndarray
    train_offsets: np.ndarray
    val_items: np.ndarray
    test_items: np.ndarray
    pos_keys: np.ndarray
    user_index: dict[str, int] = field(repr=False, default_factory=dict)
    item_index: dict[str, int] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.user_index:
            self.user_index = {u: i for i, u in enumerate(self.user_ids)}
        if not self.item_index:
            self.item_index = {v: i for i, v in enumerate(self.item_ids)}

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_train(self) -> int:
        return int(self.train_flat.size)

    @property
    def train_counts(self) -> np.ndarray:
        return np.diff(self.train_offsets)

    def train_positives(self, user: int) -> np.ndarray:
        return self.train_flat[self.train_offsets[user]:self.train_offsets[user + 1]]

    def positives(self, user: int) -> np.ndarray:
        """All positive item indices of a user (train + validation + test), sorted."""
        base = np.uint64(user) * np.uint64(self.n_items)
        lo = np.searchsorted(self.pos_keys, base)
        hi = np.searchsorted(self.pos_keys, base + np.uint64(self.n_items))
        return (self.pos_keys[lo:hi] - base).astype(np.int64)

    def held_out(self, user: int, split: str) -> int:
        _check_split(split)
        arr = self.val_items if split == VALIDATION else self.test_items
        return int(arr[user])


def build_dataset(interactions: Iterable[Interaction], min_interactions: int = 3,
                  k_core: int = 0) -> Dataset:
    """Deduplicate, filter, order, and split interactions per user.

    Users with fewer than max(min_interactions, 3) unique items are
    dropped (three are needed for train/validation/test). Duplicated
    (user, item) pairs keep their earliest occurrence. Dense internal ids
    follow first appearance in file order over the surviving interactions.
    """
    rows = list(interactions)
    if k_core > 1:
        rows = k_core_filter(rows, k_core)
    use_ts = bool(rows) and all(r.timestamp is not None for r in rows)

    # Per-user ordering key; stable sort keeps file order for ties.
    per_user: dict[str, list[tuple[int, int, str]]] = {}
    for idx, row in enumerate(rows):
        key = row.timestamp if use_ts else idx
        per_user.setdefault(row.user, []).append((key, idx, row.item))

    threshold = max(min_interactions, 3)
    kept: dict[str, list[tuple[int, str]]] = {}
    for user, entries in per_user.items():
        entries.sort(key=lambda e: (e[0], e[1]))
        seen: set[str] = set()
        ordered: list[tuple[int, str]] = []
        for _, idx, item in entries:
            if item in seen:
                continue
            seen.add(item)
            ordered.append((idx, item))
        if len(ordered) >= threshold:
            kept[user] = ordered
    if not kept:
        raise DataFormatError(
            f"no users with at least {threshold} unique interactions survive filtering"
        )

    # Dense ids in first-appearance (file) order over surviving pairs.
    surviving_pairs = {(u, item) for u, ordered in kept.items() for _, item in ordered}
    user_ids: list[str] = []
    item_ids: list[str] = []
    user_index: dict[str, int] = {}
    item_index: dict[str, int] = {}
    for row in rows:
        if (row.user, row.item) not in surviving_pairs:
            continue
        if row.user not in user_index:
            user_index[row.user] = len(user_ids)
            user_ids.append(row.user)
        if row.item not in item_index:
            item_index[row.item] = len(item_ids)
            item_ids.append(row.item)

    n_users = len(user_ids)
    n_items = len(item_ids)
    counts = np.zeros(n_users, dtype=np.int64)
    val_items = np.zeros(n_users, dtype=np.int64)
    test_items = np.zeros(n_users, dtype=np.int64)
    train_lists: list[list[int]] = [[] for _ in range(n_users)]
    keys: list[int] = []
    for user, ordered in kept.items():
        u = user_index[user]
        internal = [item_index[item] for _, item in ordered]
        train_lists[u] = internal[:-2]
        val_items[u] = internal[-2]
        test_items[u] = internal[-1]
        counts[u] = len(internal) - 2
        keys.extend(u * n_items + i for i in internal)

    train_offsets = np.zeros(n_users + 1, dtype=np.int64)
    np.cumsum(counts, out=train_offsets[1:])
    train_flat = np.fromiter((i for lst in train_lists for i in lst),
                             dtype=np.int64, count=int(counts.sum()))
    pos_keys = np.sort(np.array(keys, dtype=np.uint64))
    return Dataset(user_ids, item_ids, train_flat, train_offsets,
                   val_items, test_items, pos_keys, user_index, item_index)


def _contains_keys(pos_keys: np.ndarray, keys: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(pos_keys, keys)
    idx_clipped = np.minimum(idx, pos_keys.size - 1)
    return (idx < pos_keys.size) & (pos_keys[idx_clipped] == keys)


def sample_triplets(ds: Dataset, size: int, rng: np.random.Generator
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized triplet sampling: uniform user, uniform train positive,
    uniform negative rejection-resampled against the user's full positive set."""
    if ds.n_users == 0 or ds.n_train == 0:
        raise InvalidInputError("dataset has no training interactions")
    users = rng.integers(0, ds.n_users, size=size)
    counts = ds.train_counts
    pos = ds.train_flat[ds.train_offsets[users] + rng.integers(0, counts[users])]
    neg = rng.integers(0, ds.n_items, size=size)
    base = users.astype(np.uint64) * np.uint64(ds.n_items)
    for _ in range(MAX_NEG_RETRIES):
        hit = _contains_keys(ds.pos_keys, base + neg.astype(np.uint64))
        if not hit.any():
            return users, pos, neg
        neg[hit] = rng.integers(0, ds.n_items, size=int(hit.sum()))
    raise SamplingExhaustedError(
        f"could not sample negatives after {MAX_NEG_RETRIES} retries; "
        "some user's positives may cover the whole catalogue"
    )


def sample_triplet(ds: Dataset, rng: np.random.Generator) -> Triplet:
    """One training triplet; see sample_triplets for the distribution."""
    users, pos, neg = sample_triplets(ds, 1, rng)
    return Triplet(int(users[0]), int(pos[0]), int(neg[0]))


def build_eval_candidates(ds: Dataset, user: int, split: str,
                          n_negatives: int = 100, seed: int = 0) -> np.ndarray:
    """Ground-truth item followed by n_negatives distinct unseen items.

    Deterministic in (seed, split, user) only, so every model variant ranks
    identical candidate lists.
    """
    _check_split(split)
    if not 0 <= user < ds.n_users:
        raise IndexError(f"user index {user} out of range [0, {ds.n_users})")
    gt = ds.held_out(user, split)
    positives = ds.positives(user)
    available = ds.n_items - positives.size
    if available < n_negatives:
        raise SamplingExhaustedError(
            f"user {user}: only {available} non-interacted items for "
            f"{n_negatives} requested negatives"
        )
    rng = np.random.default_rng([int(seed), _SPLIT_CODES[split], int(user)])
    if available <= 2 * n_negatives:
        pool = np.setdiff1d(np.arange(ds.n_items, dtype=np.int64), positives,
                            assume_unique=True)
        negs = pool[rng.permutation(pool.size)[:n_negatives]]
    else:
        chosen: list[int] = []
        taken = set(positives.tolist())
        while len(chosen) < n_negatives:
            draw = rng.integers(0, ds.n_items, size=2 * (n_negatives - len(chosen)) + 8)
            for item in draw.tolist():
                if item in taken:
                    continue
                taken.add(item)
                chosen.append(item)
                if len(chosen) == n_negatives:
                    break
        negs = np.array(chosen, dtype=np.int64)
    return np.concatenate([[gt], negs]).astype(np.int64)


def build_candidate_cache(ds: Dataset, split: str, n_negatives: int = 100,
                          seed: int = 0) -> np.ndarray:
    """(n_users, 1 + n_negatives) candidate matrix; column 0 is the ground truth."""
    _check_split(split)
    cache = np.empty((ds.n_users, 1 + n_negatives), dtype=np.int64)
    for user in range(ds.n_users):
        cache[user] = build_eval_candidates(ds, user, split, n_negatives, seed)
    return cache


def save_candidates(path: str, ds: Dataset, cache: np.ndarray) -> None:
    """Persist a candidate matrix as `user<TAB>gt<TAB>neg1,neg2,...` text."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for user in range(cache.shape[0]):
            gt = ds.item_ids[cache[user, 0]]
            negs = ",".join(ds.item_ids[i] for i in cache[user, 1:])
            fh.write(f"{ds.user_ids[user]}\t{gt}\t{negs}\n")


def load_candidates(path: str, ds: Dataset) -> np.ndarray:
    """Read a candidate file back into internal indices, validating ids."""
    rows: list[list[int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataFormatError(f"line {lineno}: expected user, ground truth, negatives")
            user, gt, negs = fields
            try:
                row = [ds.item_index[gt]] + [ds.item_index[n] for n in negs.split(",")]
                user_idx = ds.user_index[user]
            except KeyError as exc:
                raise DataFormatError(f"line {lineno}: unknown id {exc}") from None
            if user_idx != len(rows):
                raise DataFormatError(f"line {lineno}: users out of order")
            rows.append(row)
    if len(rows) != ds.n_users:
        raise DataFormatError("candidate file does not cover every user")
    return np.array(rows, dtype=np.int64)
