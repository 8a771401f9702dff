"""Ranking metrics under the sampled-candidate protocol.

Each user's held-out item is ranked against n sampled negatives by the
variant's distance (smaller is better). Ties against the ground truth are
broken by item id so repeated runs are reproducible. HR@k is 1 when the
ground truth lands in the top k; nDCG@k is 1/log2(rank + 1) there (single
relevant item, so the ideal DCG is 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset, build_candidate_cache, _check_split
from .errors import InvalidInputError
from .gyrovector import log_map_origin, poincare_distance
from .model import EmbeddingStore, Variant

_EVAL_CHUNK = 512


@dataclass
class EvalResult:
    hr_at_k: float
    ndcg_at_k: float
    k: int
    n_users_evaluated: int
    split: str


def rank_ground_truth(scores: Sequence[tuple[int, float]]) -> int:
    """Rank of the first entry among all entries; smaller distance wins.

    Candidates at exactly the ground-truth distance count against it only
    when their item id is smaller.
    """
    items = np.array([int(s[0]) for s in scores], dtype=np.int64)
    dists = np.array([float(s[1]) for s in scores])
    if not np.all(np.isfinite(dists)):
        raise InvalidInputError("candidate distances must be finite")
    gt_item, gt_dist = items[0], dists[0]
    better = int(np.sum(dists[1:] < gt_dist))
    tied = int(np.sum((dists[1:] == gt_dist) & (items[1:] < gt_item)))
    return 1 + better + tied


def hr_at_k(rank: int, k: int) -> float:
    if rank < 1 or k < 1:
        raise InvalidInputError(f"rank and k must be >= 1, got rank={rank}, k={k}")
    return 1.0 if rank <= k else 0.0


def ndcg_at_k(rank: int, k: int) -> float:
    if rank < 1 or k < 1:
        raise InvalidInputError(f"rank and k must be >= 1, got rank={rank}, k={k}")
    if rank > k:
        return 0.0
    return 1.0 / float(np.log2(rank + 1.0))


def _candidate_distances(store: EmbeddingStore, users: np.ndarray,
                         cand: np.ndarray) -> np.ndarray:
    """Distances from each user to its candidate items, (len(users), width)."""
    if store.variant is Variant.EUCLIDEAN:
        u = store.user_vectors[users][:, None, :]
        v = store.item_vectors[cand]
        return np.sqrt(np.sum((u - v) ** 2, axis=-1))
    if store.variant is Variant.TANGENT:
        u = log_map_origin(store.user_vectors[users], store.curvature)[:, None, :]
        v = log_map_origin(store.item_vectors[cand.reshape(-1)], store.curvature)
        v = v.reshape(cand.shape + (store.dim,))
        return np.sqrt(np.sum((u - v) ** 2, axis=-1))
    c = store.curvature
    if c == 0.0:
        u = store.user_vectors[users][:, None, :]
        v = store.item_vectors[cand]
        return 2.0 * np.sqrt(np.sum((u - v) ** 2, axis=-1))
    sqrt_c = np.sqrt(c)
    u = sqrt_c * store.user_vectors[users][:, None, :]
    v = sqrt_c * store.item_vectors[cand.reshape(-1)].reshape(cand.shape + (store.dim,))
    return poincare_distance(u, v) / sqrt_c


def _ranks_from_distances(cand: np.ndarray, dists: np.ndarray) -> np.ndarray:
    gt_d = dists[:, :1]
    gt_i = cand[:, :1]
    better = np.sum(dists[:, 1:] < gt_d, axis=1)
    tied = np.sum((dists[:, 1:] == gt_d) & (cand[:, 1:] < gt_i), axis=1)
    return 1 + better + tied


def evaluate(store: EmbeddingStore, ds: Dataset, split: str, k: int = 10,
             n_negatives: int = 100, seed: int = 0,
             cache: np.ndarray | None = None) -> EvalResult:
    """Mean HR@k and nDCG@k over all users on cached candidate lists.

    Reads the store and dataset only; passing the same cache (or the same
    seed) reproduces the result exactly. Users are reduced in id order.
    """
    _check_split(split)
    if store.n_users != ds.n_users or store.n_items != ds.n_items:
        raise InvalidInputError(
            f"store shape ({store.n_users} x {store.n_items}) does not match "
            f"dataset ({ds.n_users} x {ds.n_items})"
        )
    if cache is None:
        cache = build_candidate_cache(ds, split, n_negatives, seed)
    hits = 0.0
    gain = 0.0
    for lo in range(0, ds.n_users, _EVAL_CHUNK):
        users = np.arange(lo, min(lo + _EVAL_CHUNK, ds.n_users))
        cand = cache[users]
        dists = _candidate_distances(store, users, cand)
        if not np.all(np.isfinite(dists)):
            raise InvalidInputError("non-finite candidate distance during evaluation")
        ranks = _ranks_from_distances(cand, dists)
        hits += float(np.sum(ranks <= k))
        gain += float(np.sum(np.where(ranks <= k, 1.0 / np.log2(ranks + 1.0), 0.0)))
    n = ds.n_users
    return EvalResult(hr_at_k=hits / n, ndcg_at_k=gain / n, k=k,
                      n_users_evaluated=n, split=split)


def format_metrics_line(epoch: int, result: EvalResult) -> str:
    """One metrics-log line: epoch, split, HR@k, nDCG@k at 5 decimals."""
    return f"{epoch}\t{result.split}\t{result.hr_at_k:.5f}\t{result.ndcg_at_k:.5f}"
