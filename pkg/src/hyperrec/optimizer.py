"""Projected Riemannian SGD and its variant-specific siblings.

The hyperbolic update rescales the Euclidean gradient by the inverse
Poincare metric tensor, takes the first-order retraction (additive step),
and projects back into the ball. The Euclidean variant skips the rescale
and clips row norms to 1; the tangent variant steps in log-mapped
coordinates and maps back.

apply_batch performs one synchronous update per batch: per-triplet
gradients of rows shared between triplets are summed before the single
rescale/step/project of that row, i.e. the optimized objective is the sum
of the batch's triplet losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, OutOfBallError
from .gyrovector import check_curvature, exp_map_origin, log_map_origin, project_to_ball
from .model import EmbeddingStore, Variant
from .objective import TripletGrad

_TINY = 1e-300


@dataclass
class OptimConfig:
    learning_rate: float
    curvature: float = 1.0
    grad_clip: float | None = None
    # Apply the inverse metric rescale (the Riemannian conversion). Plain
    # SGD on hyperbolic rows is available for experimentation.
    use_metric_rescale: bool = True
    # Rescale with ((1 - c||x||^2)^2)/4 instead of the unit-ball tensor.
    generalized_rescale: bool = False

    def __post_init__(self):
        self.curvature = check_curvature(self.curvature)
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ConfigError(f"learning_rate: must be a positive real, got {self.learning_rate}")
        if self.grad_clip is not None and not (np.isfinite(self.grad_clip) and self.grad_clip > 0):
            raise ConfigError(f"grad_clip: must be a positive real or None, got {self.grad_clip}")


def riemannian_rescale(theta, g_euclidean, curvature: float = 1.0) -> np.ndarray:
    """Inverse metric tensor applied to a Euclidean gradient.

    Returns ((1 - c ||theta||^2)^2 / 4) * g. The default curvature 1.0 is
    the unit-ball conversion used for training at every c; pass the actual
    curvature to get the generalized factor.
    """
    curvature = check_curvature(curvature)
    theta = np.asarray(theta, dtype=np.float64)
    g = np.asarray(g_euclidean, dtype=np.float64)
    sq = np.sum(theta * theta, axis=-1, keepdims=True)
    if curvature > 0.0 and np.any(curvature * sq >= 1.0):
        raise OutOfBallError("riemannian_rescale requires points strictly inside the ball")
    factor = (1.0 - curvature * sq) ** 2 / 4.0
    return factor * g


def clip_rows_to_unit(rows: np.ndarray) -> np.ndarray:
    """Clip each row to Euclidean norm at most 1 (the CML convention)."""
    norms = np.sqrt(np.sum(rows * rows, axis=-1, keepdims=True))
    scale = np.minimum(1.0, 1.0 / np.maximum(norms, _TINY))
    return rows * scale


def _clip_grad_rows(g: np.ndarray, max_norm: float | None) -> np.ndarray:
    if max_norm is None:
        return g
    norms = np.sqrt(np.sum(g * g, axis=-1, keepdims=True))
    scale = np.minimum(1.0, max_norm / np.maximum(norms, _TINY))
    return g * scale


def _updated_rows(rows: np.ndarray, g: np.ndarray, cfg: OptimConfig, variant: Variant) -> np.ndarray:
    g = _clip_grad_rows(g, cfg.grad_clip)
    if variant is Variant.EUCLIDEAN:
        return clip_rows_to_unit(rows - cfg.learning_rate * g)
    if variant is Variant.TANGENT:
        t = log_map_origin(rows, cfg.curvature)
        return project_to_ball(exp_map_origin(t - cfg.learning_rate * g, cfg.curvature),
                               cfg.curvature)
    if cfg.use_metric_rescale:
        rescale_c = cfg.curvature if cfg.generalized_rescale else 1.0
        g = riemannian_rescale(rows, g, rescale_c)
    return project_to_ball(rows - cfg.learning_rate * g, cfg.curvature)


def rsgd_step(store: EmbeddingStore, triplet, grads: TripletGrad, cfg: OptimConfig) -> None:
    """One projected gradient step on the three rows of a triplet.

    New rows are computed from the pre-step values and written back only if
    all of them are finite; otherwise the step is aborted.
    """
    user, pos, neg = int(triplet[0]), int(triplet[1]), int(triplet[2])
    u_row, p_row, n_row = store.lookup_triplet((user, pos, neg))
    new_u = _updated_rows(u_row[None, :], np.asarray(grads.g_user, dtype=np.float64)[None, :],
                          cfg, store.variant)[0]
    new_p = _updated_rows(p_row[None, :], np.asarray(grads.g_pos, dtype=np.float64)[None, :],
                          cfg, store.variant)[0]
    new_n = _updated_rows(n_row[None, :], np.asarray(grads.g_neg, dtype=np.float64)[None, :],
                          cfg, store.variant)[0]
    for name, row in (("user", new_u), ("positive item", new_p), ("negative item", new_n)):
        if not np.all(np.isfinite(row)):
            raise NumericalError(
                f"non-finite update for the {name} row of triplet ({user}, {pos}, {neg})"
            )
    store.user_vectors[user] = new_u
    store.item_vectors[pos] = new_p
    store.item_vectors[neg] = new_n


def apply_batch(store: EmbeddingStore, users, pos_items, neg_items,
                grads: TripletGrad, cfg: OptimConfig) -> None:
    """One synchronous update from the accumulated gradients of a batch."""
    users = np.asarray(users, dtype=np.int64)
    pos_items = np.asarray(pos_items, dtype=np.int64)
    neg_items = np.asarray(neg_items, dtype=np.int64)

    uniq_u, inv_u = np.unique(users, return_inverse=True)
    acc_u = np.zeros((uniq_u.size, store.dim))
    np.add.at(acc_u, inv_u, grads.g_user)
    new_u = _updated_rows(store.user_vectors[uniq_u], acc_u, cfg, store.variant)

    item_idx = np.concatenate([pos_items, neg_items])
    item_g = np.concatenate([grads.g_pos, grads.g_neg], axis=0)
    uniq_i, inv_i = np.unique(item_idx, return_inverse=True)
    acc_i = np.zeros((uniq_i.size, store.dim))
    np.add.at(acc_i, inv_i, item_g)
    new_i = _updated_rows(store.item_vectors[uniq_i], acc_i, cfg, store.variant)

    if not (np.all(np.isfinite(new_u)) and np.all(np.isfinite(new_i))):
        raise NumericalError("non-finite update in batch step; no rows were modified")
    store.user_vectors[uniq_u] = new_u
    store.item_vectors[uniq_i] = new_i
