"""Euclidean triplet baseline and the tangent-space training variant.

The Euclidean baseline is plain triplet metric learning with squared
distances and post-step norm clipping. The tangent variant round-trips
rows through the origin maps each step: losses and gradients are the
Euclidean ones evaluated on log-mapped coordinates, the SGD step happens
there, and the result is mapped back into the ball.
"""

from __future__ import annotations

import numpy as np

from .gyrovector import exp_map_origin, log_map_origin
from .model import EmbeddingStore, Variant
from .objective import LossConfig, TripletGrad
from .optimizer import OptimConfig, rsgd_step


def _sq_norm(x):
    return np.sum(x * x, axis=-1)


def euclidean_triplet_loss(u, vp, vn, margin: float) -> np.ndarray:
    """max(0, m + ||u - vp||^2 - ||u - vn||^2)."""
    u = np.asarray(u, dtype=np.float64)
    vp = np.asarray(vp, dtype=np.float64)
    vn = np.asarray(vn, dtype=np.float64)
    return np.maximum(0.0, margin + _sq_norm(u - vp) - _sq_norm(u - vn))


def euclidean_triplet_grad(u, vp, vn, margin: float) -> TripletGrad:
    """Gradients of the Euclidean hinge; zero on the inactive side."""
    u = np.asarray(u, dtype=np.float64)
    vp = np.asarray(vp, dtype=np.float64)
    vn = np.asarray(vn, dtype=np.float64)
    dup = u - vp
    dun = u - vn
    active = (margin + _sq_norm(dup) - _sq_norm(dun) > 0.0)[..., None]
    g_user = np.where(active, 2.0 * (vn - vp), 0.0)
    g_pos = np.where(active, -2.0 * dup, 0.0)
    g_neg = np.where(active, 2.0 * dun, 0.0)
    return TripletGrad(g_user, g_pos, g_neg)


def to_tangent(p, c: float) -> np.ndarray:
    """Map a ball point to the tangent space at the origin (log_0)."""
    return log_map_origin(p, c)


def from_tangent(v, c: float) -> np.ndarray:
    """Map a tangent vector at the origin back into the ball (exp_0)."""
    return exp_map_origin(v, c)


def tangent_triplet_loss(u, vp, vn, margin: float, c: float) -> np.ndarray:
    """Euclidean hinge evaluated on the log-mapped coordinates of ball points."""
    return euclidean_triplet_loss(to_tangent(u, c), to_tangent(vp, c), to_tangent(vn, c), margin)


def tangent_triplet_grad(u, vp, vn, margin: float, c: float) -> TripletGrad:
    """Gradients of tangent_triplet_loss w.r.t. the tangent coordinates.

    These feed the tangent-variant SGD step, which updates in tangent
    coordinates before mapping back; they are not ball-coordinate
    gradients.
    """
    return euclidean_triplet_grad(to_tangent(u, c), to_tangent(vp, c), to_tangent(vn, c), margin)


def hyperts_step(store: EmbeddingStore, triplet, loss_cfg: LossConfig,
                 optim_cfg: OptimConfig) -> None:
    """One tangent-space step: log-map, Euclidean hinge SGD, exp-map, project."""
    if store.variant is not Variant.TANGENT:
        raise ValueError(f"hyperts_step requires a tangent-variant store, got {store.variant}")
    u_row, p_row, n_row = store.lookup_triplet(triplet)
    grads = tangent_triplet_grad(u_row, p_row, n_row, loss_cfg.margin, optim_cfg.curvature)
    rsgd_step(store, triplet, grads, optim_cfg)
