"""Triplet losses and their exact Euclidean gradients.

The pull-push hinge compares squared distances of the (user, positive) and
(user, negative) pairs; the distortion penalty is the relative gap between
the ball distance and the Euclidean distance of the same coordinates,
summed over both pairs of the triplet. All functions are vectorized over
leading axes and pure; gradient accumulation across a batch is the
caller's job.

Gradients of the ball distance are computed from the acosh form evaluated
at sqrt(c)-scaled coordinates, which is algebraically identical to the
gyrovector formula used by the loss values but much better conditioned
near coincident points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .gyrovector import check_curvature, distance
from .model import Variant

# Below this threshold the squared-distance curvature series replaces the
# direct acosh ratio (both agree to ~1e-18 there).
_SERIES_CUTOFF = 1e-9
_TINY = 1e-300


@dataclass
class LossConfig:
    """Hyperparameters of the multi-task triplet objective."""

    margin: float = 0.5
    gamma: float = 0.75
    curvature: float = 1.0
    distortion_epsilon: float = 1e-9
    variant: Variant = Variant.HYPERBOLIC

    def __post_init__(self):
        self.variant = Variant.coerce(self.variant)
        self.curvature = check_curvature(self.curvature)
        if not (np.isfinite(self.margin) and self.margin > 0):
            raise ConfigError(f"margin: must be a positive real, got {self.margin}")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ConfigError(f"gamma: must be a non-negative real, got {self.gamma}")
        if not (np.isfinite(self.distortion_epsilon) and self.distortion_epsilon > 0):
            raise ConfigError(
                f"distortion_epsilon: must be a positive real, got {self.distortion_epsilon}"
            )


@dataclass
class TripletGrad:
    """Euclidean gradients of the total loss w.r.t. the three embeddings."""

    g_user: np.ndarray
    g_pos: np.ndarray
    g_neg: np.ndarray


def _sq_norm(x, keepdims=False):
    return np.sum(x * x, axis=-1, keepdims=keepdims)


def _pair_sq_dist_grads(x, y, c):
    """Squared ball distance d_c(x, y)^2 and its gradients w.r.t. x and y.

    Returns (dsq, gx, gy) with dsq shaped like the leading axes. The c = 0
    branch is the limit 4 ||x - y||^2.
    """
    if c == 0.0:
        diff = x - y
        return 4.0 * _sq_norm(diff), 8.0 * diff, -8.0 * diff
    sqrt_c = np.sqrt(c)
    xs = sqrt_c * x
    ys = sqrt_c * y
    a = 1.0 - _sq_norm(xs, keepdims=True)
    b = 1.0 - _sq_norm(ys, keepdims=True)
    xy = np.sum(xs * ys, axis=-1, keepdims=True)
    dsq_e = _sq_norm(xs - ys, keepdims=True)
    u = 2.0 * dsq_e / (a * b)
    root = np.sqrt(u * (u + 2.0))
    d1 = np.log1p(u + root)  # acosh(1 + u), stable near u = 0
    # d(acosh^2)/du = 2 acosh(1+u) / sqrt(u(u+2)); series 2(1 - u/3) near 0.
    scale = np.where(u > _SERIES_CUTOFF,
                     2.0 * d1 / np.maximum(root, _TINY),
                     2.0 - 2.0 * u / 3.0)
    gx1 = (4.0 / b) * (((_sq_norm(ys, keepdims=True) - 2.0 * xy + 1.0) / (a * a)) * xs - ys / a)
    gy1 = (4.0 / a) * (((_sq_norm(xs, keepdims=True) - 2.0 * xy + 1.0) / (b * b)) * ys - xs / b)
    dsq = np.squeeze(d1 * d1, axis=-1) / c
    return dsq, scale * gx1 / sqrt_c, scale * gy1 / sqrt_c


def _pair_dist_grads(x, y, c):
    """Ball distance d_c(x, y) and its gradients w.r.t. x and y.

    The gradient of the unsquared distance is singular at x = y; callers
    must guard coincident pairs (the distortion epsilon does this).
    """
    if c == 0.0:
        diff = x - y
        e = np.sqrt(_sq_norm(diff, keepdims=True))
        direction = diff / np.maximum(e, _TINY)
        gx = np.where(e > 0, 2.0 * direction, 0.0)
        return np.squeeze(2.0 * e, axis=-1), gx, -gx
    sqrt_c = np.sqrt(c)
    xs = sqrt_c * x
    ys = sqrt_c * y
    a = 1.0 - _sq_norm(xs, keepdims=True)
    b = 1.0 - _sq_norm(ys, keepdims=True)
    xy = np.sum(xs * ys, axis=-1, keepdims=True)
    u = 2.0 * _sq_norm(xs - ys, keepdims=True) / (a * b)
    root = np.maximum(np.sqrt(u * (u + 2.0)), _TINY)
    d1 = np.log1p(u + np.sqrt(u * (u + 2.0)))
    gx1 = (4.0 / b) * (((_sq_norm(ys, keepdims=True) - 2.0 * xy + 1.0) / (a * a)) * xs - ys / a)
    gy1 = (4.0 / a) * (((_sq_norm(xs, keepdims=True) - 2.0 * xy + 1.0) / (b * b)) * ys - xs / b)
    return np.squeeze(d1, axis=-1) / sqrt_c, gx1 / root, gy1 / root


def _pair_distortion_grads(x, y, c, eps):
    """Distortion term |d_ball - d_euc| / d_euc of one pair, with gradients.

    Pairs closer than eps in Euclidean distance contribute zero (the ratio
    is undefined at zero separation). The absolute value takes subgradient
    zero at its kink.
    """
    diff = x - y
    e = np.sqrt(_sq_norm(diff, keepdims=True))
    live = e >= eps
    e_safe = np.maximum(e, _TINY)
    ex = diff / e_safe
    h, hx, hy = _pair_dist_grads(x, y, c)
    h = h[..., None]
    delta = h - e
    sign = np.sign(delta)
    term = np.where(np.squeeze(live, axis=-1), np.squeeze(np.abs(delta) / e_safe, axis=-1), 0.0)
    gx = np.where(live, sign * (hx * e - h * ex) / (e_safe * e_safe), 0.0)
    gy = np.where(live, sign * (hy * e - h * (-ex)) / (e_safe * e_safe), 0.0)
    return term, gx, gy


def _require_points(u, vp, vn):
    u = np.asarray(u, dtype=np.float64)
    vp = np.asarray(vp, dtype=np.float64)
    vn = np.asarray(vn, dtype=np.float64)
    return u, vp, vn


def pull_push_loss(u, vp, vn, cfg: LossConfig) -> np.ndarray:
    """Hinge max(0, m + d^2(u, vp) - d^2(u, vn)).

    d is the ball distance for the hyperbolic variant and the Euclidean
    distance for the euclidean variant; no per-triplet rank weighting.
    """
    u, vp, vn = _require_points(u, vp, vn)
    if cfg.variant is Variant.EUCLIDEAN:
        dp_sq = _sq_norm(u - vp)
        dn_sq = _sq_norm(u - vn)
    elif cfg.variant is Variant.HYPERBOLIC:
        dp = distance(u, vp, cfg.curvature)
        dn = distance(u, vn, cfg.curvature)
        dp_sq, dn_sq = dp * dp, dn * dn
    else:
        raise ConfigError(
            "variant: tangent losses are evaluated on tangent coordinates; see baselines"
        )
    return np.maximum(0.0, cfg.margin + dp_sq - dn_sq)


def distortion_loss(u, vp, vn, cfg: LossConfig) -> np.ndarray:
    """Relative ball-vs-Euclidean deviation, summed over both triplet pairs.

    Identically zero for the euclidean variant (both metrics coincide).
    """
    u, vp, vn = _require_points(u, vp, vn)
    if cfg.variant is Variant.EUCLIDEAN:
        return np.zeros(np.broadcast_shapes(u.shape, vp.shape, vn.shape)[:-1])
    if cfg.variant is not Variant.HYPERBOLIC:
        raise ConfigError(
            "variant: tangent losses are evaluated on tangent coordinates; see baselines"
        )
    eps = cfg.distortion_epsilon
    c = cfg.curvature
    tp, _, _ = _pair_distortion_grads(u, vp, c, eps)
    tn, _, _ = _pair_distortion_grads(u, vn, c, eps)
    return tp + tn


def total_loss(u, vp, vn, cfg: LossConfig) -> np.ndarray:
    """Multi-task objective: pull-push hinge plus gamma times distortion."""
    loss = pull_push_loss(u, vp, vn, cfg)
    if cfg.gamma > 0 and cfg.variant is Variant.HYPERBOLIC:
        loss = loss + cfg.gamma * distortion_loss(u, vp, vn, cfg)
    return loss


def loss_and_grads(u, vp, vn, cfg: LossConfig):
    """Hinge value, distortion value, and TripletGrad in one pass.

    Shares the pair-distance computations between loss and gradients; this
    is the training hot path. Subgradient zero at the hinge boundary.
    """
    u, vp, vn = _require_points(u, vp, vn)
    if cfg.variant is Variant.EUCLIDEAN:
        dup = u - vp
        dun = u - vn
        hinge = cfg.margin + _sq_norm(dup) - _sq_norm(dun)
        active = (hinge > 0.0)[..., None]
        g_user = np.where(active, 2.0 * (vn - vp), 0.0)
        g_pos = np.where(active, -2.0 * dup, 0.0)
        g_neg = np.where(active, 2.0 * dun, 0.0)
        zeros = np.zeros_like(np.squeeze(active, axis=-1), dtype=np.float64)
        return np.maximum(hinge, 0.0), zeros, TripletGrad(g_user, g_pos, g_neg)
    if cfg.variant is not Variant.HYPERBOLIC:
        raise ConfigError(
            "variant: tangent gradients are computed in tangent coordinates; see baselines"
        )
    c = cfg.curvature
    dp_sq, gpu, gpp = _pair_sq_dist_grads(u, vp, c)
    dn_sq, gnu, gnn = _pair_sq_dist_grads(u, vn, c)
    hinge = cfg.margin + dp_sq - dn_sq
    active = (hinge > 0.0)[..., None]
    g_user = np.where(active, gpu - gnu, 0.0)
    g_pos = np.where(active, gpp, 0.0)
    g_neg = np.where(active, -gnn, 0.0)
    if cfg.gamma > 0:
        tp, dpu, dpp = _pair_distortion_grads(u, vp, c, cfg.distortion_epsilon)
        tn, dnu, dnn = _pair_distortion_grads(u, vn, c, cfg.distortion_epsilon)
        dist_val = tp + tn
        g_user = g_user + cfg.gamma * (dpu + dnu)
        g_pos = g_pos + cfg.gamma * dpp
        g_neg = g_neg + cfg.gamma * dnn
    else:
        dist_val = np.zeros_like(dp_sq)
    return np.maximum(hinge, 0.0), dist_val, TripletGrad(g_user, g_pos, g_neg)


def triplet_grad(u, vp, vn, cfg: LossConfig) -> TripletGrad:
    """Exact Euclidean gradient of total_loss w.r.t. each embedding."""
    _, _, grads = loss_and_grads(u, vp, vn, cfg)
    for name, g in (("user", grads.g_user), ("positive item", grads.g_pos),
                    ("negative item", grads.g_neg)):
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for the {name} embedding")
    return grads
