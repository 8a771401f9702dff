"""Mobius gyrovector operations on the Poincare ball with curvature scale c.

Every function takes numpy arrays whose last axis indexes coordinates;
leading axes broadcast elementwise, so the same code serves single points
and batches. A point of curvature c >= 0 must satisfy c * ||x||^2 < 1
(the open ball of radius 1/sqrt(c)); c = 0 selects the Euclidean
degenerate branch of every operation.

All arithmetic is float64. The geometry that matters lives near the ball
boundary, where float32 has already run out of mantissa.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, NumericalError, OutOfBallError

# Margin kept between stored points and the boundary: after projection
# every row satisfies ||x|| <= (1 - BALL_EPS) / sqrt(c).
BALL_EPS = 1e-5
# Mobius addition denominators below this magnitude abort the operation.
MIN_DENOM = 1e-15
# atanh arguments and tanh outputs are clamped here so rounding can never
# produce an infinity or a point outside the open ball.
TANH_MAX = 1.0 - 1e-15
# Vectors with norm below this count as zero (identity limits of exp/log).
ZERO_TOL = 1e-15


def check_curvature(c: float) -> float:
    c = float(c)
    if not np.isfinite(c) or c < 0.0:
        raise InvalidInputError(f"curvature must be a finite non-negative real, got {c!r}")
    return c


def _as_finite_array(name: str, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite components")
    return arr


def _sq_norm(x: np.ndarray, keepdims: bool = False) -> np.ndarray:
    return np.sum(x * x, axis=-1, keepdims=keepdims)


def _check_in_ball(name: str, x: np.ndarray, c: float) -> None:
    if c > 0.0 and np.any(c * _sq_norm(x) >= 1.0):
        raise OutOfBallError(f"{name} lies outside the open ball of curvature {c}")


def mobius_add(x, y, c: float) -> np.ndarray:
    """Mobius addition x (+)_c y.

    At c = 0 the formula reduces exactly to x + y. The sum of two in-ball
    points is again in the ball up to rounding; callers that store results
    long-term should project explicitly.
    """
    c = check_curvature(c)
    x = _as_finite_array("x", x)
    y = _as_finite_array("y", y)
    _check_in_ball("x", x, c)
    _check_in_ball("y", y, c)
    x2 = _sq_norm(x, keepdims=True)
    y2 = _sq_norm(y, keepdims=True)
    xy = np.sum(x * y, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * c * xy + c * y2) * x + (1.0 - c * x2) * y
    den = 1.0 + 2.0 * c * xy + c * c * x2 * y2
    if np.any(np.abs(den) < MIN_DENOM):
        raise NumericalError("Mobius addition denominator is numerically degenerate")
    return num / den


def mobius_sub(x, y, c: float) -> np.ndarray:
    """Mobius subtraction: x (-)_c y = x (+)_c (-y)."""
    y = _as_finite_array("y", y)
    return mobius_add(x, -y, c)


def mobius_scalar_mul(r: float, x, c: float) -> np.ndarray:
    """Mobius scalar multiplication r (x)_c x; r (x)_c 0 = 0.

    At c = 0 this is plain scalar multiplication.
    """
    r = float(r)
    if not np.isfinite(r):
        raise InvalidInputError(f"scalar factor must be finite, got {r!r}")
    c = check_curvature(c)
    x = _as_finite_array("x", x)
    _check_in_ball("x", x, c)
    if c == 0.0:
        return r * x
    sqrt_c = np.sqrt(c)
    norm = np.sqrt(_sq_norm(x, keepdims=True))
    safe = np.maximum(norm, ZERO_TOL)
    t = np.minimum(sqrt_c * norm, TANH_MAX)
    factor = np.minimum(np.tanh(r * np.arctanh(t)), TANH_MAX) / (sqrt_c * safe)
    return np.where(norm > ZERO_TOL, factor * x, 0.0)


def conformal_factor(x, c: float) -> np.ndarray:
    """Conformal factor lambda_x^c = 2 / (1 - c ||x||^2); equals 2 at the origin."""
    c = check_curvature(c)
    x = _as_finite_array("x", x)
    denom = 1.0 - c * _sq_norm(x)
    if np.any(denom <= 0.0):
        raise OutOfBallError("conformal factor undefined: c * ||x||^2 >= 1")
    return 2.0 / denom


def exp_map(x, v, c: float) -> np.ndarray:
    """Mobius exponential map of tangent vector v at base point x.

    exp_x(0) = x by the identity limit. At c = 0 this is x + v.
    """
    c = check_curvature(c)
    x = _as_finite_array("x", x)
    v = _as_finite_array("v", v)
    _check_in_ball("x", x, c)
    if c == 0.0:
        return x + v
    sqrt_c = np.sqrt(c)
    lam = 2.0 / (1.0 - c * _sq_norm(x, keepdims=True))
    vn = np.sqrt(_sq_norm(v, keepdims=True))
    arg = sqrt_c * lam * vn / 2.0
    factor = np.minimum(np.tanh(arg), TANH_MAX) / (sqrt_c * np.maximum(vn, ZERO_TOL))
    out = mobius_add(x, np.where(vn > ZERO_TOL, factor * v, 0.0), c)
    return np.where(vn > ZERO_TOL, out, np.broadcast_to(x, out.shape))


def log_map(x, y, c: float) -> np.ndarray:
    """Mobius logarithmic map of y at base point x; zero vector when y = x.

    At c = 0 this is y - x.
    """
    c = check_curvature(c)
    x = _as_finite_array("x", x)
    y = _as_finite_array("y", y)
    _check_in_ball("x", x, c)
    _check_in_ball("y", y, c)
    if c == 0.0:
        return y - x
    sqrt_c = np.sqrt(c)
    z = mobius_add(-x, y, c)
    zn = np.sqrt(_sq_norm(z, keepdims=True))
    lam = 2.0 / (1.0 - c * _sq_norm(x, keepdims=True))
    t = np.minimum(sqrt_c * zn, TANH_MAX)
    factor = (2.0 / (lam * sqrt_c)) * np.arctanh(t) / np.maximum(zn, ZERO_TOL)
    return np.where(zn > ZERO_TOL, factor * z, 0.0)


def exp_map_origin(v, c: float) -> np.ndarray:
    """Exponential map at the origin: tanh(sqrt(c)||v||) * v / (sqrt(c)||v||)."""
    c = check_curvature(c)
    v = _as_finite_array("v", v)
    if c == 0.0:
        return v.copy()
    sqrt_c = np.sqrt(c)
    vn = np.sqrt(_sq_norm(v, keepdims=True))
    factor = np.minimum(np.tanh(sqrt_c * vn), TANH_MAX) / (sqrt_c * np.maximum(vn, ZERO_TOL))
    return np.where(vn > ZERO_TOL, factor * v, 0.0)


def log_map_origin(y, c: float) -> np.ndarray:
    """Logarithmic map at the origin: atanh(sqrt(c)||y||) * y / (sqrt(c)||y||)."""
    c = check_curvature(c)
    y = _as_finite_array("y", y)
    _check_in_ball("y", y, c)
    if c == 0.0:
        return y.copy()
    sqrt_c = np.sqrt(c)
    yn = np.sqrt(_sq_norm(y, keepdims=True))
    t = np.minimum(sqrt_c * yn, TANH_MAX)
    factor = np.arctanh(t) / (sqrt_c * np.maximum(yn, ZERO_TOL))
    return np.where(yn > ZERO_TOL, factor * y, 0.0)


def distance(x, y, c: float) -> np.ndarray:
    """Gyrovector distance d_c(x, y) = (2/sqrt(c)) atanh(sqrt(c) ||(-x) (+)_c y||).

    The c -> 0 limit is 2 ||x - y||, which is what the c = 0 branch returns.
    """
    c = check_curvature(c)
    x = _as_finite_array("x", x)
    y = _as_finite_array("y", y)
    _check_in_ball("x", x, c)
    _check_in_ball("y", y, c)
    if c == 0.0:
        return 2.0 * np.sqrt(_sq_norm(x - y))
    sqrt_c = np.sqrt(c)
    z = mobius_add(-x, y, c)
    t = np.minimum(sqrt_c * np.sqrt(_sq_norm(z)), TANH_MAX)
    return (2.0 / sqrt_c) * np.arctanh(t)


def poincare_distance(x, y) -> np.ndarray:
    """Unit-ball distance acosh(1 + 2||x-y||^2 / ((1-||x||^2)(1-||y||^2))).

    Valid for c = 1 only; agrees with distance(x, y, 1.0). Evaluated as
    log1p(u + sqrt(u (u + 2))) with u = 2||x-y||^2 / ((1-||x||^2)(1-||y||^2)),
    which stays accurate for nearly coincident points.
    """
    x = _as_finite_array("x", x)
    y = _as_finite_array("y", y)
    a = 1.0 - _sq_norm(x)
    b = 1.0 - _sq_norm(y)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise OutOfBallError("poincare_distance requires points inside the unit ball")
    u = 2.0 * _sq_norm(x - y) / (a * b)
    return np.log1p(u + np.sqrt(u * (u + 2.0)))


def project_to_ball(x, c: float) -> np.ndarray:
    """Rescale x onto norm (1 - BALL_EPS)/sqrt(c) when it is at or past that shell.

    Points already strictly inside the shell pass through unchanged; at
    c = 0 the projection is the identity.
    """
    c = check_curvature(c)
    x = _as_finite_array("x", x)
    if c == 0.0:
        return x
    sq = c * _sq_norm(x, keepdims=True)
    limit = (1.0 - BALL_EPS) ** 2
    norm = np.sqrt(_sq_norm(x, keepdims=True))
    scale = (1.0 - BALL_EPS) / (np.sqrt(c) * np.maximum(norm, ZERO_TOL))
    return np.where(sq >= limit, scale * x, x)
