"""High-precision oracles used to derive frozen expected values.

Each helper evaluates a closed-form identity with mpmath at 50 digits,
independent of the library's float64 code paths. Tests assert their frozen
literals against these oracles and then the implementation against the
literals.
"""

from mpmath import mp, mpf, atanh, tanh, acosh, sqrt, log

mp.dps = 50


def collinear_add(a: float, b: float) -> float:
    """1-D gyro-addition (a + b) / (1 + a b) at unit curvature."""
    a, b = mpf(repr(a)), mpf(repr(b))
    return float((a + b) / (1 + a * b))


def scalar_mul_1d(r: float, t: float) -> float:
    """tanh(r * atanh(t)) for a point at distance t from the origin."""
    return float(tanh(mpf(repr(r)) * atanh(mpf(repr(t)))))


def conformal(t: float, c: float = 1.0) -> float:
    """2 / (1 - c t^2)."""
    t, c = mpf(repr(t)), mpf(repr(c))
    return float(2 / (1 - c * t * t))


def atanh_hp(t: float) -> float:
    return float(atanh(mpf(repr(t))))


def dist_origin(t: float, c: float = 1.0) -> float:
    """(2/sqrt(c)) atanh(sqrt(c) t): ball distance from the origin."""
    t, c = mpf(repr(t)), mpf(repr(c))
    return float(2 / sqrt(c) * atanh(sqrt(c) * t))


def dist_acosh_1d(x: float, y: float) -> float:
    """acosh form of the unit-ball distance for collinear 1-D points."""
    x, y = mpf(repr(x)), mpf(repr(y))
    return float(acosh(1 + 2 * (x - y) ** 2 / ((1 - x * x) * (1 - y * y))))


def dist_collinear(x: float, y: float, c: float) -> float:
    """Ball distance of collinear 1-D points at curvature c via gyro-addition."""
    x, y, c = mpf(repr(x)), mpf(repr(y)), mpf(repr(c))
    z = (y - x) / (1 - c * x * y)
    return float(2 / sqrt(c) * atanh(sqrt(c) * abs(z)))


def init_alpha(beta: float, dim: int) -> float:
    """(3 beta^2 / (2 dim))^(1/3)."""
    beta = mpf(repr(beta))
    return float((3 * beta ** 2 / (2 * dim)) ** (mpf(1) / 3))


def pull_push_origin(m: float, tp: float, tn: float) -> float:
    """m + d(0,tp)^2 - d(0,tn)^2 at unit curvature (both hinge-active)."""
    m = mpf(repr(m))
    val = m + (2 * atanh(mpf(repr(tp)))) ** 2 - (2 * atanh(mpf(repr(tn)))) ** 2
    return float(val if val > 0 else mpf(0))


def distortion_origin(tp: float, tn: float) -> float:
    """Sum of |d_ball - d_euc| / d_euc for pairs (0, tp) and (0, tn), c = 1."""
    tp, tn = mpf(repr(tp)), mpf(repr(tn))
    term = lambda t: (2 * atanh(t) - t) / t
    return float(term(tp) + term(tn))


def null_ndcg(k: int, n_candidates: int) -> float:
    """Expected nDCG@k of a uniformly random rank among n_candidates."""
    s = sum(1 / (log(r + 1) / log(2)) for r in range(1, k + 1))
    return float(s / n_candidates)
