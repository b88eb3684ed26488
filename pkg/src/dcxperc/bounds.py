"""Analytic radius bounds for processes dominated by, or dominating, a Poisson
process of intensity ``lam`` in the directionally convex order.

All functions are pure.  One-dimensional optimizations over the Chernoff
parameter ``s`` run golden-section search on ``log s`` in ``[-20, 20]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "rc_upper_tilde",
    "rc_lower",
    "c_lambda",
    "c_lambda_k",
    "critical_intensity",
    "Estimate",
    "BoundReport",
    "sandwich_report",
    "golden_max",
]

LOG_S_RANGE = (-20.0, 20.0)
_INVPHI = (math.sqrt(5) - 1) / 2


def rc_upper_tilde(lam: float, d: int = 2) -> float:
    """``sqrt(d) * (log(3^d - 2) / lam)^(1/d)``; zero in one dimension."""
    if not lam > 0 or d < 1:
        raise ValueError("need lam > 0 and d >= 1")
    return math.sqrt(d) * (math.log(3 ** d - 2) / lam) ** (1.0 / d)


def rc_lower(lam: float, d: int = 2) -> float:
    """``1 / (2 (lam (3^d - 1))^(1/d))``."""
    if not lam > 0 or d < 1:
        raise ValueError("need lam > 0 and d >= 1")
    return 0.5 / (lam * (3 ** d - 1)) ** (1.0 / d)


def golden_max(f, a: float, b: float, tol: float = 1e-10, max_iter: int = 400):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * (1 + abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    # compare against the endpoints so monotone objectives land on the boundary
    best = max(((f(x), x), (f(a), a), (f(b), b)))
    return best[1], best[0]


def _chernoff_exponent_sub(log_s: float, u: float) -> float:
    """``s + (1 - e^s) u`` with ``u = lam (2r)^d``."""
    s = math.exp(log_s)
    if s > 700:
        return -math.inf
    return s - math.expm1(s) * u


def c_lambda(lam: float, d: int = 2, tol: float = 1e-10) -> float:
    """Largest ``r`` for which some ``s > 0`` gives
    ``s + (1 - e^s) lam (2r)^d > log(3^d - 1)``.

    Below this radius the Boolean model of any process idcx-dominated by the
    Poisson process of intensity ``lam`` does not percolate.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    level = math.log(3 ** d - 1)

    def best(r):
        u = lam * (2 * r) ** d
        return golden_max(lambda t: _chernoff_exponent_sub(t, u), *LOG_S_RANGE, tol=1e-12)[1]

    lo, hi = 0.0, 1.0 / lam ** (1.0 / d)
    while best(hi) > level:
        lo, hi = hi, 2 * hi
        if hi > 1e300:
            raise ArithmeticError("c_lambda: failed to bracket the radius")
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if best(mid) > level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def c_lambda_k(lam: float, k: int, d: int = 2, tol: float = 1e-10) -> float:
    """Infimum over ``s > 0`` of the smallest ``r`` with
    ``(1 - e^-s) lam (r/sqrt(d))^d - s (ceil(k/2) - 1) > log(3^d - 2)``.

    Above this radius the k-covered set of any process ddcx-dominated by the
    Poisson process of intensity ``lam`` percolates.
    """
    if not lam > 0 or k < 1:
        raise ValueError("need lam > 0 and k >= 1")
    m = math.ceil(k / 2)
    level = math.log(3 ** d - 2)
    if m == 1:
        # r(s) decreases in s; the infimum is the s -> infinity limit
        return rc_upper_tilde(lam, d)

    def neg_r(log_s):
        s = math.exp(log_s)
        num = level + s * (m - 1)
        den = -math.expm1(-s) * lam
        return -math.sqrt(d) * (num / den) ** (1.0 / d)

    x, v = golden_max(neg_r, *LOG_S_RANGE, tol=tol)
    if x in LOG_S_RANGE:
        raise ArithmeticError(f"c_lambda_k: optimum at the search boundary log s = {x}")
    return -v


def critical_intensity(r: float, lambda_ref: float, rc_ref: float, d: int = 2) -> float:
    """Intensity at which a process of the reference family becomes critical
    at radius ``r``, by scaling: ``lambda_ref * (rc_ref / r)^d``."""
    if not r > 0:
        raise ValueError("r must be positive")
    return lambda_ref * (rc_ref / r) ** d


@dataclass(frozen=True)
class Estimate:
    value: float
    lo: float = None
    hi: float = None

    def __post_init__(self):
        if self.lo is None:
            object.__setattr__(self, "lo", self.value)
        if self.hi is None:
            object.__setattr__(self, "hi", self.value)

    @classmethod
    def of(cls, x) -> "Estimate":
        if isinstance(x, Estimate):
            return x
        if hasattr(x, "ci_lo") and hasattr(x, "value"):
            return cls(x.value, x.ci_lo, x.ci_hi)
        if isinstance(x, (tuple, list)):
            return cls(*x)
        if x is None:
            return cls(math.nan, math.nan, math.nan)
        return cls(float(x))


@dataclass(frozen=True)
class BoundReport:
    lower: float
    upper: float
    methods: tuple
    params: dict = field(default_factory=dict)
    violation: bool = False
    violations: tuple = ()


def sandwich_report(rc_lower_sub2, rc_upper_sub2, rc_hat_sub1, **params) -> BoundReport:
    """Check ``lower(2) <= rc(1) <= upper(2)`` at the level of the supplied
    confidence intervals.

    ``rc_lower_sub2`` / ``rc_upper_sub2`` are the path-count and contour
    surrogates of the dcx-larger process; ``rc_hat_sub1`` is the spanning
    estimate for the dcx-smaller one.  Each argument may be a float, a
    ``(value, lo, hi)`` triple, or an :class:`Estimate`.  A violation is
    reported only when the intervals are disjoint in the wrong order.
    """
    lo2, hi2, rc1 = Estimate.of(rc_lower_sub2), Estimate.of(rc_upper_sub2), Estimate.of(rc_hat_sub1)
    chain = [("lower_2", lo2), ("rc_1", rc1), ("upper_2", hi2)]
    bad = []
    for (na, a), (nb, b) in zip(chain, chain[1:]):
        if np.isfinite(a.lo) and np.isfinite(b.hi) and a.lo > b.hi:
            bad.append(f"{na} > {nb}")
    if np.isfinite(lo2.lo) and np.isfinite(hi2.hi) and lo2.lo > hi2.hi and "lower_2 > upper_2" not in bad:
        bad.append("lower_2 > upper_2")
    return BoundReport(
        lower=lo2.value,
        upper=hi2.value,
        methods=("expected-paths", "spanning", "void-contours"),
        params={"rc_hat": rc1.value, **params},
        violation=bool(bad),
        violations=tuple(bad),
    )
