"""Clustering statistics and stochastic-order checks.

Exact convex-order comparison of integer distributions through stop-loss
transforms, Monte-Carlo evidence for directionally convex order of count
vectors, Ripley's K, void probabilities, factorial moments, and an
executable form of the second-difference lemma used to extend dcx
functions to integer lattices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import PointPattern, Window, as_stream, map_ordered, pairs_within
from .percolation import wilson_interval

__all__ = [
    "IntDistribution",
    "CxVerdict",
    "cx_order_check",
    "ExpPlus",
    "ExpMinus",
    "Ramp",
    "ProductCounts",
    "default_battery",
    "DcxRow",
    "dcx_counts_check",
    "ripley_k",
    "box_counts",
    "void_probability",
    "factorial_moment",
    "FaceReport",
    "weak_poisson_report",
    "second_difference_convexity",
]

TRUNCATION = 1e-12


# --------------------------------------------------------------------------
# integer distributions and convex order


@dataclass(frozen=True, eq=False)
class IntDistribution:
    """pmf on ``{0, ..., cap}`` with at most ``1e-12`` of mass cut off."""

    pmf: np.ndarray
    label: str = ""

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=float).ravel()
        if p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("pmf must be a nonempty nonnegative finite vector")
        if abs(p.sum() - 1.0) > TRUNCATION:
            raise ValueError(f"pmf sums to {p.sum():.15g}; truncated mass exceeds {TRUNCATION} (increase cap)")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)

    @classmethod
    def from_kernel(cls, kernel, cap: int | None = None) -> "IntDistribution":
        """Tabulate a replication kernel; without ``cap`` the smallest adequate
        cap is found by doubling."""
        if cap is None:
            cap = max(8, int(4 * kernel.mean) + 8)
            while 1.0 - kernel.pmf(np.arange(cap + 1)).sum() > TRUNCATION / 10:
                cap *= 2
        return cls(kernel.pmf(np.arange(cap + 1)), getattr(kernel, "tag", ""))

    @property
    def cap(self) -> int:
        return len(self.pmf) - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(len(self.pmf))

    @property
    def mean(self) -> float:
        return math.fsum(self.pmf * self.support)

    @property
    def var(self) -> float:
        m = self.mean
        return math.fsum(self.pmf * (self.support - m) ** 2)

    def padded(self, cap: int) -> np.ndarray:
        out = np.zeros(cap + 1)
        out[: len(self.pmf)] = self.pmf
        return out

    def stop_loss(self, cap: int | None = None) -> np.ndarray:
        """``E (X - k)^+`` for ``k = 0..cap``."""
        cap = self.cap if cap is None else cap
        p = self.padded(max(cap, self.cap))
        j = np.arange(len(p))
        # tail sums over j > k
        s0 = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
        s1 = np.concatenate([np.cumsum((p * j)[::-1])[::-1][1:], [0.0]])
        return (s1 - j * s0)[: cap + 1]

    def expect(self, f: Callable) -> float:
        return math.fsum(self.pmf * f(self.support.astype(float)))


@dataclass(frozen=True)
class CxVerdict:
    verdict: str  # "A<=cx B", "B<=cx A", "equal", "incomparable"
    witness: object
    mean_gap: float
    max_gap: float


def cx_order_check(a: IntDistribution, b: IntDistribution, tol: float = 1e-12) -> CxVerdict:
    """Exact convex-order comparison: equal means and ordered stop-loss
    transforms on every integer ``k``.

    The witness of an ``incomparable`` verdict is ``"mean"`` when means
    differ, else the first ``k`` where ``E(A-k)^+ > E(B-k)^+``.
    """
    mean_gap = a.mean - b.mean
    cap = max(a.cap, b.cap)
    diff = a.stop_loss(cap) - b.stop_loss(cap)
    max_gap = float(np.max(np.abs(diff)))
    if abs(mean_gap) > tol:
        return CxVerdict("incomparable", "mean", mean_gap, max_gap)
    if np.all(np.abs(diff) <= tol):
        return CxVerdict("equal", None, mean_gap, max_gap)
    if np.all(diff <= tol):
        return CxVerdict("A<=cx B", None, mean_gap, max_gap)
    if np.all(diff >= -tol):
        return CxVerdict("B<=cx A", None, mean_gap, max_gap)
    return CxVerdict("incomparable", int(np.argmax(diff > tol)), mean_gap, max_gap)


# --------------------------------------------------------------------------
# test-function battery


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _weights(s, k):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return np.full(k, s[0]) if s.size == 1 else s


@dataclass(frozen=True)
class ExpPlus:
    """``exp(sum s_i x_i)``, ``s >= 0``: increasing dcx."""

    s: tuple = (1.0,)
    order_class = "idcx"

    def __call__(self, x):
        x = _as_matrix(x)
        return np.exp(x @ _weights(self.s, x.shape[1]))

    @property
    def name(self):
        return "exp_plus(" + ",".join(f"{v:g}" for v in np.atleast_1d(self.s)) + ")"


@dataclass(frozen=True)
class ExpMinus:
    """``exp(-sum s_i x_i)``, ``s >= 0``: decreasing dcx."""

    s: tuple = (1.0,)
    order_class = "ddcx"

    def __call__(self, x):
        x = _as_matrix(x)
        return np.exp(-(x @ _weights(self.s, x.shape[1])))

    @property
    def name(self):
        return "exp_minus(" + ",".join(f"{v:g}" for v in np.atleast_1d(self.s)) + ")"


@dataclass(frozen=True)
class Ramp:
    """``max(0, sum x_i - a)``: dcx."""

    a: float = 0.0
    order_class = "dcx"

    def __call__(self, x):
        return np.maximum(0.0, _as_matrix(x).sum(axis=1) - self.a)

    @property
    def name(self):
        return f"ramp({self.a:g})"


@dataclass(frozen=True)
class ProductCounts:
    """``prod x_i``; increasing dcx on the nonnegative orthant."""

    order_class = "idcx"

    def __call__(self, x):
        return np.prod(_as_matrix(x), axis=1)

    @property
    def name(self):
        return "product"


def default_battery(k: int = 2) -> list:
    out = [ExpPlus((s,) * k) for s in (0.2, 0.5, 1.0)]
    out += [ExpMinus((s,) * k) for s in (0.2, 0.5, 1.0)]
    out += [Ramp(a) for a in (0.0, 1.0, 2.0)]
    out.append(ProductCounts())
    return out


@dataclass(frozen=True)
class DcxRow:
    name: str
    order_class: str
    mean_a: float
    mean_b: float
    se_a: float
    se_b: float
    slack: float
    consistent: bool


def dcx_counts_check(samples_a, samples_b, battery: Sequence | None = None, z: float = 1.96) -> list:
    """For each test function, whether ``E f(A) <= E f(B)`` is consistent with
    the samples: ``mean_a <= mean_b + z * sqrt(se_a^2 + se_b^2)``.

    This is one-sided evidence; consistency never proves an order.
    """
    a = _as_matrix(np.asarray(samples_a))
    b = _as_matrix(np.asarray(samples_b))
    if a.shape[1] != b.shape[1]:
        raise ValueError("sample vectors must have equal dimension")
    battery = default_battery(a.shape[1]) if battery is None else battery
    rows = []
    for f in battery:
        fa, fb = f(a), f(b)
        ma, mb = float(np.mean(fa)), float(np.mean(fb))
        sa = float(np.std(fa, ddof=1) / math.sqrt(len(fa))) if len(fa) > 1 else 0.0
        sb = float(np.std(fb, ddof=1) / math.sqrt(len(fb))) if len(fb) > 1 else 0.0
        slack = z * math.hypot(sa, sb)
        rows.append(DcxRow(f.name, f.order_class, ma, mb, sa, sb, slack, ma <= mb + slack))
    return rows


# --------------------------------------------------------------------------
# spatial statistics


def ripley_k(pattern: PointPattern, r_grid, intensity_hat: float | None = None,
             correction: str = "border", normalized: bool = False) -> np.ndarray:
    """``K(r) = (1/(lam |B_r|)) sum_{X in B_r} #{Y != X : |X - Y| <= r}``.

    Uses the points inside the window.  With ``correction="border"``
    ``B_r`` is the window eroded by ``r`` (minus sampling); with ``"none"``
    it is the window itself.  The value for a Poisson process is
    ``lam * pi * r^2`` in the plane; ``normalized=True`` divides once more by
    ``lam`` to give the unit-free ``pi r^2`` convention.
    """
    pts = pattern.restrict().points
    if len(pts) == 0:
        raise ValueError("Ripley's K needs a nonempty pattern")
    if correction not in ("border", "none"):
        raise ValueError(f"unknown correction {correction!r}")
    w = pattern.window
    lam = len(pts) / w.volume if intensity_hat is None else float(intensity_hat)
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    i, j, dd = pairs_within(pts, float(r_grid.max()))
    out = np.empty(len(r_grid))
    for n, r in enumerate(r_grid):
        region = w.erode(r) if correction == "border" else w
        if region is None:
            out[n] = np.nan
            continue
        inside = region.contains(pts)
        close = dd <= r
        total = np.sum(close & inside[i]) + np.sum(close & inside[j])
        out[n] = total / (lam * region.volume)
    return out / lam if normalized else out


def _check_disjoint(boxes):
    for a in range(len(boxes)):
        for b in range(a + 1, len(boxes)):
            if boxes[a].overlaps(boxes[b]):
                raise ValueError(f"boxes {a} and {b} overlap")


def _hull(boxes) -> Window:
    lo = np.min([b.lo for b in boxes], axis=0)
    hi = np.max([b.hi for b in boxes], axis=0)
    return Window(tuple(lo), tuple(hi))


def box_counts(gen_config, boxes: Sequence[Window], reps: int, rng, window: Window | None = None,
               threads: int = 1) -> np.ndarray:
    """``(reps, len(boxes))`` counts; replicate ``k`` uses stream ``rng/k``."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    window = window or _hull(boxes)
    stream = as_stream(rng)

    def one(k):
        pts = gen_config.sample(window, stream.derive(k), 0.0).points
        return [int(np.sum(b.contains(pts))) if len(pts) else 0 for b in boxes]

    return np.array(map_ordered(one, range(reps), threads), dtype=np.int64).reshape(reps, len(boxes))


def void_probability(gen_config, box: Window, reps: int, rng, window: Window | None = None):
    """Fraction of realizations with no point in ``box`` and its Wilson interval."""
    c = box_counts(gen_config, [box], reps, rng, window)[:, 0]
    k = int(np.sum(c == 0))
    return k / reps, wilson_interval(k, reps)


def factorial_moment(gen_config, disjoint_boxes: Sequence[Window], reps: int, rng,
                     window: Window | None = None):
    """Mean of the product of counts over pairwise disjoint boxes, with a
    normal 95% interval."""
    _check_disjoint(disjoint_boxes)
    prod = np.prod(box_counts(gen_config, disjoint_boxes, reps, rng, window), axis=1).astype(float)
    m = float(prod.mean())
    se = float(prod.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return m, (m - 1.96 * se, m + 1.96 * se)


@dataclass(frozen=True)
class FaceReport:
    face: str  # "void" or "moment"
    boxes: tuple
    estimate: float
    poisson: float
    sigma: float
    z: float
    label: str  # "sub", "super" or "inconclusive"


def _label(z, k):
    if z < -k:
        return "sub"
    if z > k:
        return "super"
    return "inconclusive"


def weak_poisson_report(gen_config, boxes: Sequence[Window], reps: int, rng,
                        pairs: Sequence[tuple] | None = None, window: Window | None = None,
                        z: float = 3.0, intensity: float | None = None) -> list:
    """Compare void probabilities with ``exp(-lam |B|)`` and products of counts
    over disjoint pairs with ``prod lam |B_i|``.

    Void faces use the binomial standard error under the Poisson value;
    moment faces use the sample standard error.  A face is ``sub`` or
    ``super`` when the estimate sits more than ``z`` standard errors below or
    above the Poisson value.
    """
    boxes = list(boxes)
    pairs = list(pairs or [])
    all_boxes = boxes + [b for p in pairs for b in p]
    for p in pairs:
        _check_disjoint(p)
    lam = gen_config.intensity if intensity is None else intensity
    counts = box_counts(gen_config, all_boxes, reps, rng, window or _hull(all_boxes))
    out = []
    for n, b in enumerate(boxes):
        p0 = math.exp(-lam * b.volume)
        est = float(np.mean(counts[:, n] == 0))
        sig = math.sqrt(p0 * (1 - p0) / reps)
        zz = (est - p0) / sig if sig > 0 else 0.0
        out.append(FaceReport("void", (b,), est, p0, sig, zz, _label(zz, z)))
    col = len(boxes)
    for p in pairs:
        prod = np.prod(counts[:, col:col + len(p)], axis=1).astype(float)
        col += len(p)
        ref = math.prod(lam * b.volume for b in p)
        est = float(prod.mean())
        sig = float(prod.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        zz = (est - ref) / sig if sig > 0 else (0.0 if est == ref else math.copysign(math.inf, est - ref))
        out.append(FaceReport("moment", tuple(p), est, ref, sig, zz, _label(zz, z)))
    return out


# --------------------------------------------------------------------------
# second differences of randomized dcx functions


def second_difference_convexity(f: Callable, xi: IntDistribution, n_max: int, return_values: bool = False):
    """Minimum over ``|n| <= n_max`` of ``g(n-1) + g(n+1) - 2 g(n)`` where
    ``g(n) = E f(sgn(n) (xi_1 + ... + xi_|n|))`` with i.i.d. ``xi_i``.

    The law of each partial sum is obtained by exact discrete convolution;
    ``g(0) = f(0)``.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    base = np.asarray(xi.pmf, dtype=float)

    def fx(v):
        return np.asarray(f(np.asarray(v, dtype=float)), dtype=float).ravel()

    g_pos = [float(fx([0.0])[0])]
    law = np.array([1.0])
    for _ in range(n_max + 1):
        law = np.convolve(law, base)
        vals = np.arange(len(law), dtype=float)
        g_pos.append(math.fsum(law * fx(vals)))
    g_neg = [g_pos[0]]
    law = np.array([1.0])
    for _ in range(n_max + 1):
        law = np.convolve(law, base)
        vals = -np.arange(len(law), dtype=float)
        g_neg.append(math.fsum(law * fx(vals)))
    g = np.array(g_neg[::-1] + g_pos[1:])  # n = -(n_max+1) .. n_max+1
    d2 = g[:-2] + g[2:] - 2 * g[1:-1]
    return (float(d2.min()), g, d2) if return_values else float(d2.min())
