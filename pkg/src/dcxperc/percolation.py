"""Gilbert graphs, component summaries, window-spanning percolation and
critical-radius estimation, plus k-coverage percolation tests.

Percolation in a finite window is judged by spanning: a connected component
of the Boolean model touches both faces orthogonal to a chosen axis.
Monte-Carlo routines reuse one set of realizations across radii, so curves
in ``r`` are coupled and monotone per realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.csgraph import connected_components
from scipy.stats import binomtest

from .core import PointPattern, Window, as_stream, build_cell_grid, cross_pairs_within, map_ordered, pairs_within

__all__ = [
    "GeometricGraph",
    "ComponentStats",
    "SweepRow",
    "RcEstimate",
    "BracketError",
    "build_gilbert",
    "components",
    "wilson_interval",
    "percolation_probability",
    "sweep_r",
    "crossing_radius",
    "estimate_rc",
    "k_coverage_percolates",
]


@dataclass(frozen=True, eq=False)
class GeometricGraph:
    """Undirected simple graph on ``n`` nodes; edges stored once with ``i < j``."""

    n: int
    i: np.ndarray
    j: np.ndarray
    r: float

    @property
    def n_edges(self) -> int:
        return len(self.i)

    @property
    def adjacency(self) -> list:
        nbrs = [[] for _ in range(self.n)]
        for a, b in zip(self.i.tolist(), self.j.tolist()):
            nbrs[a].append(b)
            nbrs[b].append(a)
        return [sorted(x) for x in nbrs]

    def edge_set(self) -> set:
        return set(zip(self.i.tolist(), self.j.tolist()))

    def to_sparse(self):
        data = np.ones(len(self.i), dtype=np.int8)
        return sparse.coo_matrix((data, (self.i, self.j)), shape=(self.n, self.n)).tocsr()

    def __eq__(self, other):
        if not isinstance(other, GeometricGraph):
            return NotImplemented
        return self.n == other.n and self.edge_set() == other.edge_set()


def _edges_from(i, j, n, r) -> GeometricGraph:
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    order = np.lexsort((j, i))
    return GeometricGraph(n, i[order], j[order], float(r))


def build_gilbert(pattern: PointPattern, r: float) -> GeometricGraph:
    """Edge between every pair of points at distance at most ``2r``.

    All points of ``pattern`` become nodes; call ``pattern.restrict()`` first
    to drop the sampling margin.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    i, j, _ = pairs_within(pattern.points, 2 * r)
    return _edges_from(i, j, len(pattern), r)


@dataclass(frozen=True)
class ComponentStats:
    sizes: tuple
    fraction_largest: float
    fraction_second: float
    spans: tuple
    labels: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(sum(self.sizes))


def _label_components(n, i, j):
    if n == 0:
        return 0, np.zeros(0, dtype=np.int64)
    g = sparse.coo_matrix((np.ones(len(i), np.int8), (i, j)), shape=(n, n))
    return connected_components(g, directed=False)


def _summarize(n, labels, points, window, r) -> ComponentStats:
    if n == 0:
        return ComponentStats((), 0.0, 0.0, (False,) * window.dim, labels)
    ncomp = labels.max() + 1
    sizes = np.bincount(labels, minlength=ncomp)
    first = np.full(ncomp, n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(n))
    order = np.lexsort((first, -sizes))
    # relabel so component 0 is the largest, ties by smallest member index
    rank = np.empty(ncomp, dtype=np.int64)
    rank[order] = np.arange(ncomp)
    labels = rank[labels]
    sizes = sizes[order]
    spans = []
    for ax in range(window.dim):
        near_lo = points[:, ax] - window.lower[ax] <= r
        near_hi = window.upper[ax] - points[:, ax] <= r
        lo_set = np.zeros(ncomp, bool)
        hi_set = np.zeros(ncomp, bool)
        lo_set[labels[near_lo]] = True
        hi_set[labels[near_hi]] = True
        spans.append(bool(np.any(lo_set & hi_set)))
    f1 = sizes[0] / n
    f2 = sizes[1] / n if len(sizes) > 1 else 0.0
    return ComponentStats(tuple(int(s) for s in sizes), float(f1), float(f2), tuple(spans), labels)


def components(graph: GeometricGraph, pattern: PointPattern, r: float | None = None) -> ComponentStats:
    """Component sizes (descending), largest/second fractions and per-axis spanning.

    A component spans axis ``a`` when it has a point within ``r`` of the
    lower face and a point within ``r`` of the upper face of the window.
    """
    r = graph.r if r is None else r
    ncomp, labels = _label_components(graph.n, graph.i, graph.j)
    return _summarize(graph.n, np.asarray(labels, dtype=np.int64), pattern.points, pattern.window, r)


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple:
    if trials <= 0:
        return (0.0, 1.0)
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return (float(ci.low), float(ci.high))


# --------------------------------------------------------------------------
# Monte-Carlo over coupled realizations


class _Realization:
    """One sampled pattern with candidate pairs cached up to ``2 * r_max``."""

    def __init__(self, pattern: PointPattern, r_max: float):
        self.pattern = pattern.restrict()
        self.n = len(self.pattern)
        self.i, self.j, self.d = pairs_within(self.pattern.points, 2 * r_max)
        self.r_max = r_max

    def stats(self, r: float) -> ComponentStats:
        if r > self.r_max * (1 + 1e-12):
            raise ValueError("radius beyond cached range")
        keep = self.d <= 2 * r
        _, labels = _label_components(self.n, self.i[keep], self.j[keep])
        return _summarize(self.n, np.asarray(labels, np.int64), self.pattern.points, self.pattern.window, r)


def _realizations(gen_config, window, reps, rng, r_max, margin=0.0, threads=1):
    stream = as_stream(rng)

    def one(k):
        return _Realization(gen_config.sample(window, stream.derive(k), margin), r_max)

    return map_ordered(one, range(reps), threads)


@dataclass(frozen=True)
class SweepRow:
    r: float
    mean_frac1: float
    mean_frac2: float
    p_span: float
    ci_lo: float
    ci_hi: float
    reps: int
    # standard errors of the fractions, for comparisons between curves
    se_frac1: float = 0.0
    se_frac2: float = 0.0


def _default_window():
    return Window.square(50.0)


def percolation_probability(gen_config, r: float, reps: int, rng, window: Window | None = None,
                            axis: int = 0, margin: float = 0.0, threads: int = 1):
    """Fraction of ``reps`` realizations spanning ``axis`` at radius ``r``,
    with its Wilson 95% interval."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    row = sweep_r(gen_config, [r], reps, rng, window, axis, margin, threads)[0]
    return row.p_span, (row.ci_lo, row.ci_hi)


def sweep_r(gen_config, r_grid: Sequence[float], reps: int, rng, window: Window | None = None,
            axis: int = 0, margin: float = 0.0, threads: int = 1) -> list:
    """Per-radius averages of the two largest component fractions and the
    spanning probability.  All radii share the same ``reps`` realizations."""
    r_grid = [float(x) for x in r_grid]
    if not r_grid:
        raise ValueError("empty r grid")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    window = window or _default_window()
    reals = _realizations(gen_config, window, reps, rng, max(r_grid), margin, threads)
    rows = []
    for r in r_grid:
        st = [x.stats(r) for x in reals]
        f1 = np.array([s.fraction_largest for s in st])
        f2 = np.array([s.fraction_second for s in st])
        k = sum(s.spans[axis] for s in st)
        lo, hi = wilson_interval(k, reps)
        se = lambda v: float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        rows.append(SweepRow(r, float(f1.mean()), float(f2.mean()), k / reps, lo, hi, reps, se(f1), se(f2)))
    return rows


def crossing_radius(rows: Sequence[SweepRow], level: float = 0.5, bound: str = "mean") -> float:
    """First grid radius whose mean largest-component fraction reaches ``level``.

    ``bound`` may be ``"lower"``/``"upper"`` to use the mean shifted by 1.96
    standard errors, giving a confidence band for the crossing.  Returns
    ``inf`` when no grid point qualifies.
    """
    shift = {"mean": 0.0, "lower": 1.96, "upper": -1.96}[bound]
    for row in rows:
        if row.mean_frac1 + shift * row.se_frac1 >= level:
            return row.r
    return math.inf


class BracketError(ValueError):
    def __init__(self, r_lo, r_hi, p_lo, p_hi, target):
        super().__init__(
            f"invalid bracket: p({r_lo})={p_lo:.4g}, p({r_hi})={p_hi:.4g}, target {target}"
        )
        self.r_lo, self.r_hi, self.p_lo, self.p_hi, self.target = r_lo, r_hi, p_lo, p_hi, target


@dataclass(frozen=True)
class RcEstimate:
    value: float
    ci_lo: float
    ci_hi: float
    r_lo: float
    r_hi: float
    p_lo: float
    p_hi: float
    probes: tuple

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_hi - self.ci_lo)


def estimate_rc(gen_config, r_lo: float, r_hi: float, reps: int, target_p: float = 0.5, tol: float = 1e-3,
                rng=0, window: Window | None = None, axis: int = 0, margin: float = 0.0,
                threads: int = 1) -> RcEstimate:
    """Bisection for the radius where the spanning probability crosses ``target_p``.

    One set of realizations is sampled up front and reused at every probe.
    The reported interval runs from the largest probe whose Wilson interval
    lies below ``target_p`` to the smallest probe whose interval lies above
    it (falling back to the final bracket).
    """
    if not r_lo < r_hi:
        raise ValueError("need r_lo < r_hi")
    window = window or _default_window()
    reals = _realizations(gen_config, window, reps, rng, r_hi, margin, threads)
    probes = []

    def p_at(r):
        k = sum(x.stats(r).spans[axis] for x in reals)
        ci = wilson_interval(k, reps)
        probes.append((r, k / reps, ci[0], ci[1]))
        return k / reps

    p_lo, p_hi = p_at(r_lo), p_at(r_hi)
    if not (p_lo < target_p < p_hi):
        raise BracketError(r_lo, r_hi, p_lo, p_hi, target_p)
    lo, hi = r_lo, r_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        p = p_at(mid)
        if p < target_p:
            lo, p_lo = mid, p
        else:
            hi, p_hi = mid, p
    below = [r for r, _, _, c_hi in probes if c_hi < target_p]
    above = [r for r, _, c_lo, _ in probes if c_lo > target_p]
    ci_lo = max(below) if below else lo
    ci_hi = min(above) if above else hi
    return RcEstimate(0.5 * (lo + hi), min(ci_lo, lo), max(ci_hi, hi), lo, hi, p_lo, p_hi,
                      tuple(sorted(probes)))


# --------------------------------------------------------------------------
# k-coverage


def _spans_sites(open_sites: np.ndarray, axis: int) -> bool:
    if open_sites.size == 0 or not open_sites.any():
        return False
    structure = np.ones((3,) * open_sites.ndim, dtype=bool)
    labels, _ = ndimage.label(open_sites, structure=structure)
    first = np.take(labels, 0, axis=axis)
    last = np.take(labels, -1, axis=axis)
    common = np.intersect1d(first[first > 0], last[last > 0])
    return common.size > 0


def _grid_shape(window: Window, step: float):
    return tuple(int(math.ceil(L / step - 1e-9)) for L in window.sides)


def k_coverage_percolates(pattern: PointPattern, r: float, k: int, mode: str = "lattice",
                          resolution: float | None = None, axis: int = 0) -> bool:
    """Spanning test for the set covered by at least ``k`` balls of radius ``r``.

    ``mode="lattice"``: cubes of side ``r/sqrt(d)`` tile the window from its
    lower corner; a cube is open when it holds at least ``ceil(k/2)`` germs.
    Open cubes spanning under Moore adjacency is a sufficient condition for
    k-coverage percolation.

    ``mode="fine-grid"``: cells of side ``resolution``; a cell is open when
    its centre is covered ``k`` times.  Approximates the k-covered set.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    w, d = pattern.window, pattern.dim
    if mode == "lattice":
        if r <= 0:
            return False
        a = r / math.sqrt(d)
        shape = _grid_shape(w, a)
        pts = pattern.points
        idx = np.floor((pts - w.lo) / a).astype(np.int64) if len(pts) else np.zeros((0, d), np.int64)
        ok = np.all((idx >= 0) & (idx < np.array(shape)), axis=1)
        counts = np.zeros(shape, dtype=np.int64)
        if ok.any():
            np.add.at(counts, tuple(idx[ok].T), 1)
        return _spans_sites(counts >= math.ceil(k / 2), axis)
    if mode == "fine-grid":
        if resolution is None or not resolution > 0:
            raise ValueError("fine-grid mode needs resolution > 0")
        shape = _grid_shape(w, resolution)
        axes = [w.lower[a] + (np.arange(n) + 0.5) * resolution for a, n in enumerate(shape)]
        centres = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        if len(pattern) == 0 or r < 0:
            return False
        grid = build_cell_grid(pattern.points, max(r, resolution))
        qi, _, _ = cross_pairs_within(grid, centres, r)
        cover = np.bincount(qi, minlength=len(centres)).reshape(shape)
        return _spans_sites(cover >= k, axis)
    raise ValueError(f"unknown mode {mode!r}")
