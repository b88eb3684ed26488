"""Discrete approximations of the Boolean model on scaled close-packed
lattices: site fields, blocking contours around the origin, and counts of
open germ paths from the origin to the boundary of a box.

Sites of the lattice at scale ``1/n`` are the points ``z`` of
``(1/n) Z^d``; the cell of ``z`` is ``z + (-1/(2n), 1/(2n)]^d``.  Two
sites are adjacent when they differ by at most one step in every
coordinate (Moore adjacency, ``3^d - 1`` neighbours).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numba
import numpy as np
from scipy import ndimage

from .core import PointPattern, Window, as_stream, build_cell_grid, cross_pairs_within, map_ordered, pairs_within
from .percolation import wilson_interval

__all__ = [
    "LatticeGraphSpec",
    "SiteField",
    "Contour",
    "site_field_from_pattern",
    "site_percolates",
    "enumerate_contours",
    "contour_count_bound",
    "VoidContours",
    "expected_void_contours",
    "rbar_upper_scan",
    "count_open_paths",
    "PathRow",
    "expected_paths_sweep",
    "paths_surrogate",
]


@dataclass(frozen=True)
class LatticeGraphSpec:
    d: int = 2
    scale: float = 1.0

    def __post_init__(self):
        if self.d < 1 or not self.scale > 0:
            raise ValueError("need d >= 1 and scale > 0")

    @property
    def degree(self) -> int:
        return 3 ** self.d - 1


@dataclass(frozen=True, eq=False)
class SiteField:
    """Boolean states on a finite box of sites; ``open[idx]`` is the state of
    site ``origin + idx * spec.scale``."""

    spec: LatticeGraphSpec
    open: np.ndarray
    origin: tuple = None

    def __post_init__(self):
        arr = np.asarray(self.open, dtype=bool)
        if arr.ndim != self.spec.d:
            raise ValueError("state array dimension differs from lattice dimension")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "open", arr)
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * self.spec.d)

    @property
    def shape(self):
        return self.open.shape

    def site_coords(self) -> np.ndarray:
        axes = [self.origin[a] + np.arange(n) * self.spec.scale for a, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _box_sites(box: Window, n: int):
    """Integer site indices ``k`` with ``k / n`` in the half-open box."""
    lo = [math.ceil(v * n - 1e-9) for v in box.lower]
    hi = [math.ceil(v * n - 1e-9) for v in box.upper]
    return lo, [max(0, b - a) for a, b in zip(lo, hi)]


def _cell_distances(points: np.ndarray, sites: np.ndarray, half: float, reach: float) -> np.ndarray:
    """For each site, the smallest Euclidean distance from a point to its
    cell ``site + [-half, half]^d``; ``inf`` beyond ``reach``."""
    out = np.full(len(sites), np.inf)
    if len(points) == 0 or len(sites) == 0:
        return out
    radius = reach + half * math.sqrt(sites.shape[1])
    grid = build_cell_grid(points, max(radius, 2 * half))
    qi, pj, _ = cross_pairs_within(grid, sites, radius)
    if len(qi):
        gap = np.maximum(np.abs(points[pj] - sites[qi]) - half, 0.0)
        np.minimum.at(out, qi, np.sqrt(np.sum(gap * gap, axis=1)))
    return out


def site_field_from_pattern(pattern, r: float, n: int, box: Window) -> SiteField:
    """Site ``z`` is open when some germ lies within ``r`` of the cell of ``z``,
    i.e. the Boolean model with radius ``r`` meets that cell."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = pattern.points if isinstance(pattern, PointPattern) else np.atleast_2d(np.asarray(pattern, float))
    lo, shape = _box_sites(box, n)
    spec = LatticeGraphSpec(box.dim, 1.0 / n)
    origin = tuple(k / n for k in lo)
    field = SiteField(spec, np.zeros(shape, dtype=bool), origin)
    if len(pts) == 0 or 0 in shape:
        return field
    sites = field.site_coords().reshape(-1, box.dim)
    dist = _cell_distances(pts.reshape(-1, box.dim), sites, 0.5 / n, r)
    return SiteField(spec, (dist <= r).reshape(shape), origin)


def site_percolates(field, axis: int = 0) -> bool:
    """Open sites connect the first and last slab along ``axis`` (Moore adjacency)."""
    arr = field.open if isinstance(field, SiteField) else np.asarray(field, dtype=bool)
    if arr.size == 0 or not arr.any():
        return False
    labels, _ = ndimage.label(arr, structure=np.ones((3,) * arr.ndim, dtype=bool))
    first = np.take(labels, 0, axis=axis)
    last = np.take(labels, -1, axis=axis)
    return np.intersect1d(first[first > 0], last[last > 0]).size > 0


# --------------------------------------------------------------------------
# contours around the origin (planar)


@dataclass(frozen=True)
class Contour:
    """Closed 4-connected circuit of sites (integer coordinates, unit scale)."""

    sites: tuple

    @property
    def length(self) -> int:
        return len(self.sites)

    def scaled(self, n: int) -> np.ndarray:
        return np.array(self.sites, dtype=float) / n


def contour_count_bound(length: int, d: int = 2) -> int:
    """``length * (3^d - 2)^(length - 1)``."""
    return length * (3 ** d - 2) ** (length - 1)


def _encloses_origin(cycle) -> bool:
    # crossing number of the closed polygon through the site centres
    inside = False
    k = len(cycle)
    for a in range(k):
        x1, y1 = cycle[a]
        x2, y2 = cycle[(a + 1) % k]
        if (y1 > 0) != (y2 > 0):
            xc = x1 + (0 - y1) * (x2 - x1) / (y2 - y1)
            if xc > 0:
                inside = not inside
    return inside


_MOORE = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy]


def _separates(blocked: frozenset, extent: int) -> bool:
    """No Moore path from the origin to the square of half-width ``extent``
    avoids ``blocked``."""
    if (0, 0) in blocked:
        return True
    seen = {(0, 0)}
    stack = [(0, 0)]
    while stack:
        x, y = stack.pop()
        if max(abs(x), abs(y)) >= extent:
            return False
        for dx, dy in _MOORE:
            q = (x + dx, y + dy)
            if q not in seen and q not in blocked:
                seen.add(q)
                stack.append(q)
    return True


def _is_minimal_contour(sites: frozenset, extent: int) -> bool:
    if not _separates(sites, extent):
        return False
    return all(not _separates(sites - {s}, extent) for s in sites)


@lru_cache(maxsize=None)
def _contours(max_len: int) -> tuple:
    steps = ((1, 0), (-1, 0), (0, 1), (0, -1))
    found = set()
    out = []
    extent = max_len + 2
    for k in range(1, max_len // 2 + 1):
        start = (k, 0)
        # the start is the circuit's first site on the positive horizontal axis
        forbidden = {(j, 0) for j in range(0, k)}
        path = [start]
        on_path = {start}

        def dfs():
            x, y = path[-1]
            left = max_len - len(path)
            for dx, dy in steps:
                q = (x + dx, y + dy)
                if q == start and len(path) >= 4:
                    cyc = tuple(path)
                    key = frozenset(cyc)
                    if key not in found and _encloses_origin(cyc):
                        found.add(key)
                        if _is_minimal_contour(key, extent):
                            out.append(Contour(cyc))
                    continue
                if q in on_path or q in forbidden:
                    continue
                if abs(q[0] - start[0]) + abs(q[1] - start[1]) > left:
                    continue
                path.append(q)
                on_path.add(q)
                dfs()
                path.pop()
                on_path.discard(q)

        dfs()
    out.sort(key=lambda c: (c.length, sorted(c.sites)))
    return tuple(out)


def enumerate_contours(max_len: int, d: int = 2) -> list:
    """Every minimal circuit of length at most ``max_len`` that separates the
    origin from infinity in the close-packed planar lattice, once each."""
    if d != 2:
        raise NotImplementedError("contour enumeration is implemented for d = 2 only")
    if max_len < 8:
        raise ValueError("max_len must be >= 8 (the ring around one site)")
    return list(_contours(int(max_len)))


@dataclass(frozen=True)
class VoidContours:
    truncated_sum: float
    tail_bound: float
    summable: bool
    rho_hat: float
    n_contours: int
    longest: int
    se: float


def _tail(rho: float, L: int) -> float:
    """``sum_{l > L} l 7^(l-1) rho^l`` in closed form."""
    x = 7.0 * rho
    if x >= 1.0:
        return math.inf
    if x == 0.0:
        return 0.0
    return rho * ((L + 1) * x ** L * (1 - x) + x ** (L + 1)) / (1 - x) ** 2


class _ContourMinima:
    """Per realization, the smallest germ-to-cell distance over each contour;
    the contour is void at radius ``r`` when that distance exceeds ``r``."""

    def __init__(self, gen_config, n, max_len, reps, rng, r_max, threads=1):
        self.contours = enumerate_contours(max_len)
        sites = sorted({s for c in self.contours for s in c.sites})
        index = {s: i for i, s in enumerate(sites)}
        members = [np.array([index[s] for s in c.sites]) for c in self.contours]
        coords = np.array(sites, dtype=float) / n
        ext = (max_len // 2 + 1) / n + r_max + 1.0 / n
        window = Window((-ext, -ext), (ext, ext))
        stream = as_stream(rng)

        def one(k):
            pts = gen_config.sample(window, stream.derive(k), 0.0).points
            dist = _cell_distances(pts, coords, 0.5 / n, r_max)
            return np.array([dist[m].min() for m in members])

        self.minima = np.array(map_ordered(one, range(reps), threads)).reshape(reps, len(members))
        self.lengths = np.array([c.length for c in self.contours])

    def at(self, r: float) -> VoidContours:
        p = np.mean(self.minima > r, axis=0)
        total = float(p.sum())
        per_rep = np.sum(self.minima > r, axis=1)
        se = float(per_rep.std(ddof=1) / math.sqrt(len(per_rep))) if len(per_rep) > 1 else 0.0
        L = int(self.lengths.max())
        top = p[self.lengths == L]
        rho = float(np.max(top ** (1.0 / L))) if top.size else 0.0
        tail = _tail(rho, L)
        return VoidContours(total, tail, 7.0 * rho < 1.0, rho, len(p), L, se)


def expected_void_contours(gen_config, r: float, n: int, max_len: int, reps: int, rng,
                           threads: int = 1) -> VoidContours:
    """Monte-Carlo estimate of ``sum_gamma P(Boolean model misses every cell of gamma)``
    over contours of length at most ``max_len`` at scale ``1/n``, plus the
    geometric tail bound beyond ``max_len`` using ``l 7^(l-1)`` contours of
    length ``l`` and the per-site void factor of the longest enumerated
    contours."""
    return _ContourMinima(gen_config, n, max_len, reps, rng, r, threads).at(r)


def rbar_upper_scan(gen_config, n: int, r_grid: Sequence[float], max_len: int, reps: int, rng,
                    threads: int = 1):
    """Smallest grid radius at which the contour sum is summable
    (``7 rho < 1``), using the same realizations for every radius; ``None``
    if no grid point qualifies.  Returns ``(value, per-radius results)``."""
    r_grid = [float(x) for x in r_grid]
    if any(b < a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError("r grid must be ascending")
    cm = _ContourMinima(gen_config, n, max_len, reps, rng, max(r_grid), threads)
    results = [cm.at(r) for r in r_grid]
    for r, res in zip(r_grid, results):
        if res.summable:
            return r, results
    return None, results


# --------------------------------------------------------------------------
# open paths


@numba.njit(cache=True)
def _count_paths(indptr, indices, start_ok, inside, end_ok, cap):
    n = len(start_ok)
    visited = np.zeros(n, dtype=np.bool_)
    stack_node = np.empty(n, dtype=np.int64)
    stack_pos = np.empty(n, dtype=np.int64)
    count = 0
    explored = 0
    for s in range(n):
        if not start_ok[s]:
            continue
        depth = 0
        stack_node[0] = s
        stack_pos[0] = indptr[s]
        visited[s] = True
        explored += 1
        if end_ok[s]:
            count += 1
        if explored >= cap:
            return count, True
        while depth >= 0:
            v = stack_node[depth]
            if not inside[v] or stack_pos[depth] >= indptr[v + 1]:
                visited[v] = False
                depth -= 1
                continue
            w = indices[stack_pos[depth]]
            stack_pos[depth] += 1
            if visited[w]:
                continue
            explored += 1
            if end_ok[w]:
                count += 1
            if explored >= cap:
                return count, True
            depth += 1
            stack_node[depth] = w
            stack_pos[depth] = indptr[w]
            visited[w] = True
    return count, False


def _boundary_distance(pts: np.ndarray, m: float) -> np.ndarray:
    """Distance from each point to the boundary of ``[-m, m]^d``."""
    a = np.abs(pts)
    inside = np.all(a <= m, axis=1)
    din = np.min(m - a, axis=1)
    gap = np.maximum(a - m, 0.0)
    dout = np.sqrt(np.sum(gap * gap, axis=1))
    return np.where(inside, din, dout)


def _path_inputs(pts: np.ndarray, r: float, m: float):
    in_q = np.all((pts > -m) & (pts <= m), axis=1)
    start_ok = np.sqrt(np.sum(pts * pts, axis=1)) <= r
    end_ok = _boundary_distance(pts, m) <= r
    return start_ok, in_q, end_ok


def _csr(n, i, j):
    src = np.concatenate([i, j])
    dst = np.concatenate([j, i])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int64)


def count_open_paths(pattern, r: float, m: float, cap: int = 10 ** 6):
    """Number of sequences of distinct germs ``X_1, ..., X_k`` with
    ``|X_1| <= r``, consecutive germs within ``2r``, every germ but the last
    in ``(-m, m]^d``, and the last germ's ball meeting the boundary of that
    cube.  Returns ``(count, truncated)``; the search stops once ``cap``
    path prefixes have been explored."""
    if not m > 0:
        raise ValueError("m must be positive")
    pts = pattern.points if isinstance(pattern, PointPattern) else np.atleast_2d(np.asarray(pattern, float))
    if len(pts) == 0 or r < 0:
        return 0, False
    # germs beyond 2r of the cube cannot appear on a path
    keep = np.all(np.abs(pts) <= m + 2 * r, axis=1)
    pts = pts[keep]
    if len(pts) == 0:
        return 0, False
    start_ok, in_q, end_ok = _path_inputs(pts, r, m)
    if not start_ok.any():
        return 0, False
    i, j, _ = pairs_within(pts, 2 * r)
    indptr, indices = _csr(len(pts), i, j)
    count, trunc = _count_paths(indptr, indices, start_ok, in_q, end_ok, int(cap))
    return int(count), bool(trunc)


@dataclass(frozen=True)
class PathRow:
    r: float
    mean: float
    ci_lo: float
    ci_hi: float
    truncated_rate: float
    reps: int
    se: float


def expected_paths_sweep(gen_config, r_grid: Sequence[float], m: float, reps: int, cap: int, rng,
                         threads: int = 1) -> list:
    """Mean number of open paths per radius over ``reps`` realizations shared
    by all radii, with normal 95% intervals and the fraction of truncated
    counts."""
    r_grid = [float(x) for x in r_grid]
    ext = m + 2 * max(r_grid) + 1e-9
    window = Window((-ext, -ext), (ext, ext))
    stream = as_stream(rng)

    def one(k):
        pat = gen_config.sample(window, stream.derive(k), 0.0)
        return [count_open_paths(pat, r, m, cap) for r in r_grid]

    res = map_ordered(one, range(reps), threads)
    rows = []
    for a, r in enumerate(r_grid):
        vals = np.array([row[a][0] for row in res], dtype=float)
        trunc = np.mean([row[a][1] for row in res])
        mean = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        rows.append(PathRow(r, mean, mean - 1.96 * se, mean + 1.96 * se, float(trunc), reps, se))
    return rows


def paths_surrogate(rows: Sequence[PathRow], threshold: float = 0.1):
    """Smallest grid radius with mean path count at least ``threshold``."""
    for row in rows:
        if row.mean >= threshold:
            return row.r
    return None
