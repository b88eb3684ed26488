"""Geometry primitives, windows, point patterns, splittable randomness and
fixed-radius neighbour search.

Everything here is immutable once built.  Point coordinates are carried as
``(n, d)`` float arrays; a single point is a length-``d`` sequence.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Window",
    "PointPattern",
    "RngStream",
    "CellGrid",
    "distance",
    "build_cell_grid",
    "neighbors_within",
    "pairs_within",
    "cross_pairs_within",
    "derive_stream",
    "format_float",
    "write_pattern_csv",
    "read_pattern_csv",
]


def distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Euclidean distance between two points of equal dimension."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.sqrt(np.sum((p - q) ** 2)))


@dataclass(frozen=True)
class Window:
    """Axis-aligned box ``[lower, upper)``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or len(lo) == 0:
            raise ValueError("lower and upper must have the same, nonzero length")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("window bounds must be finite")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate window {lo} .. {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def square(cls, side: float, d: int = 2, origin: float = 0.0) -> "Window":
        return cls((origin,) * d, (origin + side,) * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def sides(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def dilate(self, margin: float) -> "Window":
        if margin < 0:
            raise ValueError("margin must be nonnegative")
        return Window(tuple(self.lo - margin), tuple(self.hi + margin))

    def erode(self, margin: float) -> "Window | None":
        lo, hi = self.lo + margin, self.hi - margin
        if np.any(lo >= hi):
            return None
        return Window(tuple(lo), tuple(hi))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lo) & (pts < self.hi), axis=1)

    def overlaps(self, other: "Window") -> bool:
        return bool(np.all(self.lo < other.hi) and np.all(other.lo < self.hi))


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Finite point configuration sampled in ``window`` dilated by ``margin_used``.

    ``points`` is an ``(n, d)`` array; repeated points are allowed and reported
    through :attr:`is_simple`.
    """

    window: Window
    points: np.ndarray
    margin_used: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.window.dim)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if self.margin_used < 0:
            raise ValueError("margin_used must be nonnegative")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        outer = self.window.dilate(self.margin_used)
        # closed outer boundary: lattices may sit exactly on it
        if pts.size and (np.any(pts < outer.lo - 1e-9) or np.any(pts > outer.hi + 1e-9)):
            raise ValueError("points outside the dilated sampling window")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def is_simple(self) -> bool:
        if len(self) < 2:
            return True
        return len(np.unique(self.points, axis=0)) == len(self)

    def restrict(self, window: Window | None = None) -> "PointPattern":
        """Points falling inside ``window`` (default: the pattern's own window)."""
        w = self.window if window is None else window
        return PointPattern(w, self.points[w.contains(self.points)] if len(self) else self.points, 0.0)

    def inside_mask(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(0, dtype=bool)
        return self.window.contains(self.points)

    def __eq__(self, other):
        if not isinstance(other, PointPattern):
            return NotImplemented
        return (
            self.window == other.window
            and self.margin_used == other.margin_used
            and np.array_equal(self.points, other.points)
        )


# --------------------------------------------------------------------------
# randomness


@dataclass(frozen=True)
class RngStream:
    """Deterministic, splittable random stream.

    A stream is the pair ``(seed, path)``.  Its generator is Philox (a
    counter-based bit generator) keyed by the BLAKE2b digest of the JSON
    encoding of ``[seed, *path]``.  Paths are label sequences, so
    ``derive(derive(s, "a"), "b")`` (path ``("a", "b")``) and
    ``derive(s, "ab")`` (path ``("ab",)``) are different streams.

    Calling :meth:`generator` twice returns two generators producing the same
    sequence; consumers that need several independent draws derive child
    streams instead of sharing one generator.
    """

    seed: int
    path: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & (2**64 - 1))
        object.__setattr__(self, "path", tuple(str(p) for p in self.path))

    def derive(self, label) -> "RngStream":
        return RngStream(self.seed, self.path + (str(label),))

    @property
    def key(self) -> int:
        blob = json.dumps([self.seed, *self.path], separators=(",", ":")).encode()
        return int.from_bytes(hashlib.blake2b(blob, digest_size=16).digest(), "little")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key))


def derive_stream(parent: RngStream, label) -> RngStream:
    return parent.derive(label)


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or integer seed, got {type(rng).__name__}")


# --------------------------------------------------------------------------
# cell list


@dataclass(frozen=True, eq=False)
class CellGrid:
    """Cell list over a point set with cubic cells of side ``cell_size``.

    Points are sorted by cell key; ``starts``/``counts`` give each occupied
    cell's slice of ``order``.  Cell keys are row-major indices into the
    bounding block ``[offset, offset + extent)`` of integer cell coordinates,
    padded by one cell on every side.
    """

    cell_size: float
    points: np.ndarray
    offset: np.ndarray
    extent: np.ndarray
    keys: np.ndarray
    starts: np.ndarray
    counts: np.ndarray
    order: np.ndarray

    @property
    def index(self) -> dict:
        """Map from integer cell coordinates to the point indices in that cell."""
        out = {}
        for key, s, c in zip(self.keys, self.starts, self.counts):
            coords = np.array(np.unravel_index(int(key), tuple(self.extent))) + self.offset
            out[tuple(int(v) for v in coords)] = tuple(int(i) for i in self.order[s:s + c])
        return out

    def cell_of(self, x) -> np.ndarray:
        return np.floor(np.asarray(x, dtype=float) / self.cell_size).astype(np.int64)

    def _lookup(self, cells: np.ndarray):
        """Slice (start, count) of each cell in ``cells``; count 0 when empty."""
        rel = cells - self.offset
        ok = np.all((rel >= 0) & (rel < self.extent), axis=1)
        start = np.zeros(len(cells), dtype=np.int64)
        count = np.zeros(len(cells), dtype=np.int64)
        if not np.any(ok) or len(self.keys) == 0:
            return start, count
        key = np.ravel_multi_index(tuple(rel[ok].T), tuple(self.extent))
        pos = np.searchsorted(self.keys, key)
        pos = np.minimum(pos, len(self.keys) - 1)
        hit = self.keys[pos] == key
        idx = np.flatnonzero(ok)[hit]
        start[idx] = self.starts[pos[hit]]
        count[idx] = self.counts[pos[hit]]
        return start, count


def build_cell_grid(pattern, cell_size: float) -> CellGrid:
    if not cell_size > 0:
        raise ValueError("cell_size must be positive")
    pts = pattern.points if isinstance(pattern, PointPattern) else np.asarray(pattern, dtype=float)
    pts = np.atleast_2d(pts)
    d = pts.shape[1] if pts.size else (pattern.dim if isinstance(pattern, PointPattern) else 1)
    if len(pts) == 0:
        z = np.zeros(0, dtype=np.int64)
        return CellGrid(float(cell_size), pts.reshape(0, d), np.zeros(d, np.int64),
                        np.ones(d, np.int64), z, z, z, z)
    cells = np.floor(pts / cell_size).astype(np.int64)
    offset = cells.min(axis=0) - 1
    extent = cells.max(axis=0) - offset + 2
    key = np.ravel_multi_index(tuple((cells - offset).T), tuple(extent))
    order = np.argsort(key, kind="stable")
    keys, starts, counts = np.unique(key[order], return_index=True, return_counts=True)
    return CellGrid(float(cell_size), pts, offset, extent, keys, starts, counts, order)


def _offsets(d: int, reach: int) -> np.ndarray:
    rng = np.arange(-reach, reach + 1)
    return np.stack(np.meshgrid(*([rng] * d), indexing="ij"), axis=-1).reshape(-1, d)


def _expand(start: np.ndarray, count: np.ndarray):
    """For slices (start, count) return (owner index, position) per element."""
    total = int(count.sum())
    owner = np.repeat(np.arange(len(count)), count)
    if total == 0:
        return owner, owner
    first = np.repeat(np.cumsum(count) - count, count)
    pos = np.repeat(start, count) + (np.arange(total) - first)
    return owner, pos


def cross_pairs_within(grid: CellGrid, queries, radius: float):
    """All (query index, point index, distance) with distance <= radius."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    empty = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
    if len(q) == 0 or len(grid.keys) == 0 or radius < 0:
        return empty
    reach = int(np.ceil(radius / grid.cell_size)) if radius > 0 else 0
    qcells = grid.cell_of(q)
    qi_all, pj_all, dist_all = [], [], []
    for off in _offsets(q.shape[1], max(reach, 1) if radius > 0 else 0):
        start, count = grid._lookup(qcells + off)
        owner, pos = _expand(start, count)
        if len(owner) == 0:
            continue
        pj = grid.order[pos]
        dd = np.sqrt(np.sum((q[owner] - grid.points[pj]) ** 2, axis=1))
        keep = dd <= radius
        qi_all.append(owner[keep])
        pj_all.append(pj[keep])
        dist_all.append(dd[keep])
    if not qi_all:
        return empty
    qi = np.concatenate(qi_all)
    pj = np.concatenate(pj_all)
    dd = np.concatenate(dist_all)
    order = np.lexsort((pj, qi))
    return qi[order], pj[order], dd[order]


def pairs_within(points, radius: float, cell_size: float | None = None):
    """Unordered pairs ``i < j`` of points at distance <= radius.

    Returns ``(i, j, dist)`` sorted lexicographically by ``(i, j)``.
    """
    pts = points.points if isinstance(points, PointPattern) else np.atleast_2d(np.asarray(points, float))
    if len(pts) < 2 or radius < 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    # tiny radii would overflow the integer cell index; bound the cell count
    extent = float(np.max(np.ptp(pts, axis=0))) if len(pts) else 0.0
    cs = cell_size or max(radius, 1e-6 * extent, 1e-300) if radius > 0 else (cell_size or 1.0)
    grid = build_cell_grid(pts, cs)
    i, j, dd = cross_pairs_within(grid, pts, radius)
    keep = i < j
    return i[keep], j[keep], dd[keep]


def neighbors_within(grid: CellGrid, pattern, p, radius: float, self_index: int | None = None) -> list:
    """Indices of pattern points within ``radius`` of ``p`` (sorted)."""
    if radius < 0:
        return []
    _, pj, _ = cross_pairs_within(grid, np.asarray(p, dtype=float)[None, :], radius)
    out = sorted(int(j) for j in pj)
    if self_index is not None:
        out = [j for j in out if j != self_index]
    return out


# --------------------------------------------------------------------------
# text formats


def format_float(x: float) -> str:
    """17-significant-digit repr that round-trips exactly."""
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


_AXES = "xyzw"


def _axis_names(d: int) -> list:
    return [_AXES[i] if i < len(_AXES) else f"x{i}" for i in range(d)]


def write_pattern_csv(pattern: PointPattern, path_or_file) -> None:
    lines = [
        "# window " + " ".join(format_float(v) for v in pattern.window.lower + pattern.window.upper),
        "# margin " + format_float(pattern.margin_used),
        ",".join(_axis_names(pattern.dim)),
    ]
    lines += [",".join(format_float(v) for v in row) for row in pattern.points]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", newline="") as fh:
            fh.write(text)


def read_pattern_csv(path_or_file) -> PointPattern:
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as fh:
            text = fh.read()
    window, margin, rows, header = None, 0.0, [], None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("# window"):
            vals = [float(v) for v in line.split()[2:]]
            d = len(vals) // 2
            window = Window(tuple(vals[:d]), tuple(vals[d:]))
        elif line.startswith("# margin"):
            margin = float(line.split()[2])
        elif line.startswith("#"):
            continue
        elif header is None:
            header = line.split(",")
        else:
            rows.append([float(v) for v in line.split(",")])
    if window is None or header is None:
        raise ValueError("pattern file lacks a '# window' line or header")
    pts = np.array(rows, dtype=float).reshape(-1, len(header))
    return PointPattern(window, pts, margin)


def stack_points(parts: Iterable[np.ndarray], d: int) -> np.ndarray:
    parts = [np.asarray(p, float).reshape(-1, d) for p in parts]
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, d))


def map_ordered(fn, items, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order is kept."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
