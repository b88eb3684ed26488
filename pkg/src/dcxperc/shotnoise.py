"""Shot-noise fields, level sets, interference, SINR graphs and the
exponential-moment bounds on level crossings of Poisson shot noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .core import PointPattern, Window, as_stream, build_cell_grid, cross_pairs_within, map_ordered, pairs_within
from .percolation import GeometricGraph, _edges_from, _label_components, _summarize, wilson_interval

__all__ = [
    "IndicatorCube",
    "PowerLaw",
    "TruncatedPowerLaw",
    "SinrParams",
    "additive_sn",
    "extremal_sn",
    "level_set_sites",
    "interference",
    "sinr_value",
    "build_sinr_graph",
    "snr_radius",
    "chernoff_level_bound",
    "interference_tail_bound",
    "sinr_sweep",
    "SinrRow",
]

_CHUNK = 2 ** 22  # pairwise elements per block for untruncated sums


@dataclass(frozen=True)
class IndicatorCube:
    """``l(x, y) = 1[x - y in (-r, r]^d]``."""

    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("half-width must be positive")

    radial = False

    @property
    def support_radius(self) -> float:
        return math.inf  # replaced per dimension in _support

    def value(self, diff: np.ndarray) -> np.ndarray:
        diff = np.atleast_2d(diff)
        return np.all((diff > -self.r) & (diff <= self.r), axis=1).astype(float)


@dataclass(frozen=True)
class PowerLaw:
    """``l(t) = (1 + t)^-beta``."""

    beta: float = 4.0
    radial = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def support_radius(self) -> float:
        return math.inf

    def l(self, t):
        return (1.0 + np.asarray(t, dtype=float)) ** (-self.beta)

    def value(self, diff):
        return self.l(np.linalg.norm(np.atleast_2d(diff), axis=1))


@dataclass(frozen=True)
class TruncatedPowerLaw:
    """``l(t) = (1 + t)^-beta - (1 + t_max)^-beta`` on ``[0, t_max)``, zero beyond;
    the shift keeps it continuous."""

    beta: float
    t_max: float
    radial = True

    def __post_init__(self):
        if not self.beta > 0 or not self.t_max > 0:
            raise ValueError("beta and t_max must be positive")

    @property
    def support_radius(self) -> float:
        return float(self.t_max)

    def l(self, t):
        t = np.asarray(t, dtype=float)
        v = (1.0 + t) ** (-self.beta) - (1.0 + self.t_max) ** (-self.beta)
        return np.where(t < self.t_max, v, 0.0)

    def value(self, diff):
        return self.l(np.linalg.norm(np.atleast_2d(diff), axis=1))


def _support(resp, d: int) -> float:
    if isinstance(resp, IndicatorCube):
        return resp.r * math.sqrt(d)
    return resp.support_radius


def _pair_values(points, queries, resp):
    """Yield ``(query index, point index, value)`` blocks over all relevant pairs."""
    d = points.shape[1]
    radius = _support(resp, d)
    if math.isfinite(radius):
        grid = build_cell_grid(points, max(radius, 1e-12))
        qi, pj, _ = cross_pairs_within(grid, queries, radius)
        yield qi, pj, resp.value(queries[qi] - points[pj])
        return
    step = max(1, _CHUNK // max(1, len(points)))
    for s in range(0, len(queries), step):
        q = queries[s:s + step]
        qi = np.repeat(np.arange(s, s + len(q)), len(points))
        pj = np.tile(np.arange(len(points)), len(q))
        yield qi, pj, resp.value((q[:, None, :] - points[None, :, :]).reshape(-1, d))


def _points_of(pattern):
    return pattern.points if isinstance(pattern, PointPattern) else np.atleast_2d(np.asarray(pattern, float))


def additive_sn(pattern, response, queries) -> np.ndarray:
    """``V(y) = sum_X l(y, X)`` over every point of the (dilated) pattern."""
    pts = _points_of(pattern)
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.zeros(len(q))
    if len(pts) == 0 or len(q) == 0:
        return out
    for qi, _, v in _pair_values(pts, q, response):
        out += np.bincount(qi, weights=v, minlength=len(q))
    return out


def extremal_sn(pattern, response, queries) -> np.ndarray:
    """``U(y) = sup_X l(y, X)``, zero for an empty pattern."""
    pts = _points_of(pattern)
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.zeros(len(q))
    if len(pts) == 0 or len(q) == 0:
        return out
    for qi, _, v in _pair_values(pts, q, response):
        np.maximum.at(out, qi, v)
    return out


def level_set_sites(values, h: float, direction: str = ">="):
    """Open/closed states ``values >= h`` (or ``<= h``); keeps a SiteField wrapper."""
    from .discrete import SiteField

    if direction not in (">=", "<="):
        raise ValueError("direction must be '>=' or '<='")
    arr = values.open if isinstance(values, SiteField) else np.asarray(values, dtype=float)
    arr = np.asarray(arr, dtype=float)
    state = arr >= h if direction == ">=" else arr <= h
    if isinstance(values, SiteField):
        return SiteField(values.spec, state, values.origin)
    return state


def interference(pattern, x, l, exclude: int | None = None) -> float:
    """``sum l(|X - x|)`` over pattern points other than ``exclude`` and any
    point located exactly at ``x``."""
    pts = _points_of(pattern)
    if len(pts) == 0:
        return 0.0
    x = np.asarray(x, dtype=float)
    keep = ~np.all(pts == x, axis=1)
    if exclude is not None:
        keep[exclude] = False
    if not keep.any():
        return 0.0
    return float(math.fsum(l.value(pts[keep] - x)))


@dataclass(frozen=True)
class SinrParams:
    P: float = 1.0
    N: float = 0.01
    T: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if not self.P > 0:
            raise ValueError("P must be positive")
        if min(self.N, self.T, self.gamma) < 0:
            raise ValueError("N, T and gamma must be nonnegative")

    def with_gamma(self, gamma: float) -> "SinrParams":
        return SinrParams(self.P, self.N, self.T, gamma)


def sinr_value(x, y, interferers, params: SinrParams, l) -> float:
    """``P l(|x-y|) / (N + gamma P I(y))`` with ``I`` summed over interferers
    other than those located at ``x`` or ``y``.

    A zero denominator gives ``+inf`` when the numerator is positive and
    ``0`` otherwise.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sig = params.P * float(l.value((x - y)[None, :])[0])
    pts = _points_of(interferers)
    if len(pts) and params.gamma > 0:
        keep = ~np.all(pts == x, axis=1)
        I = interference(pts[keep], y, l) if keep.any() else 0.0
    else:
        I = 0.0
    den = params.N + params.gamma * params.P * I
    if den == 0:
        return math.inf if sig > 0 else 0.0
    return sig / den


def snr_radius(params: SinrParams, l) -> float:
    """Half the distance at which the noise-only ratio equals ``T``:
    ``r_l = l^-1(T N / P) / 2``, by bisection to ``1e-12`` relative precision."""
    level = params.T * params.N / params.P
    l0 = float(l.l(0.0))
    if level > l0:
        raise ValueError(f"infeasible: T N / P = {level} exceeds l(0) = {l0}")
    if level == l0:
        return 0.0
    if level == 0:
        return 0.5 * l.support_radius
    lo, hi = 0.0, 1.0
    while float(l.l(hi)) > level:
        lo, hi = hi, 2 * hi
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if float(l.l(mid)) > level:
            lo = mid
        else:
            hi = mid
    return 0.25 * (lo + hi)


class _SinrCache:
    """Candidate links and interference of one backbone/interferer pair,
    reusable across values of gamma."""

    def __init__(self, backbone: PointPattern, interferers, params: SinrParams, l):
        self.pattern = backbone
        pts = backbone.points
        self.n = len(pts)
        r_l = snr_radius(params, l)
        self.r_l = r_l
        if self.n < 2:
            self.i = self.j = np.zeros(0, np.int64)
            self.sig = np.zeros(0)
            self.I_ij = self.I_ji = np.zeros(0)
            return
        if math.isfinite(r_l):
            i, j, dd = pairs_within(pts, 2 * r_l)
        else:
            i, j = np.triu_indices(self.n, 1)
            dd = np.linalg.norm(pts[i] - pts[j], axis=1)
        self.i, self.j = i, j
        self.sig = params.P * l.l(dd)
        ipts = _points_of(interferers)
        if len(ipts) == 0:
            self.I_ij = self.I_ji = np.zeros(len(i))
            return
        # interference at every backbone node from all interferers not located at it
        I_all = additive_sn(ipts, l, pts) - self._at_self(pts, ipts, l)
        mult = self._multiplicity(pts, ipts)
        own = np.where(dd > 0, l.l(dd), 0.0)  # coincident points were already excluded
        self.I_ij = np.maximum(I_all[j] - mult[i] * own, 0.0)  # received at j from i's view
        self.I_ji = np.maximum(I_all[i] - mult[j] * own, 0.0)

    @staticmethod
    def _multiplicity(pts, ipts):
        keys = {}
        for row in map(tuple, ipts):
            keys[row] = keys.get(row, 0) + 1
        return np.array([keys.get(tuple(row), 0) for row in pts], dtype=float)

    @classmethod
    def _at_self(cls, pts, ipts, l):
        return cls._multiplicity(pts, ipts) * float(l.l(0.0))

    def edges(self, params: SinrParams):
        den_ij = params.N + params.gamma * params.P * self.I_ij
        den_ji = params.N + params.gamma * params.P * self.I_ji
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(den_ij > 0, self.sig / den_ij, np.where(self.sig > 0, np.inf, 0.0))
            b = np.where(den_ji > 0, self.sig / den_ji, np.where(self.sig > 0, np.inf, 0.0))
        keep = (a > params.T) & (b > params.T)
        return self.i[keep], self.j[keep]


def build_sinr_graph(backbone: PointPattern, interferers, params: SinrParams, l) -> GeometricGraph:
    """Undirected edge between backbone points ``x, y`` when the SINR exceeds
    ``T`` in both directions.  The graph's radius is the SNR radius."""
    cache = _SinrCache(backbone, interferers, params, l)
    i, j = cache.edges(params)
    return _edges_from(i, j, cache.n, cache.r_l)


# --------------------------------------------------------------------------
# Monte-Carlo sweep over gamma


@dataclass(frozen=True)
class SinrRow:
    gamma: float
    p_span: float
    ci_lo: float
    ci_hi: float
    reps: int
    mean_frac1: float


def interference_tail_bound(intensity: float, l, margin: float) -> float:
    """``intensity * int_margin^inf 2 pi t l(t) dt``: expected interference
    from Poisson points beyond ``margin`` (planar)."""
    if isinstance(l, TruncatedPowerLaw) and margin >= l.t_max:
        return 0.0
    if isinstance(l, PowerLaw):
        b = l.beta
        if b <= 2:
            return math.inf
        m = 1.0 + margin
        return intensity * 2 * math.pi * (m ** (2 - b) / (b - 2) - m ** (1 - b) / (b - 1))
    val, _ = integrate.quad(lambda t: 2 * math.pi * t * float(l.l(t)), margin, l.support_radius)
    return intensity * val


def sinr_sweep(gen_config, params: SinrParams, l, gammas: Sequence[float], reps: int, rng,
               window: Window | None = None, margin: float | None = None, interferer_config=None,
               axis: int = 0, threads: int = 1) -> list:
    """Spanning probability of the SINR graph for each ``gamma``.

    Backbone points are those of ``gen_config`` inside the window; the
    interferers are all sampled points in the window dilated by ``margin``
    (default ``5 * snr_radius``), or a separate ``interferer_config``.
    Every gamma reuses the same realizations.
    """
    window = window or Window.square(20.0)
    r_l = snr_radius(params, l)
    margin = 5 * r_l if margin is None else margin
    stream = as_stream(rng)

    def one(k):
        s = stream.derive(k)
        full = gen_config.sample(window, s.derive("backbone"), margin)
        inter = full if interferer_config is None else interferer_config.sample(window, s.derive("interferers"), margin)
        return _SinrCache(full.restrict(), inter, params, l)

    caches = map_ordered(one, range(reps), threads)
    rows = []
    for g in gammas:
        p = params.with_gamma(float(g))
        spans, f1 = 0, 0.0
        for c in caches:
            i, j = c.edges(p)
            _, labels = _label_components(c.n, i, j)
            st = _summarize(c.n, np.asarray(labels, np.int64), c.pattern.points, c.pattern.window, r_l)
            spans += st.spans[axis]
            f1 += st.fraction_largest
        lo, hi = wilson_interval(spans, reps)
        rows.append(SinrRow(float(g), spans / reps, lo, hi, reps, f1 / reps))
    return rows


# --------------------------------------------------------------------------
# Chernoff bounds on joint level crossings


def _cube_union_integral(sites, r, sign_s):
    """Exact ``int (exp(sign_s * #{i: x in Q_r(z_i)}) - 1) dx`` by cutting space
    along every cube face."""
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    d = sites.shape[1]
    cuts = [np.unique(np.concatenate([sites[:, a] - r, sites[:, a] + r])) for a in range(d)]
    mids = [0.5 * (c[1:] + c[:-1]) for c in cuts]
    widths = [np.diff(c) for c in cuts]
    grids = np.meshgrid(*mids, indexing="ij")
    centres = np.stack([g.ravel() for g in grids], axis=-1)
    vol = np.ones(1)
    for w in widths:
        vol = np.multiply.outer(vol, w)
    vol = vol.ravel()
    counts = np.zeros(len(centres))
    for z in sites:
        counts += np.all(np.abs(centres - z) < r, axis=1)
    return math.fsum(vol * np.expm1(sign_s * counts))


def chernoff_level_bound(lam: float, l, s: float, h: float, sites, direction: str = ">=",
                         epsabs: float = 1e-10, epsrel: float = 1e-10) -> float:
    """Upper bound on ``P(V(z_i) >= h for all i)`` (or ``<= h``) for Poisson shot
    noise of intensity ``lam`` at the ``n`` sites, namely
    ``exp(-+ s n h) * exp(lam * int (exp(+- s sum_i l(x, z_i)) - 1) dx)``.

    The cube indicator is integrated exactly; radial responses in the plane
    use nested adaptive quadrature in polar coordinates about the sites'
    centroid with the given tolerances.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    if direction not in (">=", "<="):
        raise ValueError("direction must be '>=' or '<='")
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    n, d = sites.shape
    sign = 1.0 if direction == ">=" else -1.0
    if isinstance(l, IndicatorCube):
        integral = _cube_union_integral(sites, l.r, sign * s)
    else:
        if d != 2:
            raise ValueError("radial responses are integrated in the plane only")
        if isinstance(l, PowerLaw) and l.beta <= d:
            raise ValueError(f"divergent integral: power-law exponent {l.beta} <= dimension {d}")
        c = sites.mean(axis=0)
        spread = float(np.max(np.linalg.norm(sites - c, axis=1)))
        outer = spread + l.support_radius

        def integrand(theta, rho):
            x = c + rho * np.array([math.cos(theta), math.sin(theta)])
            v = float(np.sum(l.value(x[None, :] - sites)))
            return math.expm1(sign * s * v) * rho

        pieces = [(0.0, spread + 1.0)]
        if math.isfinite(outer):
            pieces.append((spread + 1.0, max(outer, spread + 1.0)))
        else:
            pieces.append((spread + 1.0, math.inf))
        integral = 0.0
        for a, b in pieces:
            if b <= a:
                continue
            val, _ = integrate.dblquad(integrand, a, b, 0.0, 2 * math.pi, epsabs=epsabs, epsrel=epsrel)
            integral += val
    log_bound = -sign * s * n * h + lam * integral
    return math.exp(log_bound) if log_bound < 700 else math.inf
