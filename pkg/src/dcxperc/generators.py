"""Point-process samplers: Poisson, lattices, perturbed lattices, annular
Poisson-Poisson cluster processes, and joint count vectors for
determinantal / Poisson / permanental models on disjoint sets.

Process configurations are small frozen dataclasses exposing ``intensity``
and ``sample(window, rng, margin)``; estimators in the other modules accept
any of them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .core import PointPattern, RngStream, Window, as_stream

__all__ = [
    "Dirac", "Binomial", "Poisson", "NegBinomial", "Geometric", "HyperGeometric", "GeoMixture",
    "UniformCell", "UniformAnnulus", "UniformBall",
    "LatticeSpec", "EigenTable",
    "PoissonProcess", "LatticeProcess", "PerturbedLattice", "AnnularCox", "Superposition",
    "sample_poisson", "make_lattice", "sample_replication", "sample_perturbed_lattice",
    "sample_annular_cox", "counterexample_params", "open_center_probability",
    "log_growth_term", "sample_count_vectors", "CounterexampleParams",
]


# --------------------------------------------------------------------------
# replication kernels


class _Kernel:
    """Common interface: ``mean``, ``pmf(k)``, ``sample(gen, size)``."""

    tag = "kernel"

    def pmf(self, k):
        return self._frozen().pmf(np.asarray(k))

    def sample(self, gen: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"kind": self.tag, **asdict(self)}


@dataclass(frozen=True)
class Dirac(_Kernel):
    k: int = 1
    tag = "dirac"

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise ValueError("Dirac needs a nonnegative integer")

    @property
    def mean(self) -> float:
        return float(self.k)

    def pmf(self, k):
        return (np.asarray(k) == self.k).astype(float)

    def sample(self, gen, size):
        return np.full(size, int(self.k), dtype=np.int64)


@dataclass(frozen=True)
class Binomial(_Kernel):
    n: int
    p: float
    tag = "binomial"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1 or not 0 <= self.p <= 1:
            raise ValueError(f"invalid Binomial({self.n}, {self.p})")

    @property
    def mean(self) -> float:
        return self.n * self.p

    def _frozen(self):
        return stats.binom(int(self.n), self.p)

    def sample(self, gen, size):
        return gen.binomial(int(self.n), self.p, size=size).astype(np.int64)


@dataclass(frozen=True)
class Poisson(_Kernel):
    lam: float
    tag = "poisson"

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("Poisson mean must be nonnegative")

    @property
    def mean(self) -> float:
        return float(self.lam)

    def _frozen(self):
        return stats.poisson(self.lam)

    def pmf(self, k):
        if self.lam == 0:
            return (np.asarray(k) == 0).astype(float)
        return self._frozen().pmf(np.asarray(k))

    def sample(self, gen, size):
        return gen.poisson(self.lam, size=size).astype(np.int64)


@dataclass(frozen=True)
class NegBinomial(_Kernel):
    """pmf ``C(r+i-1, i) p^i (1-p)^r``; mean ``r p / (1-p)``."""

    r: float
    p: float
    tag = "negbinomial"

    def __post_init__(self):
        if not self.r > 0 or not 0 < self.p < 1:
            raise ValueError(f"invalid NegBinomial({self.r}, {self.p})")

    @property
    def mean(self) -> float:
        return self.r * self.p / (1 - self.p)

    def _frozen(self):
        # scipy counts failures before r successes of probability 1-p
        return stats.nbinom(self.r, 1 - self.p)

    def sample(self, gen, size):
        return gen.negative_binomial(self.r, 1 - self.p, size=size).astype(np.int64)


@dataclass(frozen=True)
class Geometric(_Kernel):
    """pmf ``p (1-p)^i`` on ``i = 0, 1, ...``; mean ``(1-p)/p``."""

    p: float
    tag = "geometric"

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("Geometric needs p in (0, 1)")

    @property
    def mean(self) -> float:
        return (1 - self.p) / self.p

    def _frozen(self):
        return stats.nbinom(1, self.p)

    def sample(self, gen, size):
        return gen.geometric(self.p, size=size).astype(np.int64) - 1


@dataclass(frozen=True)
class HyperGeometric(_Kernel):
    """Draws of ``k`` items from ``n``, of which ``m`` are marked; mean ``k m / n``."""

    n: int
    m: int
    k: int
    tag = "hypergeometric"

    def __post_init__(self):
        if min(self.n, self.m, self.k) < 0 or self.n < 1 or self.m > self.n or self.k > self.n:
            raise ValueError(f"invalid HyperGeometric({self.n}, {self.m}, {self.k})")

    @property
    def mean(self) -> float:
        return self.k * self.m / self.n

    def _frozen(self):
        return stats.hypergeom(self.n, self.m, self.k)

    def sample(self, gen, size):
        return gen.hypergeometric(self.m, self.n - self.m, self.k, size=size).astype(np.int64)


@dataclass(frozen=True)
class GeoMixture(_Kernel):
    """Mixture of ``Geometric(p_j)`` with weights ``w_j``.

    If ``target_mean`` is given the constraint ``sum w_j / p_j == target_mean + 1``
    is checked at construction.
    """

    weights: tuple
    params: tuple
    target_mean: float | None = None
    tag = "geomixture"

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        p = tuple(float(x) for x in self.params)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "params", p)
        if len(w) != len(p) or not w:
            raise ValueError("weights and params must have equal nonzero length")
        if any(x < 0 for x in w) or abs(sum(w) - 1) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if any(not 0 < x < 1 for x in p):
            raise ValueError("geometric parameters must lie in (0, 1)")
        if self.target_mean is not None:
            lhs = sum(a / b for a, b in zip(w, p))
            if abs(lhs - (self.target_mean + 1)) > 1e-9:
                raise ValueError(f"mixture mean {lhs - 1} differs from target {self.target_mean}")

    @property
    def mean(self) -> float:
        return sum(a * (1 - b) / b for a, b in zip(self.weights, self.params))

    def pmf(self, k):
        k = np.asarray(k)
        return sum(a * stats.nbinom(1, b).pmf(k) for a, b in zip(self.weights, self.params))

    def sample(self, gen, size):
        comp = gen.choice(len(self.weights), size=size, p=np.array(self.weights))
        p = np.array(self.params)[comp]
        return gen.geometric(p).astype(np.int64) - 1


KERNELS = {c.tag: c for c in (Dirac, Binomial, Poisson, NegBinomial, Geometric, HyperGeometric, GeoMixture)}


def kernel_from_dict(d: dict):
    d = dict(d)
    cls = KERNELS[d.pop("kind")]
    return cls(**d)


def sample_replication(kernel, rng) -> int:
    gen = as_stream(rng).generator()
    return int(kernel.sample(gen, 1)[0])


# --------------------------------------------------------------------------
# lattices and translation kernels

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class LatticeSpec:
    """Square lattice ``spacing * Z^d`` or the planar triangular ("hexagonal")
    lattice with rows at height ``j * spacing * sqrt(3)/2`` and odd rows
    shifted by ``spacing / 2``.  The origin is always a lattice point."""

    kind: str = "hexagonal"
    spacing: float = 1.0
    d: int = 2

    def __post_init__(self):
        if self.kind not in ("square", "hexagonal"):
            raise ValueError(f"unknown lattice kind {self.kind!r}")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if self.kind == "hexagonal" and self.d != 2:
            raise ValueError("hexagonal lattice is planar")

    @property
    def intensity(self) -> float:
        s = self.spacing
        if self.kind == "square":
            return 1.0 / s ** self.d
        return 2.0 / (_SQRT3 * s * s)

    @property
    def cell_radius(self) -> float:
        """Circumradius of the Voronoi cell."""
        s = self.spacing
        return s * math.sqrt(self.d) / 2 if self.kind == "square" else s / _SQRT3

    def points_in(self, lo, hi) -> np.ndarray:
        """Lattice points in the closed box ``[lo, hi]``."""
        lo, hi, s = np.asarray(lo, float), np.asarray(hi, float), self.spacing
        if self.kind == "square":
            axes = [np.arange(math.ceil(a / s - 1e-12), math.floor(b / s + 1e-12) + 1) * s
                    for a, b in zip(lo, hi)]
            grid = np.meshgrid(*axes, indexing="ij")
            return np.stack([g.ravel() for g in grid], axis=-1).reshape(-1, self.d)
        h = s * _SQRT3 / 2
        j = np.arange(math.ceil(lo[1] / h - 1e-12), math.floor(hi[1] / h + 1e-12) + 1)
        rows = []
        for jj in j:
            shift = 0.5 * s if jj % 2 else 0.0
            i = np.arange(math.ceil((lo[0] - shift) / s - 1e-12), math.floor((hi[0] - shift) / s + 1e-12) + 1)
            rows.append(np.column_stack([i * s + shift, np.full(len(i), jj * h)]))
        return np.concatenate(rows) if rows else np.zeros((0, 2))


@dataclass(frozen=True)
class UniformCell:
    """Uniform on the Voronoi cell of a lattice point (square or hexagon)."""

    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    tag = "cell"

    @property
    def support_radius(self) -> float:
        return self.lattice.cell_radius

    def sample(self, gen, n: int) -> np.ndarray:
        s, d = self.lattice.spacing, self.lattice.d
        if self.lattice.kind == "square":
            return gen.uniform(-s / 2, s / 2, size=(n, d))
        out = np.empty((0, 2))
        # rejection from the bounding box; acceptance 3/4
        normals = np.array([[1.0, 0.0], [0.5, _SQRT3 / 2], [-0.5, _SQRT3 / 2]])
        while len(out) < n:
            m = int(1.4 * (n - len(out))) + 8
            cand = np.column_stack([gen.uniform(-s / 2, s / 2, m), gen.uniform(-s / _SQRT3, s / _SQRT3, m)])
            ok = np.all(np.abs(cand @ normals.T) <= s / 2, axis=1)
            out = np.concatenate([out, cand[ok]])
        return out[:n]


@dataclass(frozen=True)
class UniformAnnulus:
    """Uniform on ``{R - delta < |x| <= R}`` in the plane."""

    R: float
    delta: float
    tag = "annulus"

    def __post_init__(self):
        if not 0 < self.delta <= self.R:
            raise ValueError("need 0 < delta <= R")

    @property
    def support_radius(self) -> float:
        return float(self.R)

    def sample(self, gen, n: int) -> np.ndarray:
        r0 = self.R - self.delta
        rad = np.sqrt(gen.uniform(r0 * r0, self.R * self.R, n))
        th = gen.uniform(0, 2 * np.pi, n)
        return np.column_stack([rad * np.cos(th), rad * np.sin(th)])


@dataclass(frozen=True)
class UniformBall:
    R: float
    d: int = 2
    tag = "ball"

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("ball radius must be positive")

    @property
    def support_radius(self) -> float:
        return float(self.R)

    def sample(self, gen, n: int) -> np.ndarray:
        v = gen.standard_normal((n, self.d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        rad = self.R * gen.uniform(0, 1, n) ** (1.0 / self.d)
        return v * rad[:, None]


# --------------------------------------------------------------------------
# samplers


def _check_margin(margin):
    if margin < 0:
        raise ValueError("margin must be nonnegative")


def sample_poisson(window: Window, intensity: float, margin: float, rng) -> PointPattern:
    if intensity < 0:
        raise ValueError("intensity must be nonnegative")
    _check_margin(margin)
    gen = as_stream(rng).generator()
    outer = window.dilate(margin)
    n = gen.poisson(intensity * outer.volume) if intensity > 0 else 0
    pts = gen.uniform(outer.lo, outer.hi, size=(n, window.dim))
    return PointPattern(window, pts, margin)


def make_lattice(spec: LatticeSpec, window: Window, margin: float = 0.0) -> PointPattern:
    """Lattice points in the window dilated by ``margin`` (half-open box)."""
    _check_margin(margin)
    if window.dim != spec.d:
        raise ValueError("lattice and window dimensions differ")
    outer = window.dilate(margin)
    pts = spec.points_in(outer.lo, outer.hi)
    pts = pts[outer.contains(pts)] if len(pts) else pts
    return PointPattern(window, pts, margin)


def sample_perturbed_lattice(spec: LatticeSpec, repl, trans, window: Window, rng, margin: float = 0.0) -> PointPattern:
    """Replicate every lattice point ``N_X ~ repl`` times and move each replica
    by an independent draw of ``trans``.  Source points are taken from the
    window dilated by ``margin`` plus the translation support radius, so the
    returned pattern is exact inside the window dilated by ``margin``."""
    _check_margin(margin)
    stream = as_stream(rng)
    outer = window.dilate(margin)
    src = spec.points_in(outer.lo - trans.support_radius, outer.hi + trans.support_radius)
    counts = repl.sample(stream.derive("replicate").generator(), len(src))
    base = np.repeat(src, counts, axis=0)
    pts = base + trans.sample(stream.derive("translate").generator(), len(base))
    pts = pts[outer.contains(pts)] if len(pts) else pts.reshape(0, window.dim)
    return PointPattern(window, pts, margin)


def sample_annular_cox(alpha: float, R: float, delta: float, mu: float, window: Window, rng,
                       margin: float = 0.0) -> PointPattern:
    """Poisson(alpha) centres, each with Poisson(mu) daughters uniform on the
    annulus of outer radius ``R`` and width ``delta``."""
    if not 0 < delta <= R:
        raise ValueError(f"need 0 < delta <= R, got delta={delta}, R={R}")
    if alpha < 0 or mu < 0:
        raise ValueError("alpha and mu must be nonnegative")
    _check_margin(margin)
    stream = as_stream(rng)
    outer = window.dilate(margin)
    centres = sample_poisson(window, alpha, margin + R, stream.derive("centres")).points
    gen = stream.derive("daughters").generator()
    counts = gen.poisson(mu, len(centres)) if mu > 0 else np.zeros(len(centres), np.int64)
    base = np.repeat(centres, counts, axis=0)
    pts = base + UniformAnnulus(R, delta).sample(gen, len(base))
    pts = pts[outer.contains(pts)] if len(pts) else pts.reshape(0, window.dim)
    return PointPattern(window, pts, margin)


# --------------------------------------------------------------------------
# process configurations


def _to_dict(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if hasattr(obj, "__dataclass_fields__"):
        out = {"kind": getattr(obj, "tag", type(obj).__name__.lower())}
        for k in obj.__dataclass_fields__:
            out[k] = _to_dict(getattr(obj, k))
        return out
    if isinstance(obj, (tuple, list)):
        return [_to_dict(x) for x in obj]
    return obj


@dataclass(frozen=True)
class PoissonProcess:
    intensity: float
    d: int = 2
    tag = "poisson"

    def sample(self, window, rng, margin=0.0):
        return sample_poisson(window, self.intensity, margin, rng)

    def to_dict(self):
        return _to_dict_plain(self)


@dataclass(frozen=True)
class LatticeProcess:
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    tag = "lattice"

    @property
    def intensity(self):
        return self.lattice.intensity

    def sample(self, window, rng=None, margin=0.0):
        return make_lattice(self.lattice, window, margin)

    def to_dict(self):
        return _to_dict_plain(self)


@dataclass(frozen=True)
class PerturbedLattice:
    lattice: LatticeSpec
    repl: object
    trans: object = None
    tag = "perturbed"

    def __post_init__(self):
        if self.trans is None:
            object.__setattr__(self, "trans", UniformCell(self.lattice))

    @property
    def intensity(self):
        return self.lattice.intensity * self.repl.mean

    def sample(self, window, rng, margin=0.0):
        return sample_perturbed_lattice(self.lattice, self.repl, self.trans, window, rng, margin)

    def to_dict(self):
        return _to_dict_plain(self)


@dataclass(frozen=True)
class AnnularCox:
    alpha: float
    R: float
    delta: float
    mu: float
    tag = "annular_cox"

    @property
    def intensity(self):
        return self.alpha * self.mu

    def sample(self, window, rng, margin=0.0):
        return sample_annular_cox(self.alpha, self.R, self.delta, self.mu, window, rng, margin)

    def to_dict(self):
        return _to_dict_plain(self)


@dataclass(frozen=True)
class Superposition:
    """Independent superposition of several processes."""

    parts: tuple
    tag = "superposition"

    @property
    def intensity(self):
        return sum(p.intensity for p in self.parts)

    def sample(self, window, rng, margin=0.0):
        stream = as_stream(rng)
        pats = [p.sample(window, stream.derive(i), margin) for i, p in enumerate(self.parts)]
        pts = np.concatenate([p.points for p in pats]) if pats else np.zeros((0, window.dim))
        return PointPattern(window, pts, margin)

    def to_dict(self):
        return {"kind": self.tag, "parts": [p.to_dict() for p in self.parts]}


def _to_dict_plain(obj):
    out = {"kind": obj.tag}
    for k in obj.__dataclass_fields__:
        v = getattr(obj, k)
        out[k] = _to_dict(v)
    return out


# --------------------------------------------------------------------------
# the annular cluster counterexample


@dataclass(frozen=True)
class CounterexampleParams:
    alpha: float
    mu: float
    delta: float
    R: float
    K: int
    p_open: float
    volume_fraction: float

    def __iter__(self):
        return iter((self.alpha, self.mu, self.delta, self.R, self.K, self.p_open))


def open_center_probability(K: int, mu: float) -> float:
    """``(1 - exp(-mu/K))^K``: every one of ``K`` equal arcs receives a daughter."""
    return float(np.exp(K * np.log1p(-np.exp(-mu / K))))


def _log_terms(logR: float, r: float, K: float | None = None):
    """Logs of (mu, p, R^2) with K = 2 pi R / r unless given."""
    if K is None:
        logK = math.log(2 * math.pi / r) + logR
        K = math.exp(logK) if logK < 700 else math.inf
    else:
        logK = math.log(K)
    loglog = math.log(logR)
    # mu = K log(R / sqrt(log R)); p = (1 - sqrt(log R)/R)^K
    log_mu = logK + math.log(logR - 0.5 * loglog)
    log_x = 0.5 * loglog - logR
    # log(-log(1 - x)), accurate for tiny x
    if log_x < -30:
        log_nl = log_x + math.log1p(0.5 * math.exp(log_x))
    else:
        log_nl = math.log(-math.log1p(-math.exp(log_x)))
    log_p = -math.exp(logK + log_nl)
    return log_mu, log_p, 2 * logR


def log_growth_term(logR: float, r: float) -> float:
    """``log(p(R, mu(R)) R^2 / mu(R))`` evaluated entirely in log space."""
    log_mu, log_p, log_r2 = _log_terms(logR, r)
    return log_p + log_r2 - log_mu


def counterexample_params(a: float, r: float, target: float = 0.9, K_cap: int = 2 ** 53) -> CounterexampleParams:
    """Parameters of the annular Cox process with intensity ``a`` whose open
    cluster centres cover a volume fraction above ``target``.

    ``delta = r/2``, ``K = 2 pi R / r`` integral, ``mu = K log(R/sqrt(log R))``,
    ``alpha = a/mu``.  ``K`` is scanned by doubling and then bisected; the
    returned ``R`` is the smallest one found on that path.  Raises
    ``ValueError`` naming the largest fraction reached if ``K`` would exceed
    ``K_cap``.
    """
    if not a > 0 or not r > 0:
        raise ValueError("a and r must be positive")

    def fraction(K: int):
        R = K * r / (2 * math.pi)
        logR = math.log(R)
        log_mu, log_p, log_r2 = _log_terms(logR, r, float(K))
        expo = math.log(a * math.pi) + log_p + log_r2 - log_mu
        frac = -math.expm1(-math.exp(expo)) if expo < 700 else 1.0
        return frac, R, math.exp(log_mu), math.exp(log_p)

    K = max(1, math.ceil(2 * math.pi * 3.0 / r))  # R >= 3 keeps log(R/sqrt(log R)) > 0
    best = (-1.0, None)
    prev = None
    while K <= K_cap:
        f = fraction(K)
        if f[0] > best[0]:
            best = (f[0], K)
        if f[0] > target:
            lo, hi = (prev if prev is not None else K), K
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if fraction(mid)[0] > target:
                    hi = mid
                else:
                    lo = mid
            if fraction(lo)[0] > target:
                hi = lo
            frac, R, mu, p = fraction(hi)
            return CounterexampleParams(a / mu, mu, r / 2, R, int(hi), p, frac)
        prev = K
        K *= 2
    raise ValueError(
        f"no admissible R with K <= {K_cap}: largest volume fraction {best[0]:.6g} at K={best[1]}"
    )


# --------------------------------------------------------------------------
# count vectors on disjoint simultaneously observable sets


@dataclass(frozen=True)
class EigenTable:
    """Nonnegative matrix; row ``j`` splits eigenvalue ``sum_i lam[j, i]`` over sets ``i``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("eigen table entries must be finite and nonnegative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)

    @property
    def k(self) -> int:
        return self.values.shape[1]


def sample_count_vectors(model: str, table, reps: int, rng) -> np.ndarray:
    """``(reps, k)`` integer array of joint counts.

    Row ``j`` contributes ``N_j`` one-hot multinomial vectors with cell
    probabilities ``lam[j, i] / lam_j``; ``N_j`` is Bernoulli (``det``), Poisson
    (``poi``) or geometric with success probability ``1/(1+lam_j)``
    (``perm``), all with mean ``lam_j``.
    """
    table = table if isinstance(table, EigenTable) else EigenTable(table)
    if model not in ("det", "poi", "perm"):
        raise ValueError(f"unknown model {model!r}")
    sums = table.row_sums
    if model == "det" and np.any(sums > 1):
        raise ValueError(f"determinantal model needs row sums <= 1, got {sums.max()}")
    gen = as_stream(rng).generator()
    out = np.zeros((reps, table.k), dtype=np.int64)
    for lam_row, lam in zip(table.values, sums):
        if lam == 0:
            continue
        if model == "det":
            n = gen.binomial(1, lam, reps)
        elif model == "poi":
            n = gen.poisson(lam, reps)
        else:
            n = gen.geometric(1.0 / (1.0 + lam), reps) - 1
        out += gen.multinomial(n, lam_row / lam)
    return out
