import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcxperc import generators as gn
from dcxperc import ordering as od
from dcxperc.core import RngStream, Window

LAM = 2 / math.sqrt(3)


def _dist(kernel, cap=200):
    return od.IntDistribution.from_kernel(kernel, cap)


def _equal_mean_kernels(m):
    out = [gn.Dirac(m), gn.Poisson(float(m)), gn.Geometric(1 / (1 + m))]
    out += [gn.Binomial(n, m / n) for n in (m + 1, 2 * m, 6 * m)]
    out += [gn.NegBinomial(r, m / (r + m)) for r in (0.5, 1.5, 4.0)]
    out += [gn.HyperGeometric(n, M, k) for n, M, k in ((4 * m, 2 * m, 2 * m), (6 * m, 3 * m, 2 * m), (12, 6, 2 * m))]
    return out


def test_int_distribution_validation():
    with pytest.raises(ValueError, match="increase cap"):
        od.IntDistribution.from_kernel(gn.Poisson(2.0), 5)
    with pytest.raises(ValueError):
        od.IntDistribution([0.5, -0.1, 0.6])
    d = od.IntDistribution.from_kernel(gn.Poisson(2.0))
    assert d.mean == pytest.approx(2.0, abs=1e-12)
    assert d.var == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("kernel", _equal_mean_kernels(2) + [gn.GeoMixture((0.5, 0.5), (0.5, 0.25))],
                         ids=lambda k: k.tag)
def test_stop_loss_brute_force(kernel):
    d = _dist(kernel)
    p = d.pmf
    want = [math.fsum((j - k) * p[j] for j in range(k + 1, len(p))) for k in range(len(p))]
    assert np.array_equal(d.stop_loss(), np.array(want)) or np.allclose(d.stop_loss(), want, rtol=0, atol=1e-15)


def test_cx_examples():
    b = _dist(gn.Binomial(2, 0.5))
    p = _dist(gn.Poisson(1.0))
    assert od.cx_order_check(b, b).verdict == "equal"
    assert b.stop_loss()[1] == pytest.approx(0.25, abs=1e-15)
    assert p.stop_loss()[1] == pytest.approx(math.exp(-1), abs=1e-14)
    v = od.cx_order_check(b, p)
    assert v.verdict == "A<=cx B"
    assert od.cx_order_check(p, b).verdict == "B<=cx A"
    assert od.cx_order_check(b, _dist(gn.Poisson(1.5))).witness == "mean"


def test_full_chain_ordered():
    chain = [gn.HyperGeometric(12, 6, 4), gn.Binomial(6, 1 / 3), gn.Poisson(2.0), gn.NegBinomial(2, 0.5),
             gn.Geometric(1 / 3)]
    ds_ = [_dist(k) for k in chain]
    for a, b in zip(ds_, ds_[1:]):
        assert od.cx_order_check(a, b, 1e-12).verdict == "A<=cx B"


_MIRROR = {"A<=cx B": "B<=cx A", "B<=cx A": "A<=cx B", "equal": "equal", "incomparable": "incomparable"}
POOL = _equal_mean_kernels(1) + _equal_mean_kernels(2)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(POOL), st.sampled_from(POOL))
def test_verdict_mirror(ka, kb):
    a, b = _dist(ka), _dist(kb)
    assert od.cx_order_check(b, a).verdict == _MIRROR[od.cx_order_check(a, b).verdict]


def _random_convex_pl(rng, lo, hi):
    """Max of a few random affine functions: convex, piecewise linear."""
    slopes = np.sort(rng.uniform(-3, 3, 4))
    knots = rng.uniform(lo, hi, 4)
    offsets = rng.uniform(0, 1, 4)

    def f(x):
        x = np.asarray(x, float)[..., None]
        return np.max(slopes * (x - knots) + offsets, axis=-1)

    return f


def test_verdict_agrees_with_convex_functions():
    rng = np.random.default_rng(5)
    checked = 0
    for trial in range(50):
        m = int(rng.integers(1, 3))
        pool = _equal_mean_kernels(m)
        ka, kb = (pool[i] for i in rng.choice(len(pool), 2, replace=False))
        a, b = _dist(ka), _dist(kb)
        v = od.cx_order_check(a, b).verdict
        fs = [_random_convex_pl(rng, 0, 4 * m) for _ in range(20)]
        gaps = [a.expect(f) - b.expect(f) for f in fs]
        if v in ("A<=cx B", "equal"):
            assert max(gaps) <= 1e-9
        if v in ("B<=cx A", "equal"):
            assert min(gaps) >= -1e-9
        if v == "incomparable":
            k = od.cx_order_check(a, b).witness
            ramp = lambda x: np.maximum(x - k, 0)
            assert a.expect(ramp) > b.expect(ramp)
        checked += 1
    assert checked == 50


def test_battery_labels_and_values():
    x = np.array([[1, 2], [0, 0]])
    assert np.allclose(od.ExpPlus((0.5, 1.0))(x), [math.exp(2.5), 1])
    assert np.allclose(od.ExpMinus((0.5,))(x), [math.exp(-1.5), 1])
    assert np.allclose(od.Ramp(1.0)(x), [2, 0])
    assert np.allclose(od.ProductCounts()(x), [2, 0])
    assert [f.order_class for f in (od.ExpPlus(), od.ExpMinus(), od.Ramp(), od.ProductCounts())] == \
        ["idcx", "ddcx", "dcx", "idcx"]


def test_dcx_counts_check_examples():
    t = gn.EigenTable([[0.3, 0.2], [0.2, 0.1], [0.1, 0.3]])
    a = gn.sample_count_vectors("poi", t, 20_000, RngStream(0))
    assert all(r.consistent for r in od.dcx_counts_check(a, a))
    rows = {m: gn.sample_count_vectors(m, t, 20_000, RngStream(1).derive(m)) for m in ("det", "poi", "perm")}
    for x, y in (("det", "poi"), ("poi", "perm"), ("det", "perm")):
        r = od.dcx_counts_check(rows[x], rows[y], [od.Ramp(0.0)])[0]
        r2 = od.dcx_counts_check(rows[y], rows[x], [od.Ramp(0.0)])[0]
        assert r.consistent and r2.consistent
    with pytest.raises(ValueError):
        od.dcx_counts_check(np.zeros((3, 2)), np.zeros((3, 3)))


def test_ripley_single_point_and_errors():
    w = Window.square(10.0)
    from dcxperc.core import PointPattern
    one = PointPattern(w, np.array([[5.0, 5.0]]))
    assert np.all(od.ripley_k(one, [0.5, 1.0, 2.0]) == 0)
    with pytest.raises(ValueError):
        od.ripley_k(PointPattern(w, np.zeros((0, 2))), [1.0])


def test_ripley_poisson_mean():
    w = Window.square(30.0)
    proc = gn.PoissonProcess(LAM)
    ks = np.array([od.ripley_k(proc.sample(w, RngStream(2).derive(i)), [0.5])[0] for i in range(200)])
    se = ks.std(ddof=1) / math.sqrt(len(ks))
    want = LAM * math.pi * 0.25
    assert want == pytest.approx(0.90690, abs=1e-5)
    assert abs(ks.mean() - want) < 3 * se
    pat = proc.sample(w, RngStream(3))
    lam_hat = len(pat.restrict()) / w.volume
    raw = od.ripley_k(pat, [0.5])[0]
    assert od.ripley_k(pat, [0.5], normalized=True)[0] == pytest.approx(raw / lam_hat, rel=1e-14)


def test_ripley_perturbed_below_poisson():
    w = Window.square(30.0)
    pert = gn.PerturbedLattice(gn.LatticeSpec("hexagonal"), gn.Binomial(1, 1.0))
    pois = gn.PoissonProcess(LAM)
    kp = np.array([od.ripley_k(pert.sample(w, RngStream(4).derive(i)), [0.5])[0] for i in range(50)])
    kq = np.array([od.ripley_k(pois.sample(w, RngStream(5).derive(i)), [0.5])[0] for i in range(50)])
    slack = 1.96 * math.hypot(kp.std(ddof=1), kq.std(ddof=1)) / math.sqrt(50)
    assert kp.mean() <= kq.mean() + slack


def test_ripley_superposition():
    w = Window.square(25.0)
    sup = gn.Superposition((gn.PoissonProcess(0.4), gn.PoissonProcess(0.75)))
    single = gn.PoissonProcess(1.15)
    a = np.array([od.ripley_k(sup.sample(w, RngStream(6).derive(i)), [0.4, 0.8]) for i in range(100)])
    b = np.array([od.ripley_k(single.sample(w, RngStream(7).derive(i)), [0.4, 0.8]) for i in range(100)])
    se = np.hypot(a.std(axis=0, ddof=1), b.std(axis=0, ddof=1)) / 10
    assert np.all(np.abs(a.mean(axis=0) - b.mean(axis=0)) < 3 * se)


def test_void_probability_examples():
    box = Window.square(1.0)
    p, ci = od.void_probability(gn.PoissonProcess(0.0), box, 50, RngStream(0))
    assert p == 1.0
    p, ci = od.void_probability(gn.PoissonProcess(1.0), box, 4000, RngStream(1))
    assert abs(p - math.exp(-1)) < 3 * math.sqrt(math.exp(-1) * (1 - math.exp(-1)) / 4000)
    bin_ = gn.PerturbedLattice(gn.LatticeSpec("square"), gn.Binomial(2, 0.5))
    cell = Window((-0.5, -0.5), (0.5, 0.5))
    p, _ = od.void_probability(bin_, cell, 2000, RngStream(2))
    p0 = math.exp(-1)
    assert p <= p0 + 3 * math.sqrt(p0 * (1 - p0) / 2000)


def test_factorial_moment_examples():
    sq = gn.LatticeProcess(gn.LatticeSpec("square"))
    m, _ = od.factorial_moment(sq, [Window((0.2, 0.2), (0.8, 0.8)), Window((1.5, 1.5), (2.5, 2.5))], 3, RngStream(0))
    assert m == 0
    boxes = [Window((0, 0), (1, 1)), Window((2, 0), (3, 1))]
    m, ci = od.factorial_moment(gn.PoissonProcess(1.5), boxes, 4000, RngStream(1))
    half = (ci[1] - ci[0]) / 2
    assert abs(m - 2.25) < 3 * half / 1.96
    nb = gn.PerturbedLattice(gn.LatticeSpec("square"), gn.NegBinomial(2, 1 / 3))
    cells = [Window((-0.5, -0.5), (0, 0.5)), Window((0, -0.5), (0.5, 0.5))]
    m, ci = od.factorial_moment(nb, cells, 2000, RngStream(2))
    assert m >= 0.25 - 3 * (ci[1] - ci[0]) / 2 / 1.96
    with pytest.raises(ValueError):
        od.factorial_moment(gn.PoissonProcess(1.0), [Window((0, 0), (1, 1)), Window((0.5, 0.5), (2, 2))], 5,
                            RngStream(3))


CELL = Window((-0.5, -0.5), (0.5, 0.5))
HALVES = (Window((-0.5, -0.5), (0.0, 0.5)), Window((0.0, -0.5), (0.5, 0.5)))


def test_weak_poisson_report_poisson_inconclusive():
    rep = od.weak_poisson_report(gn.PoissonProcess(1.0), [CELL, HALVES[0]], 500, RngStream(0), [HALVES])
    assert all(f.label == "inconclusive" for f in rep)


def test_weak_poisson_report_sub_and_super():
    sq = gn.LatticeSpec("square")
    sub = od.weak_poisson_report(gn.PerturbedLattice(sq, gn.Binomial(2, 0.5)), [CELL], 500, RngStream(1), [HALVES])
    assert [f.label for f in sub] == ["sub", "sub"]
    sup = od.weak_poisson_report(gn.PerturbedLattice(sq, gn.Geometric(0.2)), [CELL], 500, RngStream(2), [HALVES])
    assert [f.label for f in sup] == ["super", "super"]


def test_second_difference_examples():
    bern = od.IntDistribution([0.5, 0.5])
    sq = lambda x: np.asarray(x, float) ** 2
    m, g, d2 = od.second_difference_convexity(sq, bern, 10, return_values=True)
    n = np.arange(-11, 12)
    pos = n >= 0
    assert np.allclose(g[pos], n[pos] / 4 + n[pos] ** 2 / 4, rtol=0, atol=1e-12)
    assert m == pytest.approx(0.5, abs=1e-12)
    lin = od.Ramp(0.0)
    xi = _dist(gn.Binomial(3, 0.4))
    _, g, d2 = od.second_difference_convexity(lin, xi, 10, return_values=True)
    assert np.allclose(g[11:], np.arange(0, 12) * 1.2, atol=1e-12)
    assert np.all(np.abs(d2[11:]) < 1e-12)
