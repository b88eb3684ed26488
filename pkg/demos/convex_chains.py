"""Exact convex-order checks along two chains of mean-2 counts."""

from dcxperc import generators as gn
from dcxperc import ordering as od

chains = [
    [gn.HyperGeometric(12, 6, 4), gn.Binomial(6, 1 / 3), gn.Binomial(12, 1 / 6), gn.Binomial(48, 1 / 24),
     gn.Poisson(2.0)],
    [gn.Poisson(2.0), gn.NegBinomial(4, 1 / 3), gn.NegBinomial(2, 1 / 2), gn.Geometric(1 / 3),
     gn.GeoMixture((0.5, 0.5), (0.5, 0.25))],
]
for chain in chains:
    dists = [od.IntDistribution.from_kernel(k, 200) for k in chain]
    for ka, a, kb, b in zip(chain, dists, chain[1:], dists[1:]):
        v = od.cx_order_check(a, b)
        print(f"{ka!r:<40} vs {kb!r:<40} {v.verdict:<14} max gap {v.max_gap:.3g}")
