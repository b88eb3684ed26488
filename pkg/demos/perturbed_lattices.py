"""Crossing radii of perturbed hexagonal lattices: more variable replication
kernels cluster the germs and push the percolation threshold up."""

import numpy as np

from dcxperc import generators as gn
from dcxperc import percolation as pc
from dcxperc.core import RngStream, Window

hexl = gn.LatticeSpec("hexagonal")
curves = [("lattice", gn.LatticeProcess(hexl))]
curves += [(f"Bin({n},1/{n})", gn.PerturbedLattice(hexl, gn.Binomial(n, 1 / n))) for n in (1, 2, 5, 20)]
curves += [("Poisson(1)", gn.PerturbedLattice(hexl, gn.Poisson(1.0)))]
curves += [(f"NBin({n},1/{n + 1})", gn.PerturbedLattice(hexl, gn.NegBinomial(n, 1 / (1 + n)))) for n in (20, 5, 2, 1)]

grid = np.round(np.arange(0.45, 0.9001, 0.01), 10)
for name, proc in curves:
    rows = pc.sweep_r(proc, grid, 50, RngStream(0).derive(name), Window.square(30.0), threads=4)
    print(f"{name:<14} crossing radius {pc.crossing_radius(rows):.2f}")
