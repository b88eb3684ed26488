"""Estimate the critical radius of the Poisson Boolean model and place it
between the analytic bounds."""

from dcxperc import bounds as bd
from dcxperc import generators as gn
from dcxperc import percolation as pc
from dcxperc.core import RngStream, Window

LAM = 1.154701

est = pc.estimate_rc(gn.PoissonProcess(LAM), 0.4, 0.8, 200, rng=RngStream(1), window=Window.square(50.0), threads=4)
print(f"rc_hat      {est.value:.4f}  [{est.ci_lo:.4f}, {est.ci_hi:.4f}]")
print(f"lower bound {bd.rc_lower(LAM):.6f}")
print(f"upper bound {bd.rc_upper_tilde(LAM):.5f}")
