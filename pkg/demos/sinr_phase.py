"""Spanning probability of the SINR graph as interference grows."""

from dcxperc import generators as gn
from dcxperc import shotnoise as sn
from dcxperc.core import RngStream

l = sn.PowerLaw(4.0)
params = sn.SinrParams(1.0, (1 + 2 * 0.7) ** -4, 1.0)
print(f"SNR radius {sn.snr_radius(params, l):.4f}")
rows = sn.sinr_sweep(gn.PoissonProcess(1.154701), params, l, [0, 1e-4, 1e-3, 1e-2, 1e-1, 1], 100, RngStream(0),
                     threads=4)
for row in rows:
    print(f"gamma={row.gamma:<8g} p_span={row.p_span:.2f}  [{row.ci_lo:.2f}, {row.ci_hi:.2f}]")
