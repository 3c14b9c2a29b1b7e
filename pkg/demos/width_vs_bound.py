"""Monte-Carlo Gaussian widths against their closed-form bounds.

The cone width grows with the rank and with the spectral ratio rho that
the k-support norm picks up from a decaying spectrum.

    python3 demos/width_vs_bound.py
"""

import numpy as np

from gdsmat import KSupport, L1, SpectralNorm, width_ball_bound, width_ball_mc, width_cone_bound, width_cone_mc

d = p = 12
rng = np.random.default_rng(0)

print(" r  norm       rho   cone mc  cone bound")
for r in (1, 2, 4):
    u, _ = np.linalg.qr(rng.standard_normal((d, r)))
    v, _ = np.linalg.qr(rng.standard_normal((p, r)))
    theta = (u * np.linspace(1.0, 0.4, r)) @ v.T
    for name, gauge in [("trace", L1(d)), ("ksupport", KSupport(d, r))]:
        dec = SpectralNorm(gauge, d, p).decompose(theta)
        est = width_cone_mc(dec, 4000, seed=r)
        print(f"{r:2d}  {name:9s} {dec.rho:5.2f}  {est.value:7.3f}  {width_cone_bound(d, p, r, dec.rho):10.3f}")

print()
print("unit-ball widths")
for gauge in (L1(d), KSupport(d, 3)):
    est = width_ball_mc(SpectralNorm(gauge, d, p), 4000, seed=0)
    bound = width_ball_bound(gauge.constants().nu, d, p)
    print(f"  {gauge!r:28s} mc {est.value:7.3f} +- {est.stderr:.3f}   bound {bound:7.3f}")
