"""
Bounding the second moment of the edge count
============================================

The normalized count exp(-alpha t) T(t) has a bounded L_k norm.  The bound
is built from a few Monte Carlo constants (A, B, m and the lower-order
bounds C_1, ..., C_{k-1}).  Here the measured L_2 series is compared with
the bound.
"""

import numpy as np

from cmjlab import Characteristic, ModelParams, bound_report, lk_series, solve_alpha
from cmjlab.moment_lab import series_from_samples

params = ModelParams(0.1, 0.1, 0.5)
alpha = solve_alpha(params)
grid = np.linspace(0.0, 5.0, 11)
series = lk_series(params, Characteristic.born(), 2, alpha, grid, 200, seed=3, threads=4)
first = series_from_samples(series.samples, 1, alpha, grid)
rep = bound_report(params, Characteristic.born(), 2, first, 10_000, seed=4, alpha=alpha)

print(f"A = {rep.A:.4f}, B = {rep.B:.4f}, m = {rep.m:.4f}, C = {[round(c, 4) for c in rep.C]}")
print(f"bound on the L_2 norm: {rep.norm_bound:.4f}\n")
print("   t    L_1     L_2      SE")
for t, e1, e2, s in zip(grid, first.estimates, series.estimates, series.se):
    print(f"{t:4.1f} {e1:6.3f} {e2:7.3f} {s:7.3f}")

# The L_1 column converges quickly; the L_2 column stays well below the bound.
slope, se, ci = first.tail_slope()
print(f"\ntail slope of L_1: {slope:+.4f}, 95% CI [{ci[0]:+.4f}, {ci[1]:+.4f}]")
