"""
Maximal degree of a growing graph
=================================

The largest degree M(t) grows at the same exponential rate beta as a single
vertex, so exp(-beta t) M(t) should settle down to a random limit.  Here a
few graphs are grown and the scaled maximum is followed in time.
"""

import numpy as np

from cmjlab import ModelParams, run_collab, solve_beta
from cmjlab.collab_graph import LIVING, degree_snapshots

params = ModelParams(0.1, 0.1, 0.5)
beta = solve_beta(params)
times = np.array([2.0, 3.0, 4.0, 5.0, 6.0, 7.0])

print("replica " + " ".join(f"T={t:<5g}" for t in times))
for r in range(6):
    g = run_collab(params, times[-1], 10**6, seed=2, replica=r)
    _, maxima, _ = degree_snapshots(g, times, LIVING)
    scaled = np.exp(-beta * times) * maxima
    print(f"{r:7d} " + " ".join(f"{s:7.3f}" for s in scaled))

# Rows that reach zero are graphs in which every edge has died.  The others
# fluctuate early and flatten out as T grows.
