"""
Growth rates of the collaboration graph
=======================================

Every edge of the graph is an individual of a Crump-Mode-Jagers population.
The edge count grows like exp(alpha t) and a typical degree like exp(beta t),
where alpha and beta solve f(theta) = 1 and f(theta) = 2 for the Laplace
transform f of the mean reproduction measure.
"""

import numpy as np

from cmjlab import ModelParams, laplace_mu, solve_alpha, solve_beta, solve_report
from cmjlab.malthus_solver import Regime, mc_discounted_reproduction

# One parameter set in detail.  b is the base death rate, c the extra death
# rate per offspring and p the chance that a birth adds two new edges.
params = ModelParams(b=0.1, c=0.1, p=0.5)
report = solve_report(params, ks=(2, 3))
print(f"alpha = {report.alpha:.6f}, beta = {report.beta:.6f}, alpha/beta = {report.alpha / report.beta:.3f}")
print(f"f(alpha) - 1 = {laplace_mu(report.alpha, params) - 1:.1e}")
print(f"m_2 = {report.m_k['2']:.4f}, m_3 = {report.m_k['3']:.4f}")
print(f"probability a newborn vertex ends isolated: {report.extinction_prob_degree:.4f}")

# The root can be checked by simulation: the offspring of one edge,
# discounted at rate alpha, has mean exactly 1.
mean, se = mc_discounted_reproduction(params, report.alpha, 50_000, seed=1)
print(f"Monte Carlo discounted reproduction: {mean:.4f} +/- {se:.4f}")

# Sweeping the base death rate shows where the graph stops growing.
print("\n   b     alpha      beta")
for b in np.linspace(0.1, 2.0, 8):
    p = ModelParams(b, 0.1, 0.5)
    a, be = solve_alpha(p), solve_beta(p)
    fmt = lambda x: f"{x:9.5f}" if not isinstance(x, Regime) else f"{x.value:>9}"
    print(f"{b:5.2f} {fmt(a)} {fmt(be)}")
