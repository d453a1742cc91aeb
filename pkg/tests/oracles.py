"""Independent reference computations used by the tests.

Nothing here calls into the routines under test.  Each oracle takes a
different route to the same quantity: a fixed-panel Simpson rule instead of
adaptive quadrature, a dynamic program over the jump chain instead of the
closed-form integral, exact convolution instead of simulation, and literal
label rewriting instead of the node-based relabeller.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------------------
# Laplace transform of the reproduction measure


def simpson_beta_integral(a, expo, panels=10**6):
    """``int_0^1 (1-u)^(a-1) exp(expo(u)) du`` by composite Simpson.

    ``u = 1 - w^N`` with ``N a >= 5`` makes the integrand
    ``N w^(N a - 1) exp(expo(1 - w^N))`` smooth on [0, 1].
    """
    N = math.ceil(5.0 / a)
    w = np.linspace(0.0, 1.0, 2 * panels + 1)
    y = N * w ** (N * a - 1.0) * np.exp(expo(1.0 - w**N))
    h = 1.0 / (2 * panels)
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def laplace_simpson(theta, b, c, p, panels=10**6):
    a = (theta + 1.0 + b) / c
    return (1.0 + p) / c * simpson_beta_integral(a, lambda u: u * (2.0 - p * u) / (2.0 * c), panels)


def _xi_chain(b, c, p, theta, n_max, tol):
    """Yield ``E prod_{j<n} 1/(1+b+theta+c xi_j)`` for n = 1, 2, ...

    ``xi_j`` is the offspring count after ``j`` events; it moves up by 2
    (probability p) or 1 (probability q) at each event.
    """
    q = 1.0 - p
    size = 2 * n_max + 3
    mass = np.zeros(size)
    mass[0] = 1.0
    x = np.arange(size)
    rate = 1.0 / (1.0 + b + theta + c * x)
    for _ in range(n_max):
        mass = mass * rate
        yield float(mass.sum())
        if mass.sum() < tol:
            return
        nxt = np.zeros(size)
        nxt[1:] += q * mass[:-1]
        nxt[2:] += p * mass[:-2]
        mass = nxt


def laplace_series(theta, b, c, p, n_max=4000, tol=1e-18):
    """Laplace transform as ``(1+p) * sum_n P(n-th event, discounted)``."""
    return (1.0 + p) * math.fsum(_xi_chain(b, c, p, theta, n_max, tol))


def mean_events_series(b, c, p, n_max=4000, tol=1e-18):
    """``E pi(lambda)``: expected number of birth events over a whole life."""
    return math.fsum(_xi_chain(b, c, p, 0.0, n_max, tol))


def product_series(b, c, n_max=10**4):
    """``sum_{n>=1} prod_{j<n} 1/(1+b+cj)``; equals ``E pi(lambda)`` when p = 0."""
    total, term = 0.0, 1.0
    for n in range(1, n_max):
        term /= 1.0 + b + c * (n - 1)
        total += term
        if term < 1e-18:
            break
    return total


def bisect_root(fn, lo, hi, iters=200):
    """Root of an increasing or decreasing ``fn`` with a sign change on [lo, hi]."""
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# degree reproduction of one edge: exact law of eta(infinity)


def eta_distribution(b, c, p, n_max=400, tol=1e-17):
    """Distribution of the total degree marks of one edge life.

    State ``(xi, eta)``; at each step the life ends with probability
    ``(b + c xi)/(1 + b + c xi)``, otherwise an event adds jump 2 with mark 1
    (prob p), or jump 1 with mark 1 or 0 (prob q/2 each).
    """
    q = 1.0 - p
    X = 2 * n_max + 3
    E = n_max + 2
    mass = np.zeros((X, E))
    mass[0, 0] = 1.0
    xs = np.arange(X)[:, None]
    birth = 1.0 / (1.0 + b + c * xs)
    out = np.zeros(E)
    for _ in range(n_max):
        out += (mass * (1.0 - birth)).sum(axis=0)
        live = mass * birth
        if live.sum() < tol:
            break
        nxt = np.zeros_like(mass)
        nxt[2:, 1:] += p * live[:-2, :-1]
        nxt[1:, 1:] += 0.5 * q * live[:-1, :-1]
        nxt[1:, :] += 0.5 * q * live[:-1, :]
        mass = nxt
    return out


def degree_extinction_fixed_point(b, c, p):
    """Smallest root of ``E s^eta = s`` in [0, 1)."""
    dist = eta_distribution(b, c, p)
    k = np.arange(dist.size)
    G = lambda s: float(np.sum(dist * s**k)) - s
    return bisect_root(G, 0.0, 1.0 - 1e-9)


# ---------------------------------------------------------------------------
# Galton-Watson generation sizes


def gw_generation_distribution(pmf, n):
    """Exact law of ``G_n`` by repeated convolution of the offspring pmf."""
    pmf = np.asarray(pmf, dtype=float)
    dist = np.array([0.0, 1.0])  # G_0 = 1
    for _ in range(n):
        new = np.zeros((dist.size - 1) * (pmf.size - 1) + 1)
        power = np.array([1.0])  # law of a sum of j offspring counts
        for j, w in enumerate(dist):
            if j > 0:
                power = np.convolve(power, pmf)
            if w > 0:
                new[: power.size] += w * power
        dist = np.trim_zeros(new, "b")
    return dist


def gw_norm_exact(pmf, n, k):
    dist = gw_generation_distribution(pmf, n)
    return float(np.sum(dist * np.arange(dist.size, dtype=float) ** k)) ** (1.0 / k)


# ---------------------------------------------------------------------------
# relabelling by literal string rewriting


def literal_relabel(births, depth_cap):
    """Apply recoloring and compression as rewrites of the label strings."""
    b = dict(births)

    def red(lab):
        return len(lab) > 1 and b[lab] == b[lab[:-1]]

    while True:
        reds = sorted((lab for lab in b if len(lab) <= depth_cap and red(lab)),
                      key=lambda lab: (len(lab), lab))
        if not reds:
            return b
        A = reds[0]
        k = len(A)
        B, a = A[:-2], A[-2]
        target = 1 + max(x[-1] for x in b if len(x) == k - 1 and x[:-1] == B and b[x] == b[A])
        # shift (B, x), x >= target, one place up, with all their descendants
        b = {(lab[:k - 2] + (lab[k - 2] + 1,) + lab[k - 1:]
              if len(lab) >= k - 1 and lab[:k - 2] == B and lab[k - 2] >= target else lab): t
             for lab, t in b.items()}
        # A and its subtree become (B, target)
        b = {(B + (target,) + lab[k:] if lab[:k] == A else lab): t for lab, t in b.items()}
        # compress the remaining children of (B, a)
        b = {(B + (a, lab[k - 1] - 1) + lab[k:]
              if len(lab) >= k and lab[:k - 1] == B + (a,) else lab): t
             for lab, t in b.items()}
