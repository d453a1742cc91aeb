"""L_k moment estimation and the analytic moment bound for counted CMJ processes.

Estimators are plain empirical moments across replicas; standard errors use
the delta method for ``x -> x**(1/k)``.  The analytic side reproduces the
recursive constant

    C_k = rho_k (A + B)^k / (1 - m),

where ``A`` is the L_k norm of the discounted total reproduction, ``B`` the
discounted L_k size of the characteristic, ``m = f(k alpha)`` and ``rho_k``
the largest product of lower-order constants.  ``C_k`` bounds the k-th power
``(exp(-alpha t) ||Z(t)||_k)^k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import streams
from .cmj_engine import run_cmj, z_phi_grid
from .collab_graph import LIVING, degree_snapshots, run_collab
from .errors import (
    ConsistencyError,
    ParameterError,
    PreconditionError,
    ReliabilityError,
)
from .malthus_solver import (
    Regime,
    discount_m,
    discounted_reproduction_samples,
    solve_alpha,
    solve_beta,
)
from .point_process import Characteristic, Kind, ModelParams, sample_edge_life

MAX_EXCLUDED = 0.01


def lk_norm(x: np.ndarray, k: float) -> tuple[float, float]:
    """Empirical ``(E|X|^k)^(1/k)`` and its delta-method standard error."""
    x = np.abs(np.asarray(x, dtype=float))
    n = x.size
    if n < 2:
        raise ParameterError("need at least two samples")
    xk = x ** k
    mk = xk.mean()
    if mk == 0:
        return 0.0, 0.0
    se_mk = xk.std(ddof=1) / math.sqrt(n)
    return float(mk ** (1 / k)), float(mk ** (1 / k - 1) * se_mk / k)


@dataclass
class MomentSeries:
    k: float
    rate: float
    t_grid: list
    estimates: list
    se: list
    replicas: int
    excluded: int = 0
    seed: int = 0
    char: str = "born"
    samples: Optional[np.ndarray] = field(default=None, repr=False)  # replicas x grid, unscaled

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("samples")
        return d

    def csv_rows(self) -> list[dict]:
        return [{"t": t, "estimate": e, "se": s} for t, e, s in zip(self.t_grid, self.estimates, self.se)]

    def tail_slope(self, frac: float = 0.5, z: float = 1.96) -> tuple[float, float, tuple[float, float]]:
        """Slope of the normalized series over the last ``frac`` of the grid.

        Fitted per replica (replicas are independent) so the confidence
        interval is honest even though grid points share paths.  Valid for
        ``k = 1``, where the series is the replica mean.
        """
        if self.samples is None:
            raise ParameterError("series was built without per-replica samples")
        t = np.asarray(self.t_grid)
        sel = t >= t[0] + (1 - frac) * (t[-1] - t[0])
        tt = t[sel]
        y = self.samples[:, sel] * np.exp(-self.rate * tt)
        tc = tt - tt.mean()
        slopes = (y - y.mean(1, keepdims=True)) @ tc / (tc @ tc)
        s = float(slopes.mean())
        se = float(slopes.std(ddof=1) / math.sqrt(len(slopes)))
        return s, se, (s - z * se, s + z * se)


def series_from_samples(vals: np.ndarray, k, rate, grid, **kw) -> MomentSeries:
    """Normalized L_k series from per-replica values of shape (replicas, grid)."""
    est, se = [], []
    for j, t in enumerate(grid):
        e, s = lk_norm(vals[:, j], k)
        w = math.exp(-rate * t)
        est.append(w * e)
        se.append(w * s)
    return MomentSeries(k, rate, list(map(float, grid)), est, se, vals.shape[0], samples=vals, **kw)


def lk_series(params: ModelParams, char: Characteristic, k: float, rate: float,
              t_grid: Sequence[float], replicas: int, seed: int, *,
              event_budget: int = 10**6, ancestors: int = 1, threads: int = 1) -> MomentSeries:
    """``exp(-rate t) ||Z^phi(t)||_k`` on a grid, across independent replicas.

    Replicas that exhaust the event budget are excluded; more than 1 %
    excluded raises :class:`ReliabilityError`.
    """
    if replicas < 100:
        raise ParameterError("lk_series needs at least 100 replicas")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    grid = np.asarray(t_grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ParameterError("t_grid must be nonnegative and strictly increasing")
    horizon = float(grid[-1])

    def one(r):
        path = run_cmj(params, ancestors, horizon, event_budget, seed, replica=r)
        if path.exhausted_budget:
            return None
        return z_phi_grid(path, char, grid)

    rows = streams.fan_out(one, range(replicas), threads)
    kept = [x for x in rows if x is not None]
    excluded = replicas - len(kept)
    if excluded > MAX_EXCLUDED * replicas:
        raise ReliabilityError(f"{excluded} of {replicas} replicas exhausted the event budget")
    return series_from_samples(np.array(kept), k, rate, grid, excluded=excluded, seed=seed,
                                char=char.kind.value)


def estimate_A(params: ModelParams, k: float, alpha: float, n: int, seed: int) -> tuple[float, float]:
    """L_k norm of the alpha-discounted total reproduction of one edge."""
    if n < 1000:
        raise ParameterError("estimate_A needs n >= 1000")
    return lk_norm(discounted_reproduction_samples(params, alpha, n, seed), k)


def estimate_B(char: Characteristic, params: ModelParams, k: float, rate: float,
               t_grid: Sequence[float], n: int, seed: int) -> tuple[float, float]:
    """``max_t exp(-rate t) ||phi(t)||_k`` over the grid, with the SE at the maximizer."""
    grid = np.asarray(t_grid, dtype=float)
    if char.kind is Kind.BORN:
        w = np.exp(-rate * grid) * (grid >= 0)
        return float(w.max()), 0.0
    if char.kind is Kind.WEIGHTED:
        w = np.exp(-rate * grid) * np.array([char.weight_at(t) for t in grid])
        return float(w.max()), 0.0
    rng = streams.replica_rng(seed)
    horizon = float(grid.max())
    lives = [sample_edge_life(params, horizon, rng) for _ in range(n)]
    lam = np.array([life.lifetime for life in lives])[:, None]
    trunc = np.array([life.truncated for life in lives])[:, None]
    alive = ((grid < lam) | (trunc & (grid <= lam))).astype(float)
    best, best_se = -1.0, 0.0
    for j, t in enumerate(grid):
        e, s = lk_norm(alive[:, j], k) if t >= 0 else (0.0, 0.0)
        w = math.exp(-rate * t)
        if w * e > best:
            best, best_se = w * e, w * s
    return best, best_se


def _partitions(h: int, largest: int):
    """Partitions of ``h`` into parts of size at most ``largest`` (nonincreasing)."""
    if h == 0:
        yield ()
        return
    for part in range(min(h, largest), 0, -1):
        for rest in _partitions(h - part, part):
            yield (part,) + rest


def rho_max(k: int, h: int, C: Sequence[float]) -> float:
    """Largest ``prod C_i^nu_i`` over ``sum i nu_i = h`` with parts ``i <= k-1``."""
    if k < 2 or k > 12:
        raise ParameterError("rho_max supports 2 <= k <= 12")
    if not 1 <= h <= k:
        raise ParameterError(f"h must lie in [1, k], got h={h}, k={k}")
    if len(C) < k - 1 or len(C) == 0:
        raise ParameterError(f"need C_1..C_{k - 1}")
    if any(not c > 0 for c in C[: k - 1]):
        raise ParameterError("all C_i must be positive")
    return max(math.prod(C[i - 1] for i in parts) for parts in _partitions(h, k - 1))


def ck_bound(k: int, A: float, B: float, m: float, C: Sequence[float]) -> float:
    """Moment constant ``rho (A+B)^k / (1-m)`` for order ``k >= 2``.

    ``rho`` is the maximum of :func:`rho_max` over every ``h`` in ``1..k``
    and never less than 1 (the term with no child factors carries no
    ``rho``).
    """
    if not m < 1:
        raise ParameterError(f"m must be < 1 for a finite bound, got {m}")
    rho = max([1.0] + [rho_max(k, h, C) for h in range(1, k + 1)])
    return rho * (A + B) ** k / (1.0 - m)


@dataclass
class BoundReport:
    k: int
    A: float
    A_se: float
    B: float
    B_se: float
    m: float
    C: list
    rho: float
    bound: float
    norm_bound: float
    alpha: float
    ingredients: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2, ensure_ascii=False)


def bound_report(params: ModelParams, char: Characteristic, k: int, k1_series: MomentSeries,
                 n: int, seed: int, alpha: Optional[float] = None, z: float = 3.0) -> BoundReport:
    """Build ``C_1..C_k`` and report the order-``k`` bound.

    ``C_1`` is the largest point of the measured ``k = 1`` series plus
    ``z`` standard errors.  Higher constants follow the recursion with
    ``A``, ``B`` and ``m`` estimated at each order.
    """
    if k < 2:
        raise ParameterError("bound_report needs k >= 2")
    if alpha is None:
        alpha = solve_alpha(params)
    if isinstance(alpha, Regime):
        raise PreconditionError("edge process is not supercritical")
    if k1_series.k != 1:
        raise ParameterError("C_1 must come from a k = 1 series")
    est = np.asarray(k1_series.estimates)
    se = np.asarray(k1_series.se)
    j = int(np.argmax(est + z * se))
    C = [float(est[j] + z * se[j])]
    xi_samples = discounted_reproduction_samples(params, alpha, n, seed)
    ingredients = {"C1_from_t": k1_series.t_grid[j]}
    for order in range(2, k + 1):
        A, A_se = lk_norm(xi_samples, order)
        B, B_se = estimate_B(char, params, order, alpha, k1_series.t_grid, n, seed + order)
        m = discount_m(params, order, alpha)
        C.append(ck_bound(order, A, B, m, C))
        ingredients[str(order)] = {"A": A, "A_se": A_se, "B": B, "B_se": B_se, "m": m}
    rho = max([1.0] + [rho_max(k, h, C) for h in range(1, k + 1)])
    return BoundReport(k, A, A_se, B, B_se, m, C, rho, C[-1], C[-1] ** (1.0 / k), alpha, ingredients)


def renewal_iterate(m: float, gamma: float, mu_tilde: Sequence[float], M0: Sequence[float],
                    n_iters: int, slack: float = 1e-9) -> tuple[np.ndarray, float, list]:
    """Iterate ``M <- m (M * mu_tilde) + gamma`` with a causal discrete convolution.

    Returns the final iterate, its supremum and the supremum history.  The
    affine map never pushes the supremum above ``max(sup M0, gamma/(1-m))``;
    exceeding that (plus ``slack``) raises :class:`ConsistencyError`.
    """
    if not 0 < m < 1:
        raise ParameterError("m must lie in (0, 1)")
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    mu = np.asarray(mu_tilde, dtype=float)
    M = np.array(M0, dtype=float)
    if np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
        raise ParameterError("mu_tilde must be a probability vector")
    if mu.size > M.size:
        raise ParameterError("mu_tilde is longer than the grid")
    if not np.all(np.isfinite(M)):
        raise ParameterError("M0 must be bounded")
    ceiling = max(float(M.max()), gamma / (1.0 - m)) + slack
    history = [float(M.max())]
    n = M.size
    for _ in range(n_iters):
        conv = np.convolve(M, mu)[:n]
        M = m * conv + gamma
        sup = float(M.max())
        if sup > ceiling:
            raise ConsistencyError(f"iterate supremum {sup} exceeds {ceiling}")
        history.append(sup)
    return M, history[-1], history


@dataclass
class CorollaryReport:
    k: float
    p_exp: float
    xi0_norm_k: float
    xi0_norm_p: float
    A_k: float
    A_k_se: float
    A_p: float
    A_p_se: float
    sup_phi_norm: float
    B_k: float
    B_k_se: float
    first_set_holds: bool
    second_set_holds: bool
    rel_se_max: float

    def to_dict(self):
        return asdict(self)


def corollary_conditions(params: ModelParams, char: Characteristic, k: float, p_exp: float,
                         n: int, seed: int, t_grid: Optional[Sequence[float]] = None,
                         rel_se_max: float = 0.05) -> CorollaryReport:
    """Check both sufficient condition sets for uniform L_k boundedness.

    ``xi(0)`` is identically 0 here: a unit-rate Poisson process has no
    event at time 0.  Finiteness of a moment is reported as holding when the
    Monte Carlo estimate is finite with relative SE below ``rel_se_max``.
    """
    if n < 1000:
        raise ParameterError("corollary_conditions needs n >= 1000")
    if not p_exp > k:
        raise ParameterError("p_exp must exceed k")
    alpha = solve_alpha(params)
    if isinstance(alpha, Regime):
        raise PreconditionError("edge process is not supercritical")
    xs = discounted_reproduction_samples(params, alpha, n, seed)
    A_k, A_k_se = lk_norm(xs, k)
    A_p, A_p_se = lk_norm(xs, p_exp)
    grid = np.linspace(0.0, 10.0 / alpha, 201) if t_grid is None else np.asarray(t_grid, float)
    B_k, B_k_se = estimate_B(char, params, k, alpha, grid, n, seed + 1)
    if char.kind is Kind.WEIGHTED:
        sup_phi = max(math.exp(-alpha * t) * w for t, w in zip(char.breaks, char.weights))
    else:
        sup_phi = 1.0  # indicator characteristics peak at age 0
    xi0 = 0.0

    def finite(est, se):
        return math.isfinite(est) and (est == 0 or se / est < rel_se_max)

    first = xi0 < 1 and finite(A_k, A_k_se) and math.isfinite(sup_phi)
    second = xi0 < 1 and finite(A_p, A_p_se) and finite(B_k, B_k_se)
    return CorollaryReport(k, p_exp, xi0, xi0, A_k, A_k_se, A_p, A_p_se, sup_phi, B_k, B_k_se,
                           bool(first), bool(second), rel_se_max)


@dataclass
class DeltaReport:
    params: dict
    k: float
    alpha: float
    beta: float
    horizons: list
    replicas: int
    scaled_max: list  # per replica, per horizon: exp(-beta T) M(T)
    delta_hat: list  # per replica, per horizon
    identity_holds: list  # per replica, per horizon
    max_float_gap: float
    distance: list  # per horizon: L_k distance to delta_hat at the last horizon
    distance_se: list
    trend_z: float
    trend_decreasing: bool
    # the distance at the last horizon is 0 by construction, so the same
    # test is repeated against the second-to-last horizon
    inner_trend_z: float
    inner_trend_decreasing: bool
    liminf_proxy: list
    extinct: list
    exhausted: int
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2, ensure_ascii=False)


def _delta_replica(params, horizons, beta, event_budget, seed, r):
    horizons = np.asarray(horizons, dtype=float)
    g = run_collab(params, float(horizons[-1]), event_budget, seed, replica=r)
    if g.exhausted_budget:
        return None
    births = np.asarray(g.vertex_birth)
    snaps, maxima, argmax = degree_snapshots(g, horizons, LIVING)
    scaled, dhat, ident, gaps = [], [], [], []
    for T, deg, M, am in zip(horizons, snaps, maxima, argmax):
        n = int(np.searchsorted(births, T, side="right"))
        tau = births[:n]
        terms = np.exp(-beta * tau) * (np.exp(-beta * (T - tau)) * deg[:n])
        d = float(terms.max()) if n else 0.0
        # the maximizing vertex's own term is exp(-beta T) M(T)
        s = float(terms[am]) if am >= 0 else 0.0
        scaled.append(s)
        dhat.append(d)
        ident.append(d >= s)
        gaps.append(abs(s - math.exp(-beta * T) * int(M)))
    living = int(maxima[-1]) > 0
    return scaled, dhat, ident, max(gaps), not living


Z95 = 1.6448536269514722  # one-sided 95% normal quantile


def _paired_trend_z(scaled, target, k, j):
    """z statistic for E|S_0 - D|^k > E|S_j - D|^k from paired replicas."""
    diff = np.abs(scaled[:, 0] - target) ** k - np.abs(scaled[:, j] - target) ** k
    sd = diff.std(ddof=1)
    if sd > 0:
        return float(diff.mean() / (sd / math.sqrt(diff.size)))
    return 0.0


def delta_report(params: ModelParams, horizons: Sequence[float], replicas: int, k: float, seed: int,
                 *, event_budget: int = 10**6, threads: int = 1, tail_frac: float = 0.5) -> DeltaReport:
    """Maximal-degree convergence diagnostics at several horizons.

    Per replica and horizon ``T``: ``exp(-beta T) M(T)`` and the plug-in
    ``max_i exp(-beta tau_i) exp(-beta (T - tau_i)) D_i(T)``.  The L_k
    distance of the scaled maximum at each horizon to the plug-in at the last
    horizon is reported, with one-sided paired tests that the distance at
    the first horizon exceeds the one at the last and second-to-last.
    """
    if replicas < 100:
        raise ParameterError("delta_report needs at least 100 replicas")
    hz = np.asarray(horizons, dtype=float)
    if hz.size < 2 or np.any(np.diff(hz) <= 0):
        raise ParameterError("horizons must be increasing with at least two entries")
    alpha = solve_alpha(params)
    beta = solve_beta(params)
    if isinstance(alpha, Regime) or isinstance(beta, Regime):
        raise PreconditionError("both the edge and the degree process must be supercritical")
    if not k > alpha / beta:
        raise PreconditionError(f"k must exceed alpha/beta = {alpha / beta:.6g}")
    rows = streams.fan_out(lambda r: _delta_replica(params, hz, beta, event_budget, seed, r),
                           range(replicas), threads)
    kept = [x for x in rows if x is not None]
    exhausted = replicas - len(kept)
    if exhausted > MAX_EXCLUDED * replicas:
        raise ReliabilityError(f"{exhausted} of {replicas} replicas exhausted the event budget")
    scaled = np.array([x[0] for x in kept])
    dhat = np.array([x[1] for x in kept])
    ident = [x[2] for x in kept]
    gap = max(x[3] for x in kept)
    extinct = [x[4] for x in kept]
    target = dhat[:, -1]
    dist, dist_se = [], []
    for j in range(hz.size):
        d, s = lk_norm(scaled[:, j] - target, k)
        dist.append(d)
        dist_se.append(s)
    trend_z = _paired_trend_z(scaled, target, k, -1)
    inner_z = _paired_trend_z(scaled, target, k, -2)
    tail = hz >= hz[0] + (1 - tail_frac) * (hz[-1] - hz[0])
    liminf = scaled[:, tail].min(axis=1).tolist()
    return DeltaReport(
        params.as_dict(), k, alpha, beta, hz.tolist(), len(kept), scaled.tolist(), dhat.tolist(),
        ident, gap, dist, dist_se, trend_z, trend_z > Z95, inner_z, inner_z > Z95, liminf, extinct,
        exhausted, seed,
    )
