"""Growth rates, supercriticality and extinction for the collaboration model.

All quantities are built from the Laplace transform of the edge reproduction
measure,

    f(theta) = (1+p)/c * int_0^1 (1-u)^(a-1) exp(u(2-pu)/(2c)) du,
    a = (theta + 1 + b)/c,

which is strictly decreasing in ``theta``.  The edge Malthusian parameter
solves ``f(alpha) = 1``, the degree Malthusian parameter ``f(beta) = 2``,
and ``f(0)/2`` is the mean total degree reproduction ``E eta(inf)``.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate

from . import streams
from .errors import ConsistencyError, HorizonTooShortError, ParameterError, QuadratureError
from .point_process import ModelParams, sample_edge_life

DEFAULT_TOL = 1e-10
BISECT_MAXITER = 60
BISECT_XTOL = 1e-12
Z_SCAN_STEP = 1.0 / 64


class Regime(enum.Enum):
    NOT_SUPERCRITICAL = "not_supercritical"
    DEGREE_NOT_SUPERCRITICAL = "degree_not_supercritical"
    NO_ROOT_IN_UNIT = "no_root_in_unit"


NOT_SUPERCRITICAL = Regime.NOT_SUPERCRITICAL
DEGREE_NOT_SUPERCRITICAL = Regime.DEGREE_NOT_SUPERCRITICAL
NO_ROOT_IN_UNIT = Regime.NO_ROOT_IN_UNIT


def _beta_weight_integral(a: float, expo: Callable[[float], float], tol: float):
    """``int_0^1 (1-u)^(a-1) exp(expo(u)) du`` and the number of evaluations.

    For ``a < 1`` the endpoint singularity at ``u = 1`` is removed by
    ``u = 1 - v^(1/a)``, which turns the integral into
    ``(1/a) int_0^1 exp(expo(1 - v^(1/a))) dv`` with a bounded integrand.
    The integrand is evaluated relative to its largest value on a coarse
    grid so that steep exponentials (small ``c``) do not overflow; if the
    integral itself exceeds the float range, ``inf`` is returned.
    """
    if a < 1.0:
        inv = 1.0 / a

        def log_integrand(v):
            return expo(1.0 - v ** inv)

        scale = inv
    else:
        am1 = a - 1.0

        def log_integrand(u):
            if u >= 1.0:
                return expo(1.0) if am1 == 0.0 else -math.inf
            return am1 * math.log1p(-u) + expo(u)

        scale = 1.0
    shift = max(log_integrand(x) for x in np.linspace(0.0, 1.0, 257))
    if shift > 700.0:
        return math.inf, 0
    factor = scale * math.exp(shift)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr, info = integrate.quad(
                lambda x: math.exp(log_integrand(x) - shift), 0.0, 1.0,
                epsabs=tol / factor, epsrel=1e-13, limit=200, full_output=1,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(
                f"quadrature did not converge for a={a}", {"a": a, "tol": tol, "detail": str(exc)}
            ) from None
    value *= factor
    abserr *= factor
    if not math.isfinite(value) or abserr > max(10 * tol, 1e-11 * value):
        raise QuadratureError(
            f"quadrature error estimate {abserr} exceeds tolerance", {"a": a, "abserr": abserr}
        )
    return value, info["neval"]


def _laplace(theta: float, params: ModelParams, tol: float):
    b, c, p = params.b, params.c, params.p
    a = (theta + 1.0 + b) / c
    pref = (1.0 + p) / c
    val, neval = _beta_weight_integral(a, lambda u: u * (2.0 - p * u) / (2.0 * c), tol / pref)
    return pref * val, neval


def laplace_mu(theta: float, params: ModelParams, tol: float = DEFAULT_TOL) -> float:
    """Laplace transform of the edge reproduction measure at ``theta >= 0``."""
    if not (theta >= 0) or not math.isfinite(theta):
        raise ParameterError(f"theta must be finite and nonnegative, got {theta!r}")
    return _laplace(theta, params, tol)[0]


def laplace_envelope(theta: float, params: ModelParams) -> tuple[float, float]:
    """Closed-form lower/upper bounds on ``laplace_mu(theta)``."""
    b, c, p = params.b, params.c, params.p
    base = (1.0 + p) / (theta + 1.0 + b)
    expo = (2.0 - p) / (2.0 * c)
    return base, base * math.exp(expo) if expo < 700.0 else math.inf


def bisect_decreasing(fn: Callable[[float], float], target: float, lo: float, hi: float,
                      xtol: float = BISECT_XTOL, maxiter: int = BISECT_MAXITER) -> float:
    """Root of ``fn(x) = target`` for a decreasing ``fn`` bracketed by ``[lo, hi]``."""
    for _ in range(maxiter):
        if hi - lo <= xtol:
            break
        mid = 0.5 * (lo + hi)
        if fn(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _solve_level(params: ModelParams, target: float, tol: float) -> Optional[float]:
    f = lambda th: laplace_mu(th, params, tol)
    if f(0.0) <= target:
        return None
    b, c, p = params.b, params.c, params.p
    # upper envelope < target beyond this point
    log_env = math.log1p(p) + (2.0 - p) / (2.0 * c) - math.log(target)
    cap = math.exp(log_env) - 1.0 - b if log_env < 700.0 else math.inf
    hi = 1.0
    while f(hi) >= target:
        if hi > cap:
            raise ConsistencyError("bracket search passed the envelope bound")
        hi *= 2.0
    return bisect_decreasing(f, target, 0.0, hi)


def solve_alpha(params: ModelParams, tol: float = DEFAULT_TOL) -> Union[float, Regime]:
    """Edge Malthusian parameter, or ``NOT_SUPERCRITICAL`` when ``f(0) <= 1``."""
    root = _solve_level(params, 1.0, tol)
    return NOT_SUPERCRITICAL if root is None else root


def solve_beta(params: ModelParams, tol: float = DEFAULT_TOL) -> Union[float, Regime]:
    """Degree Malthusian parameter, or ``DEGREE_NOT_SUPERCRITICAL`` when ``E eta(inf) <= 1``."""
    root = _solve_level(params, 2.0, tol)
    return DEGREE_NOT_SUPERCRITICAL if root is None else root


def degree_mean(params: ModelParams, tol: float = DEFAULT_TOL) -> float:
    """Mean total degree reproduction ``E eta(inf)`` of a vertex's incident edge."""
    b, c, p = params.b, params.c, params.p
    a = (1.0 + b) / c
    pref = (1.0 + p) / (2.0 * c)
    val, _ = _beta_weight_integral(a, lambda u: u * (2.0 - p * u) / (2.0 * c), tol / pref)
    out = pref * val
    if abs(out - 0.5 * laplace_mu(0.0, params, tol)) > 10 * tol:
        raise ConsistencyError("E eta(inf) differs from f(0)/2")
    return out


def extinction_g(z: float, params: ModelParams, tol: float = DEFAULT_TOL) -> float:
    """Left side of the single-edge degree extinction equation ``g(z) = 1``.

        g(z) = (1+p)/(2c) int_0^1 (1-u)^((1+b)/c - 1)
                                  exp(u (q + (1+p) z - p z u) / (2c)) du

    ``E z^eta(inf) = z`` with the trivial root ``z = 1`` divided out; ``g``
    is strictly increasing in ``z``, ``g(1) = E eta(inf)`` and
    ``1 - g(0) = P(eta(inf) = 0)``.
    """
    b, c, p = params.b, params.c, params.p
    q = 1.0 - p
    a = (1.0 + b) / c
    pref = (1.0 + p) / (2.0 * c)
    expo = lambda u: u * (q + (1.0 + p) * z - p * z * u) / (2.0 * c)
    return pref * _beta_weight_integral(a, expo, tol / pref)[0]


def solve_extinction_z(params: ModelParams, tol: float = DEFAULT_TOL) -> Union[float, Regime]:
    """Extinction probability of a degree process started by one edge.

    Scans ``(0, 1]`` in steps of 1/64 for the first sign change of
    ``g - 1`` and bisects.  Returns ``NO_ROOT_IN_UNIT`` when ``g(1) <= 1``,
    i.e. when the degree process is not supercritical and extinction is
    certain.
    """
    g = lambda z: extinction_g(z, params, tol)
    lo = 0.0
    if g(lo) >= 1.0:
        raise ConsistencyError("g(0) >= 1 contradicts P(eta(inf) = 0) > 0")
    n = round(1.0 / Z_SCAN_STEP)
    for i in range(1, n + 1):
        hi = i * Z_SCAN_STEP
        if g(hi) >= 1.0:
            if hi == 1.0 and g(hi) == 1.0:
                return NO_ROOT_IN_UNIT
            return bisect_decreasing(lambda z: -g(z), -1.0, lo, hi)
        lo = hi
    return NO_ROOT_IN_UNIT


def extinction_probability(params: ModelParams, tol: float = DEFAULT_TOL) -> float:
    """Probability that a newborn vertex eventually becomes isolated."""
    z = solve_extinction_z(params, tol)
    if z is NO_ROOT_IN_UNIT:
        return 1.0
    return params.p * z * z + params.q * z


def discount_m(params: ModelParams, k: float, alpha: float, tol: float = DEFAULT_TOL,
               *, allow_degenerate: bool = False) -> float:
    """Discount factor ``m = f(k * alpha)``; below 1 for ``k > 1``."""
    if not k >= 1:
        raise ParameterError(f"k must be >= 1, got {k!r}")
    if abs(laplace_mu(alpha, params, tol) - 1.0) > max(1e-6, 100 * tol):
        raise ConsistencyError(f"alpha={alpha} does not solve f(alpha) = 1")
    m = laplace_mu(k * alpha, params, tol)
    if k == 1:
        if not allow_degenerate:
            raise ParameterError("k = 1 gives m = 1; pass allow_degenerate=True to evaluate it")
        return m
    if m >= 1.0:
        raise ConsistencyError(f"m = {m} >= 1 for k = {k}")
    return m


def discounted_reproduction_samples(params: ModelParams, theta: float, n: int, seed: int,
                                    horizon: Optional[float] = None) -> np.ndarray:
    """``sum_j jump_j exp(-theta sigma_j)`` for ``n`` independent edge lives."""
    if horizon is None:
        horizon = 40.0 / theta if theta > 0 else 1e3
    rng = streams.replica_rng(seed)
    out = np.empty(n)
    n_trunc = 0
    for i in range(n):
        life = sample_edge_life(params, horizon, rng)
        n_trunc += life.truncated
        out[i] = sum(j * math.exp(-theta * s) for j, s in zip(life.jump_sizes, life.event_ages))
    if n_trunc:
        est = max(out.mean(), 1e-300)
        if math.exp(-theta * horizon) > 1e-12 * est:
            raise HorizonTooShortError(
                f"{n_trunc} lives truncated at horizon {horizon}; tail weight "
                f"exp(-theta*horizon)={math.exp(-theta * horizon):.3g} is not negligible"
            )
    return out


def mc_discounted_reproduction(params: ModelParams, theta: float, n: int, seed: int,
                               horizon: Optional[float] = None) -> tuple[float, float]:
    """Monte Carlo mean of the discounted offspring count and its standard error."""
    if n < 100:
        raise ParameterError("mc_discounted_reproduction needs n >= 100")
    if not theta > 0:
        raise ParameterError("theta must be positive")
    x = discounted_reproduction_samples(params, theta, n, seed, horizon)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n))


@dataclass
class SolveReport:
    params: dict
    alpha: Optional[float]
    beta: Optional[float]
    eta_mean: float
    z: Optional[float]
    extinction_prob_degree: float
    m_k: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    regime: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    quadrature_nodes: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2, ensure_ascii=False)


def solve_report(params: ModelParams, ks=(2,), tol: float = DEFAULT_TOL) -> SolveReport:
    """Solve every scalar equation of the model and collect residuals."""
    alpha = solve_alpha(params, tol)
    beta = solve_beta(params, tol)
    z = solve_extinction_z(params, tol)
    eta = degree_mean(params, tol)
    a = None if isinstance(alpha, Regime) else alpha
    bt = None if isinstance(beta, Regime) else beta
    zz = None if isinstance(z, Regime) else z
    residuals, nodes, m_k = {}, {}, {}
    f0, nodes["f(0)"] = _laplace(0.0, params, tol)
    if a is not None:
        fa, nodes["f(alpha)"] = _laplace(a, params, tol)
        residuals["f(alpha)-1"] = fa - 1.0
        for k in ks:
            m_k[str(k)] = discount_m(params, k, a, tol)
    if bt is not None:
        fb, nodes["f(beta)"] = _laplace(bt, params, tol)
        residuals["f(beta)-2"] = fb - 2.0
    if zz is not None:
        residuals["g(z)-1"] = extinction_g(zz, params, tol) - 1.0
    return SolveReport(
        params=params.as_dict(),
        alpha=a,
        beta=bt,
        eta_mean=eta,
        z=zz,
        extinction_prob_degree=extinction_probability(params, tol),
        m_k=m_k,
        residuals=residuals,
        regime={
            "edge_supercritical": a is not None,
            "degree_supercritical": bt is not None,
            "z_status": "root" if zz is not None else NO_ROOT_IN_UNIT.value,
        },
        tolerances={"quadrature_abs": tol, "bisection_xtol": BISECT_XTOL,
                    "bisection_maxiter": BISECT_MAXITER, "z_scan_step": Z_SCAN_STEP},
        quadrature_nodes=nodes,
    )
