import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmjlab.errors import ConsistencyError, ParameterError, PreconditionError, ReliabilityError
from cmjlab.malthus_solver import solve_alpha
from cmjlab.moment_lab import (
    ck_bound,
    corollary_conditions,
    delta_report,
    estimate_A,
    estimate_B,
    lk_norm,
    lk_series,
    renewal_iterate,
    rho_max,
    series_from_samples,
)
from cmjlab.point_process import Characteristic, ModelParams

P = ModelParams(0.1, 0.1, 0.5)
ALPHA = 1.3134226204133483


def test_lk_norm():
    x = np.array([1.0, 3.0])
    est, se = lk_norm(x, 2)
    assert est == pytest.approx(math.sqrt(5.0))
    assert se > 0
    assert lk_norm(np.zeros(5), 3) == (0.0, 0.0)
    with pytest.raises(ParameterError):
        lk_norm(np.ones(1), 2)


@pytest.mark.parametrize("m,gamma,mu,M0,n_iters,limit", [
    (0.5, 1.0, [1.0], np.zeros(50), 60, 2.0),
    (0.5, 1.0, [0.0, 1.0], np.zeros(100), 60, 2.0),
    (0.5, 1.0, [0.2, 0.3, 0.5], np.zeros(400), 400, 2.0),
    (0.9, 0.1, [0.0, 1.0], np.zeros(400), 400, 1.0),
    (0.3, 2.0, np.full(10, 0.1), np.zeros(300), 400, 2.0 / 0.7),
])
def test_renewal_iterate_converges(m, gamma, mu, M0, n_iters, limit):
    M, sup, hist = renewal_iterate(m, gamma, mu, M0, n_iters)
    assert abs(sup - limit) < 1e-9 and sup <= limit + 1e-9
    assert all(b >= a - 1e-15 for a, b in zip(hist, hist[1:]))  # monotone from below


def test_renewal_fixed_point_and_validation():
    M0 = np.full(20, 2.0)
    M, sup, _ = renewal_iterate(0.5, 1.0, [1.0], M0, 10)
    assert np.allclose(M, 2.0, atol=1e-15)
    with pytest.raises(ParameterError):
        renewal_iterate(0.5, 1.0, [0.5, 0.4], M0, 10)
    with pytest.raises(ParameterError):
        renewal_iterate(1.0, 1.0, [1.0], M0, 10)


def test_renewal_detects_blowup():
    # a negative slack puts the ceiling below the first iterate
    with pytest.raises(ConsistencyError):
        renewal_iterate(0.5, 1.0, [1.0], np.zeros(5), 5, slack=-1.5)
    with pytest.raises(ParameterError):
        renewal_iterate(0.5, 1.0, [1.0], np.full(5, np.inf), 5)


def test_rho_max_examples():
    assert rho_max(3, 2, [1.0, 1.0]) == 1.0
    assert rho_max(3, 2, [2.0, 5.0]) == 5.0
    assert rho_max(4, 3, [2.0, 3.0, 10.0]) == 10.0
    assert rho_max(4, 4, [2.0, 3.0, 1.0]) == 16.0  # 1+1+1+1 beats 2+2 = 9
    with pytest.raises(ParameterError):
        rho_max(3, 4, [1.0, 1.0])
    with pytest.raises(ParameterError):
        rho_max(3, 1, [])


def test_ck_bound_arithmetic():
    assert ck_bound(2, 0.4, 0.6, 0.5, [1.0]) == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        ck_bound(2, 1.0, 1.0, 1.0, [1.0])


@settings(max_examples=60, deadline=None)
@given(A=st.floats(0.1, 3), B=st.floats(0.1, 3), m=st.floats(0.0, 0.95), c1=st.floats(0.5, 3),
       c2=st.floats(0.5, 30), bump=st.floats(0.0, 1.0), which=st.integers(0, 4))
def test_ck_bound_monotone(A, B, m, c1, c2, bump, which):
    base = [A, B, m, c1, c2]
    more = list(base)
    more[which] += bump * (0.04 if which == 2 else 1.0)
    f = lambda a, b, mm, x, y: ck_bound(3, a, b, mm, [x, y])
    assert f(*more) >= f(*base) * (1 - 1e-12)


def test_estimate_B_cases():
    grid = np.linspace(0, 4, 41)
    assert estimate_B(Characteristic.born(), P, 2, ALPHA, grid, 2000, 1) == (1.0, 0.0)
    b_alive, _ = estimate_B(Characteristic.alive(), P, 2, ALPHA, grid, 2000, 1)
    assert b_alive == 1.0  # attained at t = 0 where every edge is alive
    w = Characteristic.weighted([0.0, 1.0], [2.5])
    assert estimate_B(w, P, 2, ALPHA, grid, 2000, 1)[0] == 2.5


def test_estimate_A_properties():
    a1, s1 = estimate_A(P, 1, ALPHA, 20000, seed=3)
    assert abs(a1 - 1.0) < 3 * s1
    a2, s2 = estimate_A(P, 2, ALPHA, 20000, seed=3)
    assert a2 >= a1  # same samples: power-mean inequality is exact
    q0 = ModelParams(0.1, 0.1, 0.0)
    q1 = ModelParams(0.1, 0.1, 1.0)
    lo, slo = estimate_A(q0, 2, solve_alpha(q1), 20000, seed=4)
    hi, shi = estimate_A(q1, 2, solve_alpha(q1), 20000, seed=4)
    assert hi - lo > 3 * math.hypot(slo, shi)
    with pytest.raises(ParameterError):
        estimate_A(P, 2, ALPHA, 10, seed=1)


def test_lk_series_basics():
    grid = np.linspace(0.0, 2.0, 5)
    s = lk_series(P, Characteristic.born(), 2, ALPHA, grid, 120, seed=1)
    assert s.estimates[0] == 1.0 and s.se[0] == 0.0
    assert all(e >= 0 for e in s.estimates) and all(x >= 0 for x in s.se)
    s1 = series_from_samples(s.samples, 1, ALPHA, grid)
    assert all(a <= b + 1e-12 for a, b in zip(s1.estimates, s.estimates))
    again = lk_series(P, Characteristic.born(), 2, ALPHA, grid, 120, seed=1, threads=3)
    assert again.estimates == s.estimates
    with pytest.raises(ParameterError):
        lk_series(P, Characteristic.born(), 2, ALPHA, grid, 50, seed=1)
    with pytest.raises(ParameterError):
        lk_series(P, Characteristic.born(), 0.5, ALPHA, grid, 120, seed=1)


def test_lk_series_reliability():
    with pytest.raises(ReliabilityError):
        lk_series(P, Characteristic.born(), 1, ALPHA, [0.0, 5.0], 100, seed=1, event_budget=20)


def test_corollary_conditions():
    rep = corollary_conditions(P, Characteristic.alive(), 2, 4, 20000, seed=5)
    assert rep.xi0_norm_k == 0.0
    assert rep.sup_phi_norm <= 1.0 and rep.B_k <= 1.0
    assert rep.first_set_holds and rep.second_set_holds
    assert rep.A_p >= rep.A_k


def test_delta_report_small():
    rep = delta_report(P, [1.5, 2.5], 100, 3, seed=2)
    assert all(all(row) for row in rep.identity_holds)
    assert rep.max_float_gap < 1e-12
    assert len(rep.distance) == 2
    with pytest.raises(PreconditionError, match="alpha/beta"):
        delta_report(P, [1.5, 2.5], 100, 2, seed=2)
    with pytest.raises(PreconditionError):
        delta_report(ModelParams(1, 1, 0.5), [1.5, 2.5], 100, 3, seed=2)
