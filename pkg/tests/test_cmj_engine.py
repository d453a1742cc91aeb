import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmjlab.cmj_engine import (
    MARKS,
    PopulationPath,
    decompose_check,
    run_cmj,
    total_born,
    z_phi,
    z_phi_grid,
)
from cmjlab.errors import OutOfRangeError, ParameterError, PreconditionError
from cmjlab.point_process import Characteristic, ModelParams, xi_at

P = ModelParams(0.1, 0.1, 0.5)
CHARS = [Characteristic.born(), Characteristic.alive(), Characteristic.weighted([0.0, 0.5, 2.0], [1.0, 3.0])]


def test_first_individual_is_the_ancestor():
    path = run_cmj(P, 1, 2.0, 10**5, seed=1)
    root = path.individuals[0]
    assert root.parent is None and root.birth_time == 0.0
    assert total_born(path, 0.0) == 1
    assert total_born(path, -1.0) == 0


@pytest.mark.parametrize("p,t", [(0.0, 1.0), (0.5, 1.0)])
def test_pure_birth_mean_is_exponential(p, t):
    # immortal individuals reproducing at rate 1 with mean jump 1+p: E T(t) = exp((1+p) t)
    params = ModelParams(0.1, 0.1, p)
    n = 2000
    vals = np.array([total_born(run_cmj(params, 1, t, 10**5, seed=3, replica=r, mortal=False), t)
                     for r in range(n)])
    se = vals.std(ddof=1) / math.sqrt(n)
    assert abs(vals.mean() - math.exp((1 + p) * t)) < 3 * se


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), t=st.floats(0.0, 3.0), char=st.sampled_from(CHARS),
       offspring=st.sampled_from(["jumps", "marks"]))
def test_self_similarity_exact(seed, t, char, offspring):
    path = run_cmj(P, 1, 3.0, 10**5, seed=seed, offspring=offspring)
    assert decompose_check(path, char, t)


def test_decompose_needs_single_ancestor():
    path = run_cmj(P, 2, 1.0, 1000, seed=0)
    with pytest.raises(PreconditionError):
        decompose_check(path, Characteristic.born(), 0.5)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_genealogy_consistency(seed):
    path = run_cmj(P, 1, 3.0, 10**5, seed=seed)
    births = path.birth_times
    assert np.all(np.diff(births) >= 0)  # chronological ids
    for ind in path.individuals[1:]:
        parent = path.individuals[ind.parent]
        age = ind.birth_time - parent.birth_time
        assert age > 0
        assert parent.life.event_ages[ind.event_index] == pytest.approx(age, abs=1e-12)
    # every individual produced exactly its recorded offspring within the horizon
    for i, ind in enumerate(path.individuals):
        assert len(path.children[i]) == xi_at(ind.life, path.horizon - ind.birth_time)


def test_grid_matches_pointwise():
    path = run_cmj(P, 1, 3.0, 10**5, seed=8)
    grid = np.linspace(0, 3, 13)
    for char in CHARS:
        assert np.array_equal(z_phi_grid(path, char, grid), [z_phi(path, char, t) for t in grid])
    alive = z_phi_grid(path, CHARS[1], grid)
    born = z_phi_grid(path, CHARS[0], grid)
    assert np.all(alive <= born)


def test_budget_exhaustion():
    path = run_cmj(P, 1, 8.0, 50, seed=2)
    assert path.exhausted_budget and len(path) == 50
    t_ok = np.nextafter(path.complete_until, 0)
    assert total_born(path, t_ok) <= 50
    with pytest.raises(OutOfRangeError):
        total_born(path, path.complete_until)
    with pytest.raises(OutOfRangeError):
        total_born(run_cmj(P, 1, 1.0, 10**4, seed=2), 1.5)


def test_same_seed_same_path_and_json_roundtrip():
    a = run_cmj(P, 2, 2.5, 10**5, seed=9, replica=4, offspring=MARKS)
    b = run_cmj(P, 2, 2.5, 10**5, seed=9, replica=4, offspring=MARKS)
    assert a.to_json() == b.to_json()
    assert run_cmj(P, 2, 2.5, 10**5, seed=9, replica=5).to_json() != a.to_json()
    back = PopulationPath.from_json(a.to_json())
    assert back.to_json() == a.to_json()
    assert z_phi(back, Characteristic.alive(), 2.0) == z_phi(a, Characteristic.alive(), 2.0)


@pytest.mark.parametrize("kw", [dict(ancestors=0), dict(horizon=-1.0), dict(horizon=math.inf),
                                dict(event_budget=0), dict(offspring="bogus")])
def test_validation(kw):
    args = dict(params=P, ancestors=1, horizon=1.0, event_budget=100, seed=0)
    args.update(kw)
    with pytest.raises(ParameterError):
        run_cmj(**args)
