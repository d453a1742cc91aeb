"""Genealogy-recording simulator for Crump-Mode-Jagers populations.

Individuals are reproduction records from :mod:`cmjlab.point_process`.  The
engine processes pending births in time order from a priority queue, assigns
chronological ids, and keeps the whole genealogy so that counted processes
``Z^phi(t)`` can be replayed exactly.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np

from . import streams
from .errors import OutOfRangeError, ParameterError, PreconditionError
from .point_process import (
    Characteristic,
    DegreeMarks,
    EdgeLife,
    Kind,
    ModelParams,
    eval_characteristic,
    sample_degree_marks,
    sample_edge_life,
    xi_at,
)

GENEALOGY_SCHEMA = "cmjlab.genealogy"
GENEALOGY_VERSION = 1

JUMPS = "jumps"
MARKS = "marks"


@dataclass(frozen=True)
class Individual:
    id: int
    parent: Optional[int]
    birth_time: float
    life: EdgeLife
    marks: Optional[DegreeMarks] = None
    event_index: Optional[int] = None  # which parent event produced this individual

    def offspring_per_event(self) -> tuple[int, ...]:
        if self.marks is not None:
            return self.marks.marks
        return self.life.jump_sizes


@dataclass
class PopulationPath:
    individuals: list[Individual]
    horizon: float
    event_budget: int
    exhausted_budget: bool
    complete_until: float
    seed: int = 0
    replica: int = 0
    ancestors: int = 1
    params: Optional[ModelParams] = None
    mortal: bool = True
    offspring: str = JUMPS
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.individuals)

    @cached_property
    def birth_times(self) -> np.ndarray:
        return np.array([ind.birth_time for ind in self.individuals], dtype=float)

    @cached_property
    def _death_times(self) -> np.ndarray:
        out = np.empty(len(self.individuals))
        for i, ind in enumerate(self.individuals):
            out[i] = np.inf if ind.life.truncated else ind.birth_time + ind.life.lifetime
        return out

    @cached_property
    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in self.individuals]
        for ind in self.individuals:
            if ind.parent is not None:
                kids[ind.parent].append(ind.id)
        return kids

    def to_json(self) -> str:
        doc = {
            "schema": GENEALOGY_SCHEMA,
            "version": GENEALOGY_VERSION,
            "horizon": self.horizon,
            "event_budget": self.event_budget,
            "exhausted_budget": self.exhausted_budget,
            "complete_until": self.complete_until,
            "seed": self.seed,
            "replica": self.replica,
            "ancestors": self.ancestors,
            "mortal": self.mortal,
            "offspring": self.offspring,
            "params": self.params.as_dict() if self.params else None,
            "individuals": [
                {
                    "id": ind.id,
                    "parent": ind.parent,
                    "birth_time": ind.birth_time,
                    "event_ages": list(ind.life.event_ages),
                    "jump_sizes": list(ind.life.jump_sizes),
                    "lifetime": ind.life.lifetime,
                    "truncated": ind.life.truncated,
                    **({"marks": list(ind.marks.marks)} if ind.marks is not None else {}),
                }
                for ind in self.individuals
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "PopulationPath":
        doc = json.loads(text)
        if doc.get("schema") != GENEALOGY_SCHEMA:
            raise ParameterError("not a cmjlab genealogy document")
        if doc.get("version") != GENEALOGY_VERSION:
            raise ParameterError(f"unsupported genealogy version {doc.get('version')!r}")
        inds = []
        for rec in doc["individuals"]:
            life = EdgeLife(
                tuple(rec["event_ages"]), tuple(rec["jump_sizes"]), rec["lifetime"], rec["truncated"]
            )
            marks = DegreeMarks(tuple(rec["marks"])) if "marks" in rec else None
            inds.append(Individual(rec["id"], rec["parent"], rec["birth_time"], life, marks))
        params = ModelParams(**doc["params"]) if doc.get("params") else None
        return cls(
            inds, doc["horizon"], doc["event_budget"], doc["exhausted_budget"],
            doc["complete_until"], doc["seed"], doc["replica"], doc["ancestors"],
            params, doc["mortal"], doc["offspring"],
        )


def run_cmj(
    params: ModelParams,
    ancestors: int,
    horizon: float,
    event_budget: int,
    seed: int,
    *,
    replica: int = 0,
    mortal: bool = True,
    offspring: str = JUMPS,
) -> PopulationPath:
    """Simulate a CMJ population started by ``ancestors`` individuals at time 0.

    With ``offspring="jumps"`` every birth event produces ``jump_size``
    children (the edge population of the collaboration model).  With
    ``offspring="marks"`` each event produces 0 or 1 child according to the
    individual's degree marks (the degree process of a fixed vertex).

    ``mortal=False`` switches the death hazard off, giving a pure-birth
    process with unit reproduction rate.

    If ``event_budget`` individuals are recorded while births before the
    horizon are still pending, the path is returned with
    ``exhausted_budget=True`` and ``complete_until`` set to the first
    unrecorded birth time: counts are exact only for ``t < complete_until``.
    """
    if not isinstance(params, ModelParams):
        raise ParameterError("params must be ModelParams")
    if int(ancestors) != ancestors or ancestors < 1:
        raise ParameterError(f"ancestors must be a positive integer, got {ancestors!r}")
    if not (horizon >= 0) or not np.isfinite(horizon):
        raise ParameterError(f"horizon must be finite and nonnegative, got {horizon!r}")
    if event_budget < ancestors:
        raise ParameterError("event_budget must be at least the number of ancestors")
    if offspring not in (JUMPS, MARKS):
        raise ParameterError(f"offspring must be {JUMPS!r} or {MARKS!r}")

    key = streams.replica_key(seed, replica)
    # (birth_time, parent id, event index, slot)
    pending: list[tuple[float, int, int, int]] = [(0.0, -1, a, 0) for a in range(ancestors)]
    individuals: list[Individual] = []
    exhausted = False
    complete_until = float(horizon)

    while pending:
        if len(individuals) >= event_budget:
            exhausted = True
            complete_until = pending[0][0]
            break
        t, parent, ev, _slot = heapq.heappop(pending)
        idx = len(individuals)
        life = sample_edge_life(params, horizon - t, streams.stream(key, idx), mortal=mortal)
        marks = None
        if offspring == MARKS:
            marks = sample_degree_marks(life, streams.stream(key, idx, streams.MARKS))
        ind = Individual(idx, None if parent < 0 else parent, t, life, marks, None if parent < 0 else ev)
        individuals.append(ind)
        for j, (age, n_kids) in enumerate(zip(life.event_ages, ind.offspring_per_event())):
            for slot in range(n_kids):
                heapq.heappush(pending, (min(t + age, horizon), idx, j, slot))

    return PopulationPath(
        individuals, float(horizon), int(event_budget), exhausted, complete_until,
        int(seed), int(replica), int(ancestors), params, mortal, offspring,
    )


def _check_time(path: PopulationPath, t: float) -> None:
    if t > path.horizon:
        raise OutOfRangeError(f"t={t} exceeds the simulated horizon {path.horizon}")
    if path.exhausted_budget and t >= path.complete_until:
        raise OutOfRangeError(
            f"budget exhausted: counts are only known for t < {path.complete_until}"
        )


def total_born(path: PopulationPath, t: float) -> int:
    """Number of individuals, dead or alive, born up to and including ``t``."""
    _check_time(path, t)
    if t < 0:
        return 0
    return int(np.searchsorted(path.birth_times, t, side="right"))


def z_phi(path: PopulationPath, char: Characteristic, t: float) -> float:
    """Counted process: sum of ``phi_i(t - tau_i)`` over individuals born by ``t``."""
    _check_time(path, t)
    if t < 0:
        return 0.0
    n = int(np.searchsorted(path.birth_times, t, side="right"))
    if char.kind is Kind.BORN:
        return float(n)
    if char.kind is Kind.ALIVE:
        return float(np.count_nonzero(path._death_times[:n] > t))
    return float(sum(eval_characteristic(char, ind.life, t - ind.birth_time)
                     for ind in path.individuals[:n]))


def z_phi_grid(path: PopulationPath, char: Characteristic, ts) -> np.ndarray:
    """``z_phi`` on an increasing grid (vectorized for BORN and ALIVE)."""
    ts = np.asarray(ts, dtype=float)
    for t in ts[-1:]:
        _check_time(path, float(t))
    if char.kind is Kind.BORN:
        return np.searchsorted(path.birth_times, ts, side="right").astype(float)
    if char.kind is Kind.ALIVE:
        born = np.searchsorted(path.birth_times, ts, side="right")
        deaths = np.sort(path._death_times)
        dead = np.searchsorted(deaths, ts, side="right")
        return (born - dead).astype(float)
    return np.array([z_phi(path, char, float(t)) for t in ts])


def _exact_phi(char: Characteristic, life: EdgeLife, age: Fraction) -> Fraction:
    if age < 0:
        return Fraction(0)
    if char.kind is Kind.BORN:
        return Fraction(1)
    if char.kind is Kind.ALIVE:
        lam = Fraction(life.lifetime)
        alive = age <= lam if life.truncated else age < lam
        return Fraction(int(alive))
    return Fraction(char.weight_at(float(age)))


def decompose_check(path: PopulationPath, char: Characteristic, t: float) -> bool:
    """Replay the self-similarity identity on a recorded single-ancestor path.

    The left side sums the characteristic over every individual.  The right
    side takes the ancestor's own term plus, for each of the ancestor's
    ``xi_0(t)`` children, the subtree process evaluated at the shifted time
    ``t - sigma_i`` with ages measured from the child's birth.  Arithmetic is
    exact (rationals built from the stored floats), so the identity is tested
    without tolerance.
    """
    if path.ancestors != 1:
        raise PreconditionError("decompose_check needs a single-ancestor path")
    _check_time(path, t)
    T = Fraction(t)
    inds = path.individuals
    lhs = sum((_exact_phi(char, ind.life, T - Fraction(ind.birth_time)) for ind in inds), Fraction(0))

    root = inds[0]
    rhs = _exact_phi(char, root.life, T)
    kids = [inds[k] for k in path.children[0]]
    sigma = sorted(Fraction(k.birth_time) - Fraction(root.birth_time) for k in kids)
    n_kids = xi_at(root.life, t) if path.offspring == JUMPS else sum(
        m for a, m in zip(root.life.event_ages, root.marks.marks) if a <= t
    )
    born_kids = [k for k in kids if Fraction(k.birth_time) <= T]
    if len(born_kids) != n_kids:
        return False
    if any(s <= 0 for s in sigma):
        return False
    children = path.children
    for kid in born_kids:
        s = T - Fraction(kid.birth_time)  # t - sigma_i
        origin = Fraction(kid.birth_time)
        stack = [kid.id]
        while stack:
            i = stack.pop()
            ind = inds[i]
            offset = Fraction(ind.birth_time) - origin
            rhs += _exact_phi(char, ind.life, s - offset)
            stack.extend(children[i])
    return lhs == rhs
