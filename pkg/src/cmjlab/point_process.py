"""Per-edge stochastic primitives of the collaboration model.

An edge reproduces at the events of a unit-rate Poisson process.  Each event
adds one vertex joined to both endpoints (jump 2, probability ``p``) or to one
endpoint (jump 1, probability ``q = 1 - p``).  The edge dies with hazard
``b + c * xi(t)`` where ``xi(t)`` is its running offspring count.  Because the
hazard is piecewise constant between events, a life is sampled exactly by
sequential competing exponentials.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParameterError

_BLOCK = 32  # uniforms drawn per refill; four are consumed per step


@dataclass(frozen=True)
class ModelParams:
    """Collaboration-model parameters ``(b, c, p)``."""

    b: float
    c: float
    p: float

    def __post_init__(self):
        for name in ("b", "c", "p"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f"{name} must be a finite real, got {value!r}")
        if self.b <= 0:
            raise ParameterError(f"b must be positive, got {self.b}")
        if self.c <= 0:
            raise ParameterError(f"c must be positive, got {self.c}")
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"p must lie in [0, 1], got {self.p}")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    def as_dict(self) -> dict:
        return {"b": self.b, "c": self.c, "p": self.p}


@dataclass(frozen=True)
class EdgeLife:
    """One individual's reproduction record.

    ``event_ages`` are ages (relative to the individual's birth) of its birth
    events, ``jump_sizes`` the offspring added at each, ``coins`` the fair
    endpoint selector drawn with each event (only meaningful for jump 1).
    When ``truncated`` is set, the individual was still alive when the
    simulation horizon was reached and ``lifetime`` is that horizon age.
    """

    event_ages: tuple[float, ...]
    jump_sizes: tuple[int, ...]
    lifetime: float
    truncated: bool = False
    coins: tuple[int, ...] = field(default=(), compare=True)

    @property
    def n_events(self) -> int:
        return len(self.event_ages)

    @property
    def total_jumps(self) -> int:
        return sum(self.jump_sizes)

    def alive_at(self, age: float) -> bool:
        if age < 0:
            return False
        if self.truncated:
            return age <= self.lifetime
        return age < self.lifetime

    def check(self) -> None:
        """Raise ``ParameterError`` if the record violates its invariants."""
        ages = self.event_ages
        if len(self.jump_sizes) != len(ages):
            raise ParameterError("jump_sizes and event_ages differ in length")
        if self.coins and len(self.coins) != len(ages):
            raise ParameterError("coins and event_ages differ in length")
        if any(j not in (1, 2) for j in self.jump_sizes):
            raise ParameterError("jump sizes must be 1 or 2")
        if any(a <= 0 for a in ages[:1]) or any(y <= x for x, y in zip(ages, ages[1:])):
            raise ParameterError("event ages must be positive and strictly increasing")
        if ages and ages[-1] >= self.lifetime and not self.truncated:
            raise ParameterError("reproduction after death")
        if ages and ages[-1] > self.lifetime:
            raise ParameterError("event beyond the recorded horizon")


@dataclass(frozen=True)
class DegreeMarks:
    """Per-event degree increments for one endpoint of an edge."""

    marks: tuple[int, ...]


class Kind(enum.Enum):
    BORN = "born"
    ALIVE = "alive"
    WEIGHTED = "weighted"


@dataclass(frozen=True)
class Characteristic:
    """A random characteristic evaluated at an individual's age.

    ``WEIGHTED`` characteristics are piecewise constant: weight ``weights[i]``
    on ``[breaks[i], breaks[i+1])`` and zero outside ``[breaks[0], breaks[-1])``.
    """

    kind: Kind
    breaks: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind is not Kind.WEIGHTED:
            return
        if len(self.breaks) != len(self.weights) + 1 or not self.weights:
            raise ParameterError("weighted characteristic needs len(breaks) == len(weights) + 1 >= 2")
        if self.breaks[0] < 0:
            raise ParameterError("weighted characteristic breakpoints must be >= 0")
        if any(y <= x for x, y in zip(self.breaks, self.breaks[1:])):
            raise ParameterError("weighted characteristic breakpoints must increase")
        for w in self.weights:
            if not math.isfinite(w) or w < 0:
                raise ParameterError(f"weights must be finite and nonnegative, got {w!r}")

    @classmethod
    def born(cls) -> "Characteristic":
        return cls(Kind.BORN)

    @classmethod
    def alive(cls) -> "Characteristic":
        return cls(Kind.ALIVE)

    @classmethod
    def weighted(cls, breaks: Sequence[float], weights: Sequence[float]) -> "Characteristic":
        return cls(Kind.WEIGHTED, tuple(float(x) for x in breaks), tuple(float(w) for w in weights))

    @classmethod
    def parse(cls, name: str) -> "Characteristic":
        try:
            kind = Kind(name.lower())
        except ValueError:
            raise ParameterError(f"unknown characteristic {name!r}") from None
        if kind is Kind.WEIGHTED:
            raise ParameterError("weighted characteristics need an explicit table")
        return cls(kind)

    def weight_at(self, age: float) -> float:
        i = bisect_right(self.breaks, age) - 1
        if i < 0 or i >= len(self.weights):
            return 0.0
        return self.weights[i]


def _check_rng(rng) -> np.random.Generator:
    if not isinstance(rng, np.random.Generator):
        raise ParameterError("rng must be a numpy Generator")
    return rng


def sample_edge_life(
    params: ModelParams,
    horizon: float,
    rng: np.random.Generator,
    mortal: bool = True,
) -> EdgeLife:
    """Sample one edge life up to age ``horizon``.

    Each step waits ``Exp(1 + b + c * xi)``; the event is a birth with
    probability ``1 / (1 + b + c * xi)``, otherwise death.  With
    ``mortal=False`` the death hazard is switched off (pure birth).

    Four uniforms are consumed per step (wait, type, jump, coin), so the
    record up to any age does not depend on ``horizon`` beyond it.
    """
    if not isinstance(params, ModelParams):
        raise ParameterError("params must be ModelParams")
    if not (horizon >= 0):
        raise ParameterError(f"horizon must be nonnegative, got {horizon!r}")
    _check_rng(rng)
    b, c, p = params.b, params.c, params.p
    ages: list[float] = []
    jumps: list[int] = []
    coins: list[int] = []
    age = 0.0
    xi = 0
    buf = rng.random(_BLOCK).tolist()
    pos = 0
    while True:
        if pos + 4 > len(buf):
            buf = rng.random(_BLOCK).tolist()
            pos = 0
        u_wait, u_type, u_jump, u_coin = buf[pos:pos + 4]
        pos += 4
        total = 1.0 + (b + c * xi if mortal else 0.0)
        age += -math.log1p(-u_wait) / total
        if age > horizon:
            return EdgeLife(tuple(ages), tuple(jumps), float(horizon), True, tuple(coins))
        if u_type * total < 1.0:
            jump = 2 if u_jump < p else 1
            xi += jump
            ages.append(age)
            jumps.append(jump)
            coins.append(1 if u_coin < 0.5 else 0)
        else:
            return EdgeLife(tuple(ages), tuple(jumps), age, False, tuple(coins))


def xi_at(life: EdgeLife, t: float) -> int:
    """Offspring count up to and including age ``t``."""
    if t < 0:
        return 0
    n = bisect_right(life.event_ages, t)
    return sum(life.jump_sizes[:n])


def pi_at(life: EdgeLife, t: float) -> int:
    """Number of birth events up to and including age ``t``."""
    if t < 0:
        return 0
    return bisect_right(life.event_ages, t)


def sample_degree_marks(life: EdgeLife, rng: np.random.Generator) -> DegreeMarks:
    """Degree increments seen by one endpoint: 1 for a jump 2, a fair coin for a jump 1."""
    _check_rng(rng)
    n1 = sum(1 for j in life.jump_sizes if j == 1)
    coins = iter(rng.integers(0, 2, size=n1).tolist())
    return DegreeMarks(tuple(1 if j == 2 else int(next(coins)) for j in life.jump_sizes))


def eta_at(life: EdgeLife, marks: DegreeMarks, t: float) -> int:
    """Degree reproduction process ``eta`` at age ``t``."""
    if t < 0:
        return 0
    n = bisect_right(life.event_ages, min(t, life.lifetime))
    return sum(marks.marks[:n])


def eval_characteristic(char: Characteristic, life: EdgeLife, age: float) -> float:
    if age < 0:
        return 0.0
    if char.kind is Kind.BORN:
        return 1.0
    if char.kind is Kind.ALIVE:
        return 1.0 if life.alive_at(age) else 0.0
    return char.weight_at(age)
