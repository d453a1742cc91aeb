"""Constructive coupling behind the L_k boundedness of CMJ processes.

Three pieces of machinery live here:

* ``advance_births`` pulls every birth event of a life in ``[0, eps]`` to age
  0 and every event in ``(eps, t]`` to age ``eps``.  The advanced process
  dominates the original one pointwise.
* The individuals born at the same instant as their mother form a subcritical
  Galton-Watson tree.  ``gw_total_progeny`` and ``gw_norm_check`` simulate it.
* ``relabel_tree`` rewrites a family tree so that no individual shares its
  birth instant with its parent.  Every same-instant child becomes a sibling
  of its parent, which can turn descendants into extra ancestors.  Birth
  times are never touched, so ``births_up_to`` is invariant.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from . import streams
from .errors import ParameterError, PreconditionError
from .point_process import EdgeLife, xi_at

TREE_SCHEMA = "cmjlab.family_tree"
TREE_VERSION = 1

Label = tuple[int, ...]


class RegimeWarning(UserWarning):
    """A subcritical-only routine was given a law with mean >= 1."""


class _CapHit(enum.Enum):
    CAP_HIT = "CAP_HIT"

    def __repr__(self):
        return "CAP_HIT"


CAP_HIT = _CapHit.CAP_HIT


# ---------------------------------------------------------------------------
# advancing births


def advance_births(life: EdgeLife, t: float, eps: float) -> EdgeLife:
    """Move events with age <= eps to 0 and events in (eps, t] to eps.

    Jump sizes and the lifetime are kept, so the result is a valid record for
    counting offspring, though its ages are no longer strictly increasing.
    """
    if not (eps > 0) or not math.isfinite(eps):
        raise ParameterError(f"eps must be positive and finite, got {eps!r}")
    if not (eps < t):
        raise ParameterError(f"need eps < t, got eps={eps!r}, t={t!r}")
    ages = tuple(0.0 if a <= eps else (eps if a <= t else a) for a in life.event_ages)
    return EdgeLife(ages, life.jump_sizes, life.lifetime, life.truncated, life.coins)


def dominates(advanced: EdgeLife, original: EdgeLife) -> bool:
    """True if ``xi_advanced(s) >= xi_original(s)`` at every breakpoint of either."""
    points = sorted(set(advanced.event_ages) | set(original.event_ages) | {0.0})
    return all(xi_at(advanced, s) >= xi_at(original, s) for s in points)


# ---------------------------------------------------------------------------
# Galton-Watson offspring laws


@dataclass(frozen=True)
class OffspringLaw:
    """Finite-support offspring distribution ``P(X = support[i]) = probs[i]``."""

    support: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.support) != len(self.probs) or not self.support:
            raise ParameterError("support and probs must be nonempty and equally long")
        if len(set(self.support)) != len(self.support):
            raise ParameterError("support values must be distinct")
        for x in self.support:
            if int(x) != x or x < 0:
                raise ParameterError(f"support must be nonnegative integers, got {x!r}")
        for pr in self.probs:
            if not math.isfinite(pr) or pr < 0:
                raise ParameterError(f"probabilities must be finite and nonnegative, got {pr!r}")
        if abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise ParameterError(f"probabilities sum to {math.fsum(self.probs)!r}, not 1")

    @classmethod
    def from_mapping(cls, table: Mapping[int, float]) -> "OffspringLaw":
        items = sorted((int(k), float(v)) for k, v in table.items())
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items))

    @property
    def mean(self) -> float:
        return math.fsum(x * pr for x, pr in zip(self.support, self.probs))

    def moment(self, k: float) -> float:
        return math.fsum(x**k * pr for x, pr in zip(self.support, self.probs))

    def norm(self, k: float) -> float:
        """``||X||_k = (E X^k)^(1/k)``."""
        return self.moment(k) ** (1.0 / k)

    def pmf(self) -> np.ndarray:
        """Dense probability vector indexed by offspring count."""
        out = np.zeros(max(self.support) + 1)
        for x, pr in zip(self.support, self.probs):
            out[x] = pr
        return out


def _draw_offspring(law: OffspringLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(np.asarray(law.support, dtype=np.int64), size=n, p=np.asarray(law.probs))


def gw_total_progeny(law: OffspringLaw, cap: int, rng: np.random.Generator) -> Union[int, _CapHit]:
    """Total number of individuals (root included) of one Galton-Watson tree.

    Returns ``CAP_HIT`` as soon as more than ``cap`` individuals exist.  A
    ``RegimeWarning`` is issued for laws with mean >= 1, where the tree is
    infinite with positive probability.
    """
    if int(cap) != cap or cap < 1:
        raise ParameterError(f"cap must be a positive integer, got {cap!r}")
    if law.mean >= 1.0:
        warnings.warn(f"offspring mean {law.mean} >= 1: total progeny may be infinite", RegimeWarning)
    total = 1
    generation = 1
    while generation:
        kids = int(_draw_offspring(law, generation, rng).sum())
        total += kids
        if total > cap:
            return CAP_HIT
        generation = kids
    return total


@dataclass
class ProgenyReport:
    law: OffspringLaw
    n: int
    mean: float
    se: float
    expected: float  # 1 / (1 - mean(law))
    cap_hits: int

    @property
    def mean_descendants(self) -> float:
        """Mean progeny excluding the root."""
        return self.mean - 1.0


def progeny_mean(law: OffspringLaw, n: int, seed: int, cap: int = 10**6) -> ProgenyReport:
    """Monte Carlo mean total progeny over ``n`` trees from one seeded stream."""
    if law.mean >= 1.0:
        raise PreconditionError("progeny_mean needs a subcritical law")
    rng = streams.replica_rng(seed, 0)
    # all trees advance one generation at a time
    sizes = np.ones(n, dtype=np.int64)
    g = np.ones(n, dtype=np.int64)
    hit = np.zeros(n, dtype=bool)
    while g.any():
        owners = np.repeat(np.arange(n), g)
        draws = _draw_offspring(law, owners.size, rng)
        g = np.bincount(owners, weights=draws, minlength=n).astype(np.int64)
        sizes += g
        over = sizes > cap
        hit |= over
        g[over] = 0
    sizes = np.minimum(sizes, cap).astype(float)
    return ProgenyReport(law, n, float(sizes.mean()), float(sizes.std(ddof=1) / math.sqrt(n)),
                         1.0 / (1.0 - law.mean), int(hit.sum()))


def gw_generation_sizes(law: OffspringLaw, n_gens: int, replicas: int, seed: int) -> np.ndarray:
    """Generation sizes ``G_0..G_n`` for many independent trees, shape (replicas, n+1)."""
    rng = streams.replica_rng(seed, 0)
    out = np.zeros((replicas, n_gens + 1), dtype=np.int64)
    g = np.ones(replicas, dtype=np.int64)
    out[:, 0] = g
    for n in range(1, n_gens + 1):
        owners = np.repeat(np.arange(replicas), g)
        draws = _draw_offspring(law, owners.size, rng)
        g = np.bincount(owners, weights=draws, minlength=replicas).astype(np.int64)
        out[:, n] = g
    return out


@dataclass
class NormCheck:
    k: float
    law_norm: float
    norms: np.ndarray  # empirical ||G_n||_k, n = 0..n_gens
    se: np.ndarray
    bounds: np.ndarray  # law_norm ** n
    flagged: list[int] = field(default_factory=list)  # lower CI above the bound

    @property
    def ok(self) -> bool:
        return not self.flagged


def gw_norm_check(law: OffspringLaw, k: float, n_gens: int, replicas: int, seed: int,
                  z: float = 3.0) -> NormCheck:
    """Compare empirical ``||G_n||_k`` with ``||law||_k ** n`` per generation."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k!r}")
    law_norm = law.norm(k)
    if law_norm >= 1.0:
        raise PreconditionError(f"||law||_{k} = {law_norm} is not below 1")
    sizes = gw_generation_sizes(law, n_gens, replicas, seed).astype(float)
    powers = sizes**k
    mk = powers.mean(axis=0)
    mk_se = powers.std(axis=0, ddof=1) / math.sqrt(replicas)
    norms = mk ** (1.0 / k)
    # delta method for (E G^k)^(1/k)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.where(mk > 0, norms / (k * mk) * mk_se, 0.0)
    bounds = law_norm ** np.arange(n_gens + 1)
    flagged = [n for n in range(n_gens + 1) if norms[n] - z * se[n] > bounds[n]]
    return NormCheck(k, law_norm, norms, se, bounds, flagged)


# ---------------------------------------------------------------------------
# family trees


@dataclass(frozen=True)
class FamilyTree:
    """Genealogy keyed by labels: ``(a1, ..., ak)`` is the ``ak``-th child of ``(a1, ..., ak-1)``."""

    births: Mapping[Label, float]

    def __post_init__(self):
        births = {tuple(int(x) for x in lab): float(t) for lab, t in dict(self.births).items()}
        object.__setattr__(self, "births", births)
        for lab, t in births.items():
            if not lab or any(x < 1 for x in lab):
                raise ParameterError(f"labels must be nonempty strings of positive integers: {lab!r}")
            if not math.isfinite(t) or t < 0:
                raise ParameterError(f"birth time of {lab!r} must be finite and >= 0")
            if lab[-1] > 1 and lab[:-1] + (lab[-1] - 1,) not in births:
                raise ParameterError(f"sibling indices not contiguous at {lab!r}")
            if len(lab) > 1:
                parent = lab[:-1]
                if parent not in births:
                    raise ParameterError(f"label set not prefix-closed at {lab!r}")
                if t < births[parent]:
                    raise ParameterError(f"{lab!r} born before its parent")
            if lab[-1] > 1 and t < births[lab[:-1] + (lab[-1] - 1,)]:
                raise ParameterError(f"children of {lab[:-1]!r} not ordered by birth")

    def __len__(self):
        return len(self.births)

    def labels(self) -> list[Label]:
        """Labels in shortlex order."""
        return sorted(self.births, key=lambda lab: (len(lab), lab))

    def is_red(self, label: Label) -> bool:
        return len(label) > 1 and self.births[label] == self.births[label[:-1]]

    def red_labels(self, depth_cap: Optional[int] = None) -> list[Label]:
        return [lab for lab in self.labels()
                if self.is_red(lab) and (depth_cap is None or len(lab) <= depth_cap)]

    @property
    def n_ancestors(self) -> int:
        return sum(1 for lab in self.births if len(lab) == 1)

    @property
    def depth(self) -> int:
        return max((len(lab) for lab in self.births), default=0)

    def birth_multiset(self) -> list[float]:
        return sorted(self.births.values())

    def to_json(self) -> str:
        nodes = [{"label": list(lab), "birth_time": self.births[lab]} for lab in self.labels()]
        doc = {"schema": TREE_SCHEMA, "version": TREE_VERSION, "nodes": nodes}
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FamilyTree":
        doc = json.loads(text)
        if isinstance(doc, dict):
            if doc.get("schema", TREE_SCHEMA) != TREE_SCHEMA:
                raise ParameterError("not a cmjlab family tree document")
            if doc.get("version", TREE_VERSION) != TREE_VERSION:
                raise ParameterError(f"unsupported family tree version {doc.get('version')!r}")
            nodes = doc.get("nodes")
        else:
            nodes = doc
        if not isinstance(nodes, list):
            raise ParameterError("family tree JSON needs a list of nodes")
        births: dict[Label, float] = {}
        for rec in nodes:
            try:
                lab = tuple(rec["label"])
                t = rec["birth_time"]
            except (KeyError, TypeError):
                raise ParameterError(f"malformed node {rec!r}") from None
            if lab in births:
                raise ParameterError(f"duplicate label {list(lab)!r}")
            births[lab] = t
        return cls(births)


def births_up_to(tree: FamilyTree, t: float) -> int:
    """Number of nodes born at or before ``t``."""
    return sum(1 for s in tree.births.values() if s <= t)


class _Node:
    __slots__ = ("birth", "parent", "children")

    def __init__(self, birth: float, parent: Optional["_Node"]):
        self.birth = birth
        self.parent = parent
        self.children: list[_Node] = []


def _build_nodes(tree: FamilyTree) -> list[_Node]:
    nodes: dict[Label, _Node] = {}
    roots: list[_Node] = []
    for lab in tree.labels():
        parent = nodes.get(lab[:-1]) if len(lab) > 1 else None
        node = _Node(tree.births[lab], parent)
        nodes[lab] = node
        (parent.children if parent else roots).append(node)
    return roots


def _to_tree(roots: list[_Node]) -> FamilyTree:
    births: dict[Label, float] = {}
    stack = [((i + 1,), n) for i, n in enumerate(roots)]
    while stack:
        lab, node = stack.pop()
        births[lab] = node.birth
        stack.extend((lab + (j + 1,), kid) for j, kid in enumerate(node.children))
    return FamilyTree(births)


def _first_red(roots: list[_Node], depth_cap: int):
    """Shortlex-first node born with its parent, among depths <= depth_cap.

    Breadth-first traversal over ordered children visits labels in shortlex
    order.  Also reports whether a red node exists below the cap.
    """
    queue = deque((n, 1) for n in roots)
    deeper = False
    while queue:
        node, depth = queue.popleft()
        if node.parent is not None and node.birth == node.parent.birth:
            if depth <= depth_cap:
                return node, depth, deeper
            deeper = True
        queue.extend((kid, depth + 1) for kid in node.children)
    return None, None, deeper


@dataclass
class RelabelResult:
    tree: FamilyTree
    cap_hit: bool  # red labels remain beyond depth_cap (or max_steps was reached)
    steps: int

    @property
    def status(self):
        return CAP_HIT if self.cap_hit else "OK"


def relabel_tree(tree: FamilyTree, depth_cap: int, max_steps: int = 10**7) -> RelabelResult:
    """Remove same-instant parent-child pairs by relabelling, in shortlex order.

    Each step takes the first red label ``(B, a, 1)``.  Its owner becomes the
    sibling ``(B, b)`` of its parent, where ``b - 1`` is the last index among
    ``(B, x)`` born at the same instant; later siblings shift up by one and
    the remaining children of ``(B, a)`` shift down by one.  The whole
    subtree moves with the node.

    Steps stop once no red label of length <= ``depth_cap`` remains.  If red
    labels persist deeper, the result is partial and ``cap_hit`` is set.
    """
    if int(depth_cap) != depth_cap or depth_cap < 1:
        raise ParameterError(f"depth_cap must be a positive integer, got {depth_cap!r}")
    roots = _build_nodes(tree)
    steps = 0
    while True:
        node, _depth, deeper = _first_red(roots, depth_cap)
        if node is None:
            return RelabelResult(_to_tree(roots), deeper, steps)
        if steps >= max_steps:
            return RelabelResult(_to_tree(roots), True, steps)
        parent = node.parent
        # children are ordered by birth, so a same-instant child is the first one
        parent.children.remove(node)
        grand = parent.parent
        siblings = grand.children if grand is not None else roots
        # siblings are birth-ordered, so coeval ones are contiguous and end at
        # the last index with birth <= node.birth
        pos = bisect_right([s.birth for s in siblings], node.birth)
        siblings.insert(pos, node)
        node.parent = grand
        steps += 1


def is_relabelled(tree: FamilyTree, depth_cap: int) -> bool:
    """No node of depth <= depth_cap shares its birth time with its parent."""
    return not tree.red_labels(depth_cap)


def random_tied_tree(rng: np.random.Generator, max_nodes: int = 60, n_ancestors: int = 1,
                     tie_prob: float = 0.3, mean_kids: float = 1.2, levels: int = 4) -> FamilyTree:
    """Random birth-ordered tree on an integer time grid, with many exact ties.

    Each node has a Poisson number of children; a child is born at the
    mother's instant with probability ``tie_prob``, otherwise 1 to ``levels``
    steps later.  Growth stops at ``max_nodes`` nodes.
    """
    births: dict[Label, float] = {}
    queue: deque[Label] = deque()
    for a in range(n_ancestors):
        t = float(rng.integers(0, 2))
        births[(a + 1,)] = t
        queue.append((a + 1,))
    # ancestors must be birth-ordered too
    ordered = sorted(births.values())
    births = {(i + 1,): t for i, t in enumerate(ordered)}
    while queue and len(births) < max_nodes:
        lab = queue.popleft()
        t0 = births[lab]
        n = int(min(rng.poisson(mean_kids), max_nodes - len(births)))
        if n == 0:
            continue
        gaps = np.where(rng.random(n) < tie_prob, 0, rng.integers(1, levels + 1, size=n))
        for j, g in enumerate(np.sort(gaps)):
            kid = lab + (j + 1,)
            births[kid] = t0 + float(g)
            queue.append(kid)
    return FamilyTree(births)


def tree_from_path(path) -> FamilyTree:
    """Family tree of a simulated population (children in order of birth)."""
    labels: dict[int, Label] = {}
    births: dict[Label, float] = {}
    n_roots = 0
    counts = [0] * len(path.individuals)
    for ind in path.individuals:  # ids are chronological
        if ind.parent is None:
            n_roots += 1
            lab: Label = (n_roots,)
        else:
            counts[ind.parent] += 1
            lab = labels[ind.parent] + (counts[ind.parent],)
        labels[ind.id] = lab
        births[lab] = ind.birth_time
    return FamilyTree(births)


def event_times(tree: FamilyTree) -> list[float]:
    return sorted(set(tree.births.values()))


def same_counts(a: FamilyTree, b: FamilyTree, times: Iterable[float]) -> bool:
    return all(births_up_to(a, t) == births_up_to(b, t) for t in times)
