"""The collaboration random graph and its degree processes.

Start: two vertices joined by one edge.  Every edge reproduces by its own
edge life (:func:`cmjlab.point_process.sample_edge_life`).  A jump-2 event
adds a vertex joined to both endpoints of the parent edge; a jump-1 event adds
a vertex joined to the endpoint picked by the event's fair coin.  Edges die,
vertices stay.  A dead edge can still be counted as a "blue" edge
(``WITH_BLUE`` mode).
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import streams
from .cmj_engine import MARKS, run_cmj, z_phi_grid
from .errors import ConsistencyError, OutOfRangeError, ParameterError
from .point_process import Characteristic, EdgeLife, ModelParams, sample_degree_marks, sample_edge_life

LIVING = "living"
WITH_BLUE = "with_blue"
_MODES = (LIVING, WITH_BLUE)

TIMESERIES_COLUMNS = (
    "t", "vertices", "living_edges", "total_edges",
    "max_degree_living", "max_degree_with_blue", "argmax_vertex_birth_time",
)


@dataclass(frozen=True)
class Edge:
    id: int
    endpoints: tuple[int, int]
    birth_time: float
    life: EdgeLife
    parent: Optional[int] = None
    event_index: Optional[int] = None

    @property
    def death_time(self) -> float:
        return math.inf if self.life.truncated else self.birth_time + self.life.lifetime

    def alive_at(self, t: float) -> bool:
        return self.birth_time <= t < self.death_time


@dataclass
class GraphPath:
    vertex_birth: list[float]
    edges: list[Edge]
    horizon: float
    seed: int
    replica: int = 0
    exhausted_budget: bool = False
    complete_until: float = math.inf
    params: Optional[ModelParams] = None
    incident: list[list[int]] = field(default_factory=list)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_birth)

    def check_time(self, t: float) -> None:
        if t > self.horizon:
            raise OutOfRangeError(f"t={t} exceeds the simulated horizon {self.horizon}")
        if self.exhausted_budget and t >= self.complete_until:
            raise OutOfRangeError(f"budget exhausted: graph known only for t < {self.complete_until}")

    def vertices_at(self, t: float) -> int:
        self.check_time(t)
        return int(np.searchsorted(self.vertex_birth, t, side="right"))

    def living_edges(self, t: float) -> int:
        self.check_time(t)
        return sum(1 for e in self.edges if e.alive_at(t))

    def total_edges(self, t: float) -> int:
        self.check_time(t)
        return sum(1 for e in self.edges if e.birth_time <= t)

    def births_up_to(self, t: float) -> int:
        """Number of reproduction events (new vertices) up to ``t``."""
        return self.vertices_at(t) - 2


@dataclass
class DegreeSeries:
    t_grid: np.ndarray
    values: np.ndarray
    mode: str
    argmax: np.ndarray  # vertex attaining the maximum (-1 when no vertex has positive degree)


def run_collab(params: ModelParams, horizon: float, event_budget: int, seed: int,
               *, replica: int = 0) -> GraphPath:
    """Simulate the collaboration graph on ``[0, horizon]``.

    ``event_budget`` caps the number of edges.  Edge ``i`` (chronological)
    draws its life from stream ``i`` of the replica key, so identical inputs
    give identical graphs.
    """
    if not isinstance(params, ModelParams):
        raise ParameterError("params must be ModelParams")
    if not (horizon >= 0) or not math.isfinite(horizon):
        raise ParameterError(f"horizon must be finite and nonnegative, got {horizon!r}")
    if event_budget < 1:
        raise ParameterError("event_budget must be positive")
    key = streams.replica_key(seed, replica)
    vertex_birth = [0.0, 0.0]
    incident: list[list[int]] = [[], []]
    edges: list[Edge] = []

    def add_edge(u: int, v: int, t: float, parent, ev) -> None:
        if u == v:
            raise ConsistencyError("self-loop created")
        idx = len(edges)
        life = sample_edge_life(params, horizon - t, streams.stream(key, idx))
        edges.append(Edge(idx, (u, v), t, life, parent, ev))
        incident[u].append(idx)
        incident[v].append(idx)
        for j, age in enumerate(life.event_ages):
            heapq.heappush(pending, (min(t + age, horizon), idx, j))

    pending: list[tuple[float, int, int]] = []
    add_edge(0, 1, 0.0, None, None)
    exhausted = False
    complete_until = math.inf
    while pending:
        t, eid, j = pending[0]
        parent = edges[eid]
        need = parent.life.jump_sizes[j]
        if len(edges) + need > event_budget:
            exhausted = True
            complete_until = t
            break
        heapq.heappop(pending)
        w = len(vertex_birth)
        vertex_birth.append(t)
        incident.append([])
        u, v = parent.endpoints
        if need == 2:
            add_edge(w, u, t, eid, j)
            add_edge(w, v, t, eid, j)
        else:
            add_edge(w, v if parent.life.coins[j] else u, t, eid, j)
    return GraphPath(vertex_birth, edges, float(horizon), int(seed), int(replica),
                     exhausted, complete_until, params, incident)


def degree_of(path: GraphPath, vertex: int, t: float, mode: str = LIVING) -> int:
    """Degree of ``vertex`` at time ``t``; ``WITH_BLUE`` also counts dead edges."""
    if mode not in _MODES:
        raise ParameterError(f"mode must be one of {_MODES}")
    if not 0 <= vertex < path.n_vertices:
        raise LookupError(f"unknown vertex {vertex}")
    path.check_time(t)
    if path.vertex_birth[vertex] > t:
        raise LookupError(f"vertex {vertex} is not born by t={t}")
    es = (path.edges[i] for i in path.incident[vertex])
    if mode == LIVING:
        return sum(1 for e in es if e.alive_at(t))
    return sum(1 for e in es if e.birth_time <= t)


def _degree_events(path: GraphPath, mode: str):
    ev = []
    for e in path.edges:
        u, v = e.endpoints
        ev.append((e.birth_time, 1, u))
        ev.append((e.birth_time, 1, v))
        if mode == LIVING and not e.life.truncated:
            ev.append((e.death_time, 0, u))  # 0 sorts deaths before births at equal times
            ev.append((e.death_time, 0, v))
    ev.sort()
    return ev


def degree_snapshots(path: GraphPath, t_grid: Sequence[float], mode: str = LIVING):
    """Degrees of all vertices at each grid time, plus the running maximum.

    Sweeps birth/death events once.  The maximum is kept in a max-heap of
    ``(degree, vertex)`` with lazy deletion of stale entries.
    """
    if mode not in _MODES:
        raise ParameterError(f"mode must be one of {_MODES}")
    grid = np.asarray(t_grid, dtype=float)
    if grid.size and np.any(np.diff(grid) < 0):
        raise ParameterError("t_grid must be increasing")
    for t in grid[-1:]:
        path.check_time(float(t))
    deg = np.zeros(path.n_vertices, dtype=np.int64)
    heap: list[tuple[int, int]] = []
    events = _degree_events(path, mode)
    k = 0
    snaps, maxima, argmax = [], [], []
    for t in grid:
        while k < len(events) and events[k][0] <= t:
            _, kind, v = events[k]
            deg[v] += 1 if kind == 1 else -1
            heapq.heappush(heap, (-int(deg[v]), v))
            k += 1
        while heap and -heap[0][0] != deg[heap[0][1]]:
            heapq.heappop(heap)
        if heap and -heap[0][0] > 0:
            maxima.append(-heap[0][0])
            argmax.append(heap[0][1])
        else:
            maxima.append(0)
            argmax.append(-1)
        snaps.append(deg.copy())
    return snaps, np.array(maxima, dtype=np.int64), np.array(argmax, dtype=np.int64)


def max_degree_series(path: GraphPath, t_grid: Sequence[float], mode: str = LIVING) -> DegreeSeries:
    """Maximal degree ``M(t)`` over existing vertices at each grid time."""
    _, maxima, argmax = degree_snapshots(path, t_grid, mode)
    return DegreeSeries(np.asarray(t_grid, dtype=float), maxima, mode, argmax)


def timeseries_rows(path: GraphPath, t_grid: Sequence[float]) -> list[dict]:
    grid = np.asarray(t_grid, dtype=float)
    living = max_degree_series(path, grid, LIVING)
    blue = max_degree_series(path, grid, WITH_BLUE)
    births = np.array([e.birth_time for e in path.edges])
    deaths = np.sort([e.death_time for e in path.edges])
    births.sort()
    rows = []
    for i, t in enumerate(grid):
        born = int(np.searchsorted(births, t, side="right"))
        dead = int(np.searchsorted(deaths, t, side="right"))
        am = int(living.argmax[i])
        rows.append({
            "t": float(t),
            "vertices": int(np.searchsorted(path.vertex_birth, t, side="right")),
            "living_edges": born - dead,
            "total_edges": born,
            "max_degree_living": int(living.values[i]),
            "max_degree_with_blue": int(blue.values[i]),
            "argmax_vertex_birth_time": path.vertex_birth[am] if am >= 0 else float("nan"),
        })
    return rows


def timeseries_csv(path: GraphPath, t_grid: Sequence[float], header_lines: Sequence[str] = ()) -> str:
    """CSV time series with the fixed column set, LF line endings."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=TIMESERIES_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in timeseries_rows(path, t_grid):
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def snapshot(path: GraphPath, t: float) -> dict:
    """JSON-ready graph state at time ``t`` (living and blue edges)."""
    path.check_time(t)
    n = path.vertices_at(t)
    edges = [
        {"id": e.id, "endpoints": list(e.endpoints), "birth_time": e.birth_time,
         "living": e.alive_at(t)}
        for e in path.edges if e.birth_time <= t
    ]
    return {
        "t": t,
        "vertices": [
            {"id": v, "birth_time": path.vertex_birth[v],
             "degree_living": degree_of(path, v, t, LIVING),
             "degree_with_blue": degree_of(path, v, t, WITH_BLUE)}
            for v in range(n)
        ],
        "edges": edges,
    }


def snapshot_json(path: GraphPath, times: Sequence[float]) -> str:
    doc = {"schema": "cmjlab.graph_snapshot", "version": 1, "seed": path.seed,
           "replica": path.replica, "snapshots": [snapshot(path, float(t)) for t in times]}
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False)


# ---------------------------------------------------------------------------
# degree process of a single vertex


def run_degree_cmj(params: ModelParams, horizon: float, event_budget: int, seed: int,
                   *, replica: int = 0):
    """Standalone degree process: 1 ancestor w.p. ``q``, 2 w.p. ``p``, offspring by marks."""
    rng = streams.replica_rng(seed, replica)
    ancestors = 2 if rng.random() < params.p else 1
    return run_cmj(params, ancestors, horizon, event_budget, seed, replica=replica, offspring=MARKS)


@dataclass
class CrosscheckReport:
    params: dict
    ages: list
    standalone_mean: list
    standalone_se: list
    graph_mean: list
    graph_se: list
    replicas: int
    graph_replicas_used: int
    z_scores: list
    initial_degree_mean: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def degree_cmj_crosscheck(params: ModelParams, ages: Sequence[float], replicas: int, seed: int,
                          *, birth_cap: float = 5.0, event_budget: int = 10**6,
                          threads: int = 1) -> CrosscheckReport:
    """Mean degree of a newborn vertex by two independent simulators.

    The standalone route runs the degree CMJ driven by degree marks.  The
    graph route simulates the whole graph and follows vertex 2 (the first
    vertex born after time 0) at the given ages; replicas in which vertex 2
    is not born by ``birth_cap`` are discarded (the degree process after
    birth does not depend on the birth time).
    """
    ages = np.asarray(ages, dtype=float)
    a_max = float(ages.max())
    alive = Characteristic.alive()

    def standalone(r):
        path = run_degree_cmj(params, a_max, event_budget, seed, replica=r)
        if path.exhausted_budget:
            raise OutOfRangeError("degree process exhausted the event budget")
        return z_phi_grid(path, alive, ages), path.ancestors

    def in_graph(r):
        # vertex 2 is born at the first event of the initial edge, whose life
        # comes from stream 0 and does not depend on the horizon beyond it
        first = sample_edge_life(params, birth_cap, streams.stream(streams.replica_key(seed + 1, r), 0))
        if not first.event_ages:
            return None
        tau = first.event_ages[0]
        path = run_collab(params, tau + a_max, event_budget, seed + 1, replica=r)
        if path.exhausted_budget:
            raise OutOfRangeError("graph exhausted the event budget")
        assert path.vertex_birth[2] == tau
        return np.array([degree_of(path, 2, tau + a) for a in ages], dtype=float)

    sa = streams.fan_out(standalone, range(replicas), threads)
    sa_vals = np.array([x for x, _ in sa])
    anc = np.array([n for _, n in sa], dtype=float)
    gr = [x for x in streams.fan_out(in_graph, range(replicas), threads) if x is not None]
    gr_vals = np.array(gr) if gr else np.zeros((0, ages.size))

    def mean_se(x):
        if len(x) < 2:
            return [float("nan")] * ages.size, [float("nan")] * ages.size
        return x.mean(0).tolist(), (x.std(0, ddof=1) / math.sqrt(len(x))).tolist()

    sm, ss = mean_se(sa_vals)
    gm, gs = mean_se(gr_vals)
    z = [(a - b) / math.hypot(s1, s2) if math.hypot(s1, s2) > 0 else 0.0
         for a, b, s1, s2 in zip(sm, gm, ss, gs)]
    return CrosscheckReport(params.as_dict(), ages.tolist(), sm, ss, gm, gs, replicas, len(gr),
                            z, float(anc.mean()))


def tracked_vertex_isolated(params: ModelParams, seed: int, replica: int, threshold: int = 100) -> bool:
    """Whether a newborn vertex's living degree eventually hits 0.

    The degree process is followed generation by generation: each incident
    edge's whole life is sampled (no horizon) and contributes one new incident
    edge per event with mark 1.  The vertex is isolated iff a generation is
    empty; reaching ``threshold`` incident edges in one generation counts as
    survival (the residual extinction chance is below ``z**threshold``).
    """
    key = streams.replica_key(seed, replica)
    rng = streams.stream(key, 0, streams.REPLICA)
    current = 2 if rng.random() < params.p else 1
    idx = 0
    while 0 < current < threshold:
        nxt = 0
        for _ in range(current):
            life = sample_edge_life(params, math.inf, streams.stream(key, idx))
            marks = sample_degree_marks(life, streams.stream(key, idx, streams.MARKS))
            nxt += sum(marks.marks)
            idx += 1
        current = nxt
    return current == 0


def isolation_frequency(params: ModelParams, replicas: int, seed: int, threshold: int = 100,
                        threads: int = 1) -> tuple[float, float]:
    """Monte Carlo probability that a newborn vertex becomes isolated, with SE."""
    hits = streams.fan_out(lambda r: tracked_vertex_isolated(params, seed, r, threshold),
                           range(replicas), threads)
    x = np.array(hits, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))
