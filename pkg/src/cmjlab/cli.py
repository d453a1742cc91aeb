"""Command-line runner: ``cmjlab <subcommand> [options]``.

Every run is described by a :class:`RunConfig`.  Values come from command-line
flags, then an optional JSON config file (``--config``), then defaults.  The
effective config, the tool version and the seed are embedded in every output:
as ``# key: value`` comment lines at the top of CSV files and as top-level
keys of JSON files.  Files are written under a ``.partial`` name and renamed
when complete.

Exit codes: 0 success, 1 input or numerical error, 2 regime gate (process
not supercritical, or ``k`` too small), 3 cap hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, streams
from .collab_graph import (
    TIMESERIES_COLUMNS,
    degree_cmj_crosscheck,
    run_collab,
    snapshot_json,
    timeseries_rows,
)
from .coupling_lab import FamilyTree, relabel_tree
from .errors import CMJError, ParameterError
from .malthus_solver import Regime, mc_discounted_reproduction, solve_alpha, solve_beta, solve_report
from .moment_lab import bound_report, delta_report, lk_series, series_from_samples
from .point_process import Characteristic, ModelParams

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REGIME = 2
EXIT_CAP = 3

OUTDIR_ENV = "CMJLAB_OUTDIR"
SUBCOMMANDS = ("solve", "simulate", "moments", "maxdeg", "relabel", "crosscheck")
CONFIG_SCHEMA = "cmjlab.run_config"


@dataclass
class RunConfig:
    subcommand: str = "solve"
    b: float = 0.1
    c: float = 0.1
    p: float = 0.5
    horizon: float = 5.0
    event_budget: int = 10**6
    replicas: int = 100
    seed: int = 0
    k: float = 2.0
    t_start: float = 0.0
    t_stop: Optional[float] = None  # defaults to the horizon
    t_points: int = 21
    t_scale: str = "linear"
    rate: str = "alpha"  # "alpha", "beta" or a number
    char: str = "born"
    aggregate: bool = False
    snapshots: list = field(default_factory=list)
    horizons: list = field(default_factory=lambda: [3.0, 4.5, 6.0, 7.5])
    ages: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    birth_cap: float = 5.0
    depth_cap: int = 10
    input: Optional[str] = None
    outdir: Optional[str] = None
    name: Optional[str] = None  # output base name, defaults to the subcommand
    mc_samples: int = 20000
    tol: float = 1e-10

    # -- validation -----------------------------------------------------------

    def params(self) -> ModelParams:
        return ModelParams(self.b, self.c, self.p)

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ParameterError(f"subcommand: unknown {self.subcommand!r}")
        self.params()

        def positive(name, integer=False):
            v = getattr(self, name)
            if integer and (isinstance(v, bool) or int(v) != v):
                raise ParameterError(f"{name}: must be an integer, got {v!r}")
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ParameterError(f"{name}: must be positive and finite, got {v!r}")

        for name in ("horizon", "tol", "birth_cap"):
            positive(name)
        for name in ("event_budget", "replicas", "t_points", "depth_cap", "mc_samples"):
            positive(name, integer=True)
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"seed: must be a nonnegative integer, got {self.seed!r}")
        if not (math.isfinite(self.k) and self.k >= 1):
            raise ParameterError(f"k: must be >= 1, got {self.k!r}")
        if not (math.isfinite(self.t_start) and self.t_start >= 0):
            raise ParameterError(f"t_start: must be >= 0, got {self.t_start!r}")
        stop = self.grid_stop
        if not (math.isfinite(stop) and stop >= self.t_start):
            raise ParameterError(f"t_stop: must be >= t_start, got {stop!r}")
        if stop > self.horizon:
            raise ParameterError(f"t_stop: {stop} exceeds horizon {self.horizon}")
        if self.t_scale not in ("linear", "log"):
            raise ParameterError(f"t_scale: must be 'linear' or 'log', got {self.t_scale!r}")
        if self.t_scale == "log" and self.t_start <= 0:
            raise ParameterError("t_start: log grids need t_start > 0")
        if self.rate not in ("alpha", "beta"):
            try:
                r = float(self.rate)
            except ValueError:
                raise ParameterError(f"rate: must be alpha, beta or a number, got {self.rate!r}") from None
            if not (math.isfinite(r) and r >= 0):
                raise ParameterError(f"rate: must be a nonnegative number, got {self.rate!r}")
        if self.char not in ("born", "alive"):
            raise ParameterError(f"char: must be 'born' or 'alive', got {self.char!r}")
        for name in ("horizons", "ages", "snapshots"):
            vals = getattr(self, name)
            if any(not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0) for v in vals):
                raise ParameterError(f"{name}: entries must be finite and nonnegative")
        if any(y <= x for x, y in zip(self.horizons, self.horizons[1:])):
            raise ParameterError("horizons: must be strictly increasing")
        if any(s > self.horizon for s in self.snapshots):
            raise ParameterError("snapshots: times must not exceed the horizon")

    @property
    def grid_stop(self) -> float:
        return self.horizon if self.t_stop is None else self.t_stop

    def t_grid(self) -> np.ndarray:
        if self.t_points == 1:
            return np.array([self.grid_stop])
        if self.t_scale == "log":
            return np.geomspace(self.t_start, self.grid_stop, self.t_points)
        return np.linspace(self.t_start, self.grid_stop, self.t_points)

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        doc = {"schema": CONFIG_SCHEMA, "version": 1, "config": self.to_dict()}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"config: unknown fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        doc = json.loads(text)
        if isinstance(doc, dict) and "config" in doc:
            doc = doc["config"]
        if not isinstance(doc, dict):
            raise ParameterError("config: expected a JSON object")
        return cls.from_dict(doc)


# ---------------------------------------------------------------------------
# output helpers


def _plain(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, Regime):
        return x.value
    return x


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".partial")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


class Output:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = Path(cfg.outdir or os.environ.get(OUTDIR_ENV) or ".")
        self.base = cfg.name or cfg.subcommand
        self.written: list[Path] = []

    def path(self, suffix: str) -> Path:
        return self.dir / f"{self.base}{suffix}"

    def json(self, suffix: str, result) -> Path:
        doc = {"config": self.cfg.to_dict(), "tool_version": __version__,
               "seed": self.cfg.seed, "result": result}
        text = json.dumps(_plain(doc), sort_keys=True, indent=1, ensure_ascii=False) + "\n"
        p = self.path(suffix)
        _write_atomic(p, text)
        self.written.append(p)
        return p

    def csv(self, suffix: str, columns: Sequence[str], rows: Sequence[dict]) -> Path:
        buf = io.StringIO()
        buf.write(f"# config: {json.dumps(_plain(self.cfg.to_dict()), sort_keys=True)}\n")
        buf.write(f"# tool_version: {__version__}\n")
        buf.write(f"# seed: {self.cfg.seed}\n")
        writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        p = self.path(suffix)
        _write_atomic(p, buf.getvalue())
        self.written.append(p)
        return p


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip form, '.' decimal
    return v


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(cfg: RunConfig, out: Output, threads: int) -> int:
    params = cfg.params()
    ks = sorted({2, 3, int(cfg.k)} - {1}) if float(cfg.k).is_integer() else [2, 3]
    report = solve_report(params, ks=tuple(ks), tol=cfg.tol)
    doc = asdict(report)
    doc["regime"]["alpha_status"] = "root" if report.alpha is not None else Regime.NOT_SUPERCRITICAL.value
    doc["regime"]["beta_status"] = (
        "root" if report.beta is not None else Regime.DEGREE_NOT_SUPERCRITICAL.value
    )
    out.json(".json", doc)
    return EXIT_OK if report.alpha is not None else EXIT_REGIME


def cmd_simulate(cfg: RunConfig, out: Output, threads: int) -> int:
    params = cfg.params()
    grid = cfg.t_grid()

    def one(r):
        g = run_collab(params, cfg.horizon, cfg.event_budget, cfg.seed, replica=r)
        ok = grid < g.complete_until if g.exhausted_budget else np.ones(grid.size, bool)
        rows = timeseries_rows(g, grid[ok])
        snap = snapshot_json(g, cfg.snapshots) if cfg.snapshots and not cfg.aggregate else None
        status = {"replica": r, "exhausted_budget": g.exhausted_budget,
                  "complete_until": g.complete_until, "edges": len(g.edges),
                  "vertices": g.n_vertices}
        return rows, snap, status

    results = streams.fan_out(one, range(cfg.replicas), threads)
    statuses = [s for _, _, s in results]
    if cfg.aggregate:
        numeric = [c for c in TIMESERIES_COLUMNS if c != "t"]
        columns = ["t", "replicas"] + [f"{c}_{s}" for c in numeric for s in ("mean", "se")]
        agg_rows = []
        for j, t in enumerate(grid):
            vals = [rows[j] for rows, _, _ in results if j < len(rows)]
            row = {"t": float(t), "replicas": len(vals)}
            for c in numeric:
                x = np.array([v[c] for v in vals], dtype=float)
                x = x[np.isfinite(x)]
                row[f"{c}_mean"] = float(x.mean()) if x.size else float("nan")
                row[f"{c}_se"] = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else float("nan")
            agg_rows.append(row)
        out.csv(".csv", columns, agg_rows)
    else:
        for r, (rows, snap, _) in enumerate(results):
            out.csv(f"_r{r:04d}.csv", TIMESERIES_COLUMNS, rows)
            if snap is not None:
                p = out.path(f"_r{r:04d}_snapshots.json")
                _write_atomic(p, snap + "\n")
    out.json("_status.json", {"replicas": statuses,
                              "exhausted": sum(s["exhausted_budget"] for s in statuses)})
    return EXIT_OK


def _resolve_rate(cfg: RunConfig, params: ModelParams):
    if cfg.rate == "alpha":
        return solve_alpha(params, cfg.tol)
    if cfg.rate == "beta":
        return solve_beta(params, cfg.tol)
    return float(cfg.rate)


def cmd_moments(cfg: RunConfig, out: Output, threads: int) -> int:
    params = cfg.params()
    rate = _resolve_rate(cfg, params)
    if isinstance(rate, Regime):
        out.json(".json", {"regime": rate.value})
        return EXIT_REGIME
    char = Characteristic.parse(cfg.char)
    grid = cfg.t_grid()
    series = lk_series(params, char, cfg.k, rate, grid, cfg.replicas, cfg.seed,
                       event_budget=cfg.event_budget, threads=threads)
    result = {"series": series.to_dict(), "rate_value": rate}
    k1 = series if cfg.k == 1 else series_from_samples(
        series.samples, 1, rate, grid, excluded=series.excluded, seed=cfg.seed, char=cfg.char)
    if cfg.k == 1:
        s, se, ci = series.tail_slope()
        result["tail_slope"] = {"slope": s, "se": se, "ci95": list(ci), "contains_zero": ci[0] <= 0 <= ci[1]}
    rows = series.csv_rows()
    if cfg.k >= 2 and float(cfg.k).is_integer() and cfg.rate == "alpha":
        rep = bound_report(params, char, int(cfg.k), k1, cfg.mc_samples, cfg.seed + 1, alpha=rate)
        result["bound"] = asdict(rep)
        dominated = [e <= rep.norm_bound + 3 * s for e, s in zip(series.estimates, series.se)]
        result["dominated"] = all(dominated)
        for row, d in zip(rows, dominated):
            row["bound"] = rep.norm_bound
            row["dominated"] = d
    columns = ["t", "estimate", "se"] + (["bound", "dominated"] if "bound" in result else [])
    out.csv(".csv", columns, rows)
    out.json(".json", result)
    return EXIT_OK


def cmd_maxdeg(cfg: RunConfig, out: Output, threads: int) -> int:
    params = cfg.params()
    alpha = solve_alpha(params, cfg.tol)
    beta = solve_beta(params, cfg.tol)
    if isinstance(alpha, Regime) or isinstance(beta, Regime):
        out.json(".json", {"alpha": _plain(alpha), "beta": _plain(beta),
                           "regime": "edge or degree process not supercritical"})
        print("maxdeg: both alpha and beta must exist (beta absent)", file=sys.stderr)
        return EXIT_REGIME
    if not cfg.k > alpha / beta:
        out.json(".json", {"alpha": alpha, "beta": beta, "required_k_above": alpha / beta})
        print(f"maxdeg: k must exceed alpha/beta = {alpha / beta:.6g}", file=sys.stderr)
        return EXIT_REGIME
    rep = delta_report(params, cfg.horizons, cfg.replicas, cfg.k, cfg.seed,
                       event_budget=cfg.event_budget, threads=threads)
    rows = []
    for r in range(rep.replicas):
        for j, T in enumerate(rep.horizons):
            rows.append({"replica": r, "T": T, "scaled_max": rep.scaled_max[r][j],
                         "delta_hat": rep.delta_hat[r][j], "identity_holds": rep.identity_holds[r][j]})
    out.csv(".csv", ["replica", "T", "scaled_max", "delta_hat", "identity_holds"], rows)
    doc = asdict(rep)
    doc["identity_all"] = all(all(x) for x in rep.identity_holds)
    out.json(".json", doc)
    return EXIT_OK


def cmd_relabel(cfg: RunConfig, out: Output, threads: int) -> int:
    if not cfg.input:
        raise ParameterError("input: relabel needs --input TREE.json")
    tree = FamilyTree.from_json(Path(cfg.input).read_text(encoding="utf-8"))
    res = relabel_tree(tree, cfg.depth_cap)
    doc = json.loads(res.tree.to_json())
    doc.update({"config": _plain(cfg.to_dict()), "tool_version": __version__, "seed": cfg.seed,
                "cap_hit": res.cap_hit, "steps": res.steps})
    p = out.path(".json")
    _write_atomic(p, json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n")
    out.written.append(p)
    return EXIT_CAP if res.cap_hit else EXIT_OK


def cmd_crosscheck(cfg: RunConfig, out: Output, threads: int) -> int:
    params = cfg.params()
    alpha = solve_alpha(params, cfg.tol)
    if isinstance(alpha, Regime):
        out.json(".json", {"regime": alpha.value})
        return EXIT_REGIME
    cc = degree_cmj_crosscheck(params, cfg.ages, cfg.replicas, cfg.seed, birth_cap=cfg.birth_cap,
                               event_budget=cfg.event_budget, threads=threads)
    mean, se = mc_discounted_reproduction(params, alpha, cfg.mc_samples, cfg.seed)
    mc_z = (mean - 1.0) / se
    doc = {
        "degree_crosscheck": cc.to_dict(),
        "degree_consistent": all(abs(z) <= 3 for z in cc.z_scores),
        "discounted_reproduction": {"alpha": alpha, "mean": mean, "se": se, "z": mc_z,
                                    "consistent": abs(mc_z) <= 3},
    }
    out.json(".json", doc)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "maxdeg": cmd_maxdeg,
    "relabel": cmd_relabel,
    "crosscheck": cmd_crosscheck,
}


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmjlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cmjlab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    S = argparse.SUPPRESS  # unset flags stay absent so config files can fill them

    def common(p):
        p.add_argument("--config", help="JSON RunConfig file")
        p.add_argument("--threads", type=int, default=1, help="replica worker threads")
        p.add_argument("--outdir", default=S, help=f"output directory (default ${OUTDIR_ENV} or .)")
        p.add_argument("--name", default=S, help="output base name")
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--tol", type=float, default=S)

    def model(p):
        p.add_argument("--b", type=float, default=S)
        p.add_argument("--c", type=float, default=S)
        p.add_argument("--p", type=float, default=S)

    def grid(p):
        p.add_argument("--horizon", type=float, default=S)
        p.add_argument("--t-start", dest="t_start", type=float, default=S)
        p.add_argument("--t-stop", dest="t_stop", type=float, default=S)
        p.add_argument("--t-points", dest="t_points", type=int, default=S)
        p.add_argument("--t-scale", dest="t_scale", choices=("linear", "log"), default=S)

    def mc(p):
        p.add_argument("--replicas", type=int, default=S)
        p.add_argument("--event-budget", dest="event_budget", type=int, default=S)

    p = sub.add_parser("solve", help="solve for alpha, beta, z and m_k")
    common(p), model(p)
    p.add_argument("--k", type=float, default=S)

    p = sub.add_parser("simulate", help="simulate collaboration graphs, write CSV time series")
    common(p), model(p), grid(p), mc(p)
    p.add_argument("--aggregate", action="store_true", default=S)
    p.add_argument("--snapshots", type=_floats, default=S, help="comma-separated snapshot times")

    p = sub.add_parser("moments", help="L_k series of a counted process and its bound")
    common(p), model(p), grid(p), mc(p)
    p.add_argument("--k", type=float, default=S)
    p.add_argument("--char", choices=("born", "alive"), default=S)
    p.add_argument("--rate", default=S, help="alpha, beta or a number")
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=S)

    p = sub.add_parser("maxdeg", help="maximal-degree convergence report")
    common(p), model(p), mc(p)
    p.add_argument("--k", type=float, default=S)
    p.add_argument("--horizons", type=_floats, default=S)

    p = sub.add_parser("relabel", help="remove same-instant parent-child pairs from a family tree")
    common(p)
    p.add_argument("--input", default=S)
    p.add_argument("--depth-cap", dest="depth_cap", type=int, default=S)

    p = sub.add_parser("crosscheck", help="degree process and discounted reproduction consistency")
    common(p), model(p), mc(p)
    p.add_argument("--ages", type=_floats, default=S)
    p.add_argument("--birth-cap", dest="birth_cap", type=float, default=S)
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=S)
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Flags override the config file, which overrides defaults."""
    values = RunConfig(subcommand=ns.subcommand).to_dict()
    if ns.config:
        file_cfg = RunConfig.from_json(Path(ns.config).read_text(encoding="utf-8")).to_dict()
        values.update({k: v for k, v in file_cfg.items() if k != "subcommand"})
    for k, v in vars(ns).items():
        if k in values and k != "subcommand":
            values[k] = v
    cfg = RunConfig.from_dict(values)
    if cfg.subcommand == "maxdeg" and cfg.horizons:
        cfg.horizon = max(cfg.horizon, max(cfg.horizons))
    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve_config(ns)
        cfg.validate()
        if ns.threads < 1:
            raise ParameterError("threads: must be at least 1")
        out = Output(cfg)
        code = COMMANDS[cfg.subcommand](cfg, out, ns.threads)
    except (CMJError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"cmjlab {ns.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for p in out.written:
        print(p)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
