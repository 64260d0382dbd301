"""Config-driven experiment runner: data loading, multi-seed runs, trace and summary files.

Config documents are flat JSON objects; see ``FIELDS`` for the schema and
``configs/small_sigma_w1a_like.json`` for a complete example. Output layout::

    <out>/trace_<optimizer>_seed<k>.csv   one per (optimizer, seed)
    <out>/summary.csv                     mean loss per optimizer on a common oracle-call grid
    <out>/runs.json                       one RunSummary per run

Trace files start with ``#`` metadata lines (the only place timestamps
appear) followed by a CSV body that is a pure function of (config, seed, data).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import data, objectives
from .optimizers import KINDS, SancConfig, Trace, run
from .sampling import BatchSpec

logger = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "t", "f_value", "grad_norm", "sigma", "rho", "step_kind",
    "success_class", "ritz_value", "step_norm", "oracle_calls_cum",
)
COST_MODEL = (
    "one oracle call = one per-example gradient, Hessian-vector product or function value; "
    "f_value is the exact full-data loss (charged only when the method uses it)"
)
OBJECTIVES = ("logistic", "svm", "saddle")
SYNTHETIC = ("w1a_like",)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    optimizers: tuple
    seeds: tuple = (0,)
    dataset: Optional[str] = None
    synthetic: Optional[str] = None
    synthetic_n: int = 2477
    synthetic_d: int = 300
    data_seed: int = 0
    max_rows: Optional[int] = None
    dim: Optional[int] = None
    scale: bool = False
    objective: str = "logistic"
    lam: float = 1.0
    saddle_dim: int = 10
    batch_fraction: Optional[float] = None
    batch_g: Optional[int] = None
    batch_B: Optional[int] = None
    replacement: bool = False
    budget: Optional[int] = None
    out: str = "runs"
    workers: int = 1
    grid_points: int = 101
    solver: dict = field(default_factory=dict)  # SancConfig overrides

    def sanc_config(self, seed: int, n: int) -> SancConfig:
        return SancConfig(batch=self.batch_spec(n), seed=seed, budget=self.budget, **self.solver)

    def batch_spec(self, n: int) -> Optional[BatchSpec]:
        if self.batch_fraction is not None:
            size = math.ceil(n * self.batch_fraction)
            return BatchSpec(size, size, self.replacement)
        if self.batch_g is None and self.batch_B is None:
            return None
        return BatchSpec(self.batch_g or n, self.batch_B or n, self.replacement)


# name -> (accepted types, default); ``lambda`` maps to ``lam``.
_SOLVER_FIELDS = {
    f.name: f.default for f in fields(SancConfig) if f.name not in ("batch", "seed", "budget")
}
_NUMBER = (int, float)
FIELDS = {
    "optimizers": (list, None),
    "seeds": (list, [0]),
    "dataset": (str, None),
    "synthetic": (str, None),
    "synthetic_n": (int, 2477),
    "synthetic_d": (int, 300),
    "data_seed": (int, 0),
    "max_rows": (int, None),
    "dim": (int, None),
    "scale": (bool, False),
    "objective": (str, "logistic"),
    "lambda": (_NUMBER, 1.0),
    "saddle_dim": (int, 10),
    "batch_fraction": (_NUMBER, None),
    "batch_g": (int, None),
    "batch_B": (int, None),
    "replacement": (bool, False),
    "budget": (int, None),
    "out": (str, "runs"),
    "workers": (int, 1),
    "grid_points": (int, 101),
}
for _name, _default in _SOLVER_FIELDS.items():
    FIELDS[_name] = ((str,) if isinstance(_default, str) else (int,) if isinstance(_default, int) else _NUMBER, _default)


def _typed(name: str, value, types):
    types = types if isinstance(types, tuple) else (types,)
    if value is None:
        return None
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(name, f"expected {'/'.join(t.__name__ for t in types)}, got bool")
    if not isinstance(value, types):
        raise ConfigError(name, f"expected {'/'.join(t.__name__ for t in types)}, got {type(value).__name__}")
    return float(value) if float in types and not isinstance(value, bool) else value


def validate_config(raw) -> ExperimentConfig:
    """Check a parsed config document and return a typed config with defaults applied."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a key/value object")
    unknown = sorted(set(raw) - set(FIELDS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    vals = {}
    for name, (types, default) in FIELDS.items():
        vals[name] = _typed(name, raw[name], types) if name in raw else default

    opts = vals["optimizers"]
    if not opts:
        raise ConfigError("optimizers", "at least one optimizer required")
    for k in opts:
        if k not in KINDS:
            raise ConfigError("optimizers", f"unknown optimizer {k!r} (choose from {', '.join(KINDS)})")
    seeds = vals["seeds"]
    if not seeds:
        raise ConfigError("seeds", "at least one seed required")
    if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ConfigError("seeds", "seeds must be nonnegative integers")
    if vals["objective"] not in OBJECTIVES:
        raise ConfigError("objective", f"must be one of {', '.join(OBJECTIVES)}")
    if vals["objective"] != "saddle":
        if (vals["dataset"] is None) == (vals["synthetic"] is None):
            raise ConfigError("dataset", "give exactly one of dataset or synthetic")
        if vals["synthetic"] is not None and vals["synthetic"] not in SYNTHETIC:
            raise ConfigError("synthetic", f"must be one of {', '.join(SYNTHETIC)}")
    for name in ("budget", "synthetic_n", "synthetic_d", "workers", "batch_g", "batch_B", "max_rows", "dim"):
        if vals[name] is not None and vals[name] < 1:
            raise ConfigError(name, "must be >= 1")
    if vals["grid_points"] < 2:
        raise ConfigError("grid_points", "must be >= 2")
    if vals["batch_fraction"] is not None:
        if not 0 < vals["batch_fraction"] <= 1:
            raise ConfigError("batch_fraction", "must lie in (0, 1]")
        if vals["batch_g"] is not None or vals["batch_B"] is not None:
            raise ConfigError("batch_fraction", "cannot be combined with batch_g/batch_B")
    if vals["lambda"] < 0:
        raise ConfigError("lambda", "must be nonnegative")
    if not vals["eta1"] < vals["eta2"]:
        raise ConfigError("eta1", "eta1 < eta2 required")

    solver = {name: vals.pop(name) for name in _SOLVER_FIELDS}
    try:
        SancConfig(**solver)
    except ValueError as exc:
        msg = str(exc)
        name = next((n for n in _SOLVER_FIELDS if msg.startswith(n) or f" {n}" in msg), "<solver>")
        raise ConfigError(name, msg) from None

    vals["lam"] = vals.pop("lambda")
    vals["optimizers"], vals["seeds"] = tuple(opts), tuple(seeds)
    return ExperimentConfig(solver=solver, **vals)


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON ({exc})") from None
    return validate_config(raw)


def build_model(cfg: ExperimentConfig):
    if cfg.objective == "saddle":
        return objectives.synthetic_saddle(cfg.saddle_dim)
    if cfg.dataset is not None:
        ds = data.parse_libsvm(cfg.dataset, dim=cfg.dim, max_rows=cfg.max_rows)
    else:
        ds = data.make_w1a_like(cfg.synthetic_n, cfg.synthetic_d, seed=cfg.data_seed)
        if cfg.max_rows is not None:
            ds = ds.head(cfg.max_rows)
    if cfg.scale:
        ds = data.scale_unit_range(ds)
    if cfg.objective == "logistic":
        return objectives.logistic_nonconvex(data.map_labels(ds, "zero_one"), cfg.lam)
    return objectives.nonconvex_svm(data.map_labels(ds, "plus_minus"), cfg.lam)


@dataclass(frozen=True)
class RunSummary:
    optimizer: str
    seed: int
    final_loss: float
    iterations: int
    oracle_calls: int
    unsuccessful: int
    wall_time: float
    stop_reason: str

    @classmethod
    def from_trace(cls, trace: Trace, wall_time: float) -> "RunSummary":
        return cls(
            trace.kind, trace.seed, trace.final_f_value, len(trace.records),
            trace.oracle_calls, trace.unsuccessful, wall_time, trace.stop_reason,
        )


def _field(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trace_body(trace: Trace) -> str:
    """CSV body (header row plus one row per iteration), LF line endings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace.records:
        w.writerow([_field(getattr(r, c)) for c in TRACE_COLUMNS])
    return buf.getvalue()


def trace_metadata(trace: Trace, cfg: ExperimentConfig) -> list[str]:
    return [
        f"optimizer: {trace.kind}",
        f"seed: {trace.seed}",
        f"initial_f_value: {trace.initial_f_value!r}",
        f"initial_oracle_calls: {trace.initial_oracle_calls}",
        f"stop_reason: {trace.stop_reason}",
        f"objective: {cfg.objective} lambda={cfg.lam!r}",
        f"data: {cfg.dataset or cfg.synthetic or 'none'} scale={'unit_range' if cfg.scale else 'none'}",
        f"cost_model: {COST_MODEL}",
        f"created: {datetime.now(timezone.utc).isoformat(timespec='seconds')}",
    ]


def write_trace(trace: Trace, cfg: ExperimentConfig, path) -> None:
    head = "".join(f"# {line}\n" for line in trace_metadata(trace, cfg))
    Path(path).write_text(head + trace_body(trace), encoding="utf-8", newline="\n")


def read_trace(path) -> tuple[dict, list[dict]]:
    """Parse a trace file into (metadata, rows); empty fields come back as None."""
    meta, body = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                meta[key] = value
            else:
                body.append(line)
    rows = [{k: (v if v != "" else None) for k, v in row.items()} for row in csv.DictReader(body)]
    return meta, rows


def trace_curve(meta: dict, rows: list[dict]) -> tuple[np.ndarray, np.ndarray]:
    """Oracle calls and losses of one trace, starting at the initial point."""
    calls = [int(meta["initial_oracle_calls"])] + [int(r["oracle_calls_cum"]) for r in rows]
    losses = [float(meta["initial_f_value"])] + [float(r["f_value"]) for r in rows]
    return np.array(calls, dtype=np.float64), np.array(losses)


def mean_curves(curves: dict, grid_points: int = 101) -> tuple[np.ndarray, dict]:
    """Per-optimizer mean loss on a shared oracle-call grid.

    ``curves`` maps optimizer -> list of (calls, losses). The grid runs from 0
    to the shared final budget, the largest call count every run reaches, so
    no run is extrapolated past its last record. Losses between records are
    linearly interpolated.
    """
    shared = min(c[-1] for runs in curves.values() for c, _ in runs)
    grid = np.linspace(0.0, shared, grid_points)
    means = {k: np.mean([np.interp(grid, c, f) for c, f in runs], axis=0) for k, runs in curves.items()}
    return grid, means


def summarize(trace_paths, grid_points: int = 101) -> tuple[np.ndarray, dict]:
    """Summary statistics recomputed from trace files alone."""
    curves: dict = {}
    for p in trace_paths:
        meta, rows = read_trace(p)
        curves.setdefault(meta["optimizer"], []).append(trace_curve(meta, rows))
    return mean_curves(curves, grid_points)


def write_summary(grid, means: dict, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    kinds = list(means)
    w.writerow(["oracle_calls"] + [f"mean_loss_{k}" for k in kinds])
    for i, c in enumerate(grid):
        w.writerow([repr(float(c))] + [repr(float(means[k][i])) for k in kinds])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def _run_one(cfg: ExperimentConfig, kind: str, seed: int, model=None) -> tuple[Trace, float]:
    model = build_model(cfg) if model is None else model
    start = time.perf_counter()
    trace = run(kind, model, cfg.sanc_config(seed, model.n))
    return trace, time.perf_counter() - start


def run_experiment(cfg: ExperimentConfig) -> list[RunSummary]:
    """Run every (optimizer, seed) pair, write traces, summary.csv and runs.json to ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(k, s) for k in cfg.optimizers for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, [cfg] * len(jobs), *zip(*jobs)))
    else:
        model = build_model(cfg)
        results = [_run_one(cfg, k, s, model) for k, s in jobs]

    summaries, paths = [], []
    for trace, wall in results:
        path = out / f"trace_{trace.kind}_seed{trace.seed}.csv"
        write_trace(trace, cfg, path)
        paths.append(path)
        summaries.append(RunSummary.from_trace(trace, wall))
        if trace.stop_reason == "error":
            logger.error("%s seed %d ended with an error", trace.kind, trace.seed)
    grid, means = summarize(paths, cfg.grid_points)
    write_summary(grid, means, out / "summary.csv")
    (out / "runs.json").write_text(
        json.dumps([asdict(s) for s in summaries], indent=2) + "\n", encoding="utf-8", newline="\n"
    )
    return summaries
