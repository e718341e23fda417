"""Experiment specification, batch execution, logging and aggregation."""

import csv
from dataclasses import asdict, dataclass, field, fields, replace
import json
import logging
import math
from pathlib import Path
from typing import List, Optional

import numpy as np

from .benchmarks import OBJECTIVES, make_objective
from .engine import ALGORITHMS, AlgorithmConfig, RunResult, run
from .restarts import interleaved_runner, run_seeds, schedule_slices

__all__ = [
    "ConfigError",
    "ExperimentSpec",
    "RunRecord",
    "AggregateReport",
    "parse_config",
    "spec_from_dict",
    "execute_experiment",
    "aggregate",
    "emit_report",
    "read_summary",
    "state_snapshot",
    "CSV_COLUMNS",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("experiment_id", "run_index", "seed", "termination", "evaluations", "best_fitness")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentSpec:
    algorithm: str = "xnes"
    objective: str = "sphere"
    dim: int = 2
    instance_seed: Optional[int] = None
    popsize: Optional[int] = None
    eta_mu: float = 1.0
    eta_sigma: Optional[float] = None
    eta_B: Optional[float] = None
    eta_sbar: Optional[float] = None
    importance_mixing: bool = False
    alpha: float = 0.1
    adaptation_sampling: bool = False
    restart_p: Optional[float] = None
    min_slice: Optional[int] = None
    repetitions: int = 1
    seed: int = 0
    target_precision: float = 1e-7
    budget: int = 10_000
    x0: Optional[List[float]] = None
    sigma0: float = 1.0
    experiment_id: str = "experiment"

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algorithm", f"unknown algorithm {self.algorithm!r}")
        if self.objective not in OBJECTIVES:
            raise ConfigError("objective", f"unknown objective {self.objective!r}")
        if self.dim < 1:
            raise ConfigError("dim", "must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions", "must be >= 1")
        if not self.target_precision > 0:
            raise ConfigError("target_precision", "must be positive")
        if self.budget < 1:
            raise ConfigError("budget", "must be positive")
        if not self.sigma0 > 0:
            raise ConfigError("sigma0", "must be positive")
        if self.restart_p is not None and not 0.0 < self.restart_p <= 1.0:
            raise ConfigError("restart_p", "must lie in (0, 1]")
        if self.x0 is not None and len(self.x0) != self.dim:
            raise ConfigError("x0", f"needs {self.dim} entries")
        try:
            AlgorithmConfig(**self._config_kwargs()).validate(self.algorithm)
        except ValueError as exc:
            raise ConfigError("config", str(exc)) from None

    def _config_kwargs(self):
        return dict(popsize=self.popsize, eta_mu=self.eta_mu, eta_sigma=self.eta_sigma,
                    eta_B=self.eta_B, eta_sbar=self.eta_sbar,
                    importance_mixing=self.importance_mixing, alpha=self.alpha,
                    adaptation_sampling=self.adaptation_sampling)

    def resolved(self):
        """Copy with population size and learning rates filled in from the defaults."""
        cfg = AlgorithmConfig(**self._config_kwargs()).resolved(self.dim, self.algorithm)
        min_slice = self.min_slice if self.min_slice is not None else 50 * self.dim
        return replace(self, popsize=cfg.popsize, eta_sigma=cfg.eta_sigma, eta_B=cfg.eta_B,
                       eta_sbar=cfg.eta_sbar, min_slice=min_slice)

    def algorithm_config(self, target, budget):
        return AlgorithmConfig(target=target, max_evals=budget, **self._config_kwargs())


_ALIASES = {
    "algo": "algorithm",
    "pop_size": "popsize",
    "lambda": "popsize",
    "id": "experiment_id",
    "target": "target_precision",
    "max_evals": "budget",
}

_KINDS = {
    "algorithm": str, "objective": str, "experiment_id": str,
    "dim": int, "repetitions": int, "seed": int, "budget": int,
    "instance_seed": int, "popsize": int, "min_slice": int,
    "eta_mu": float, "eta_sigma": float, "eta_B": float, "eta_sbar": float, "alpha": float,
    "restart_p": float, "target_precision": float, "sigma0": float,
    "importance_mixing": bool, "adaptation_sampling": bool,
    "x0": list,
}
_NULLABLE = {"instance_seed", "popsize", "min_slice", "eta_sigma", "eta_B", "eta_sbar",
             "restart_p", "x0"}
_TYPES = {f.name for f in fields(ExperimentSpec)}
assert _TYPES == set(_KINDS)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(key, value):
    kind = _KINDS[key]
    if value is None:
        if key in _NULLABLE:
            return None
        raise ConfigError(key, "must not be null")
    if kind is list:
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            raise ConfigError(key, "expected a list of numbers")
        return [float(v) for v in value]
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {type(value).__name__}")
        return value
    if kind is int:
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {type(value).__name__}")
        return value
    if kind is float:
        if not _is_number(value):
            raise ConfigError(key, f"expected a number, got {type(value).__name__}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(key, f"expected a string, got {type(value).__name__}")
    return value


def spec_from_dict(data, resolve=True):
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    kwargs = {}
    for raw_key, value in data.items():
        key = _ALIASES.get(raw_key, raw_key).replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(raw_key, "unknown key")
        if key in kwargs:
            raise ConfigError(raw_key, "given more than once")
        kwargs[key] = _coerce(key, value)
    spec = ExperimentSpec(**kwargs)
    spec.validate()
    return spec.resolved() if resolve else spec


def parse_config(text, resolve=True):
    """Parse a JSON experiment description into a validated :class:`ExperimentSpec`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    return spec_from_dict(data, resolve)


@dataclass(eq=False)
class RunRecord:
    experiment_id: str
    run_index: int
    seed: int
    result: RunResult


@dataclass(frozen=True)
class AggregateReport:
    experiment_id: str
    runs: int
    successes: int
    success_rate: float
    median_evaluations: Optional[float]
    q1_evaluations: Optional[float]
    q3_evaluations: Optional[float]
    best_fitness: tuple = field(default_factory=tuple)

    def as_dict(self):
        return asdict(self)


def aggregate(records, experiment_id=None):
    """Success rate, evaluation quartiles over successful runs, and the sorted best-fitness values.

    ``records`` may be :class:`RunRecord` objects or rows with ``termination``,
    ``evaluations`` and ``best_fitness`` keys (as read back from a summary CSV).
    """
    rows = []
    for r in records:
        if isinstance(r, RunRecord):
            rows.append((r.run_index, r.result.termination, r.result.evaluations,
                         float(r.result.best_fitness), r.experiment_id))
        else:
            rows.append((int(r["run_index"]), r["termination"], int(r["evaluations"]),
                         float(r["best_fitness"]), r["experiment_id"]))
    if not rows:
        raise ValueError("no results to aggregate")
    rows.sort(key=lambda t: t[0])
    evals = np.array([t[2] for t in rows if t[1] == "target-hit"], dtype=float)
    if evals.size:
        q1, med, q3 = (float(v) for v in np.percentile(evals, [25, 50, 75]))
    else:
        q1 = med = q3 = None
    return AggregateReport(
        experiment_id=experiment_id or rows[0][4],
        runs=len(rows),
        successes=int(evals.size),
        success_rate=evals.size / len(rows),
        median_evaluations=med,
        q1_evaluations=q1,
        q3_evaluations=q3,
        best_fitness=tuple(sorted(t[3] for t in rows)),
    )


def _target(objective, precision):
    if objective.optimum_value is None:
        return None
    return objective.optimum_value + precision


def _error_result(spec, exc):
    return RunResult(spec.algorithm, "error", None, math.nan, 0, 0, None, [], repr(exc))


def execute_experiment(spec, out_dir=None):
    """Run ``spec.repetitions`` independently seeded runs.

    Returns ``(records, report)``. When ``out_dir`` is given the per-generation
    trace (``<id>.jsonl``) and the summary (``<id>.csv``) are written there.
    Exceptions inside a run are recorded as termination ``"error"``.
    """
    spec = spec.resolved()
    try:
        objective = make_objective(spec.objective, spec.dim, spec.instance_seed)
    except ValueError as exc:
        raise ConfigError("objective", str(exc)) from None
    target = _target(objective, spec.target_precision)
    x0 = np.zeros(spec.dim) if spec.x0 is None else np.asarray(spec.x0, dtype=float)

    def single(budget, seed):
        return run(spec.algorithm, objective, spec.algorithm_config(target, budget), seed,
                   x0=x0, sigma0=spec.sigma0)

    records = []
    for i, seed in enumerate(run_seeds(spec.seed, spec.repetitions)):
        try:
            if spec.restart_p is None:
                result = single(spec.budget, seed)
            else:
                schedule = schedule_slices(spec.restart_p, spec.budget, spec.min_slice)
                if not schedule.slices:
                    schedule = schedule_slices(1.0, spec.budget)
                result = interleaved_runner(single, schedule, seed)
        except Exception as exc:  # recorded, not fatal to the campaign
            log.error("run %d of %s failed: %r", i, spec.experiment_id, exc)
            result = _error_result(spec, exc)
        records.append(RunRecord(spec.experiment_id, i, seed, result))

    report = aggregate(records, spec.experiment_id)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_report(records, "jsonl", out / f"{spec.experiment_id}.jsonl")
        emit_report(records, "csv", out / f"{spec.experiment_id}.csv")
    return records, report


def _floats(a):
    return np.asarray(a, dtype=float).tolist()


def state_snapshot(state):
    """JSON-friendly view of a distribution state: its fields plus the overall scale."""
    if state is None:
        return None
    snap = {}
    for name in state.__dataclass_fields__:
        value = getattr(state, name)
        snap[name] = float(value) if np.isscalar(value) else _floats(value)
    if "sigma" not in snap:
        try:
            snap["sigma"] = float(state.sigma)
        except (ArithmeticError, ValueError):
            pass
    return snap


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def _jsonl_lines(record):
    result = record.result
    subruns = result.runs or [result]
    for j, sub in enumerate(subruns):
        for g in sub.trace:
            row = {
                "experiment_id": record.experiment_id,
                "run_index": record.run_index,
                "restart": j,
                "generation": g.generation,
                "evaluations": g.evaluations,
                "fresh": g.fresh,
                "best_fitness": _json_float(g.best_fitness),
                "eta": g.eta,
                "state": state_snapshot(g.state),
            }
            yield json.dumps(row, sort_keys=True)


def emit_report(records, fmt, path):
    """Write records as a summary CSV (one row per run) or a JSONL trace (one line per generation)."""
    records = list(records)
    if not records:
        raise ValueError("no results to write")
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in records:
                writer.writerow([r.experiment_id, r.run_index, r.seed, r.result.termination,
                                 r.result.evaluations, repr(float(r.result.best_fitness))])
    elif fmt == "jsonl":
        with path.open("w") as fh:
            for r in records:
                for line in _jsonl_lines(r):
                    fh.write(line + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}; use 'csv' or 'jsonl'")
    return path


def read_summary(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
