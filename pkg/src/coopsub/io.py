"""Instance files, result records and comparison tables.

Instances are JSON documents checked against ``INSTANCE_SCHEMA`` before any
object is built; unknown keys are rejected.  Results are flat JSON records
and comparison runs are comma-separated tables with a fixed header.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .algorithms import SolveReport
from .core import CooperativeCost, SetFunction, cost_from_dict, oracle_from_dict
from .linear_solvers import ConstraintSpec, constraint_from_dict

FORMAT_VERSION = "1"


class InstanceError(ValueError):
    """Schema or parameter problem in an instance file; ``field`` names the culprit."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


_num = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_pair = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2}


def _obj(props, required):
    return {"type": "object", "properties": props, "required": required, "additionalProperties": False}


CONCAVE_SCHEMA = {"oneOf": [
    _obj({"type": {"const": "power"}, "exponent": _num}, ["type", "exponent"]),
    _obj({"type": {"const": "log1p"}, "scale": _num}, ["type"]),
    _obj({"type": {"const": "truncation"}, "cap": _num}, ["type", "cap"]),
    _obj({"type": {"const": "explicit_pl"},
          "points": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                     "minItems": 2}}, ["type", "points"]),
]}

COST_SCHEMA = _obj({"components": {"type": "array", "minItems": 1, "items": _obj(
    {"concave": CONCAVE_SCHEMA, "weights": {"type": "array", "items": _nonneg}}, ["concave", "weights"])}},
    ["components"])

CONSTRAINT_SCHEMA = {"oneOf": [
    _obj({"type": {"const": "cardinality"}, "m": {"type": "integer", "minimum": 0},
          "size": {"type": "integer", "minimum": 1}}, ["type", "m", "size"]),
    _obj({"type": {"const": "bipartite_matching"}, "n_left": {"type": "integer", "minimum": 1},
          "n_right": {"type": "integer", "minimum": 1}, "edges": {"type": "array", "items": _pair},
          "mode": {"enum": ["perfect", "maximum"]}}, ["type", "n_left", "n_right", "edges"]),
    _obj({"type": {"const": "shortest_path"}, "n_vertices": {"type": "integer", "minimum": 2},
          "arcs": {"type": "array", "items": _pair}, "source": {"type": "integer", "minimum": 0},
          "target": {"type": "integer", "minimum": 0}}, ["type", "n_vertices", "arcs", "source", "target"]),
    _obj({"type": {"const": "spanning_tree"}, "n_vertices": {"type": "integer", "minimum": 1},
          "edges": {"type": "array", "items": _pair}}, ["type", "n_vertices", "edges"]),
]}

_matrix = {"type": "array", "items": {"type": "array", "items": _num}}

ORACLE_SCHEMA = {"oneOf": [
    _obj({"type": {"const": "facility_location"}, "similarity": _matrix}, ["type", "similarity"]),
    _obj({"type": {"const": "weighted_coverage"}, "incidence": _matrix,
          "weights": {"type": "array", "items": _nonneg}}, ["type", "incidence", "weights"]),
    _obj({"type": {"const": "logdet"}, "kernel": _matrix, "sigma2": _num}, ["type", "kernel"]),
    _obj({"type": {"const": "cooperative"}, "components": COST_SCHEMA["properties"]["components"]},
         ["type", "components"]),
]}

SOLVER_SCHEMA = _obj({
    "algorithm": {"enum": ["pla", "sga"]},
    "epsilon": {"type": "number", "exclusiveMinimum": 0},
    "workers": {"type": "integer", "minimum": 1},
    "heuristic": {"type": "boolean"},
    "early_stop": {"type": "boolean"},
    "partial_enumeration": {"type": ["integer", "null"], "minimum": 1},
    "seed": {"type": "integer"},
    "max_iter": {"type": "integer", "minimum": 1},
}, [])

INSTANCE_SCHEMA = _obj({
    "version": {"const": FORMAT_VERSION},
    "ground_set": _obj({"n": {"type": "integer", "minimum": 1},
                        "labels": {"type": "array", "items": {"type": "string"}}}, ["n"]),
    "cost": COST_SCHEMA,
    "problem": _obj({
        "type": {"enum": [1, 2, 3, 4]},
        "constraint": CONSTRAINT_SCHEMA,
        "oracle": ORACLE_SCHEMA,
        "target": _num,
        "budget": _num,
    }, ["type"]),
    "solver": SOLVER_SCHEMA,
}, ["version", "ground_set", "cost", "problem"])


@dataclass
class SolverConfig:
    algorithm: str = "pla"
    epsilon: float = 0.1
    workers: int = 1
    heuristic: bool = False
    early_stop: bool = False
    partial_enumeration: int | None = None
    seed: int = 0
    max_iter: int = 50


@dataclass
class Instance:
    problem: int
    cost: CooperativeCost
    constraint: ConstraintSpec | None = None
    oracle: SetFunction | None = None
    target: float | None = None
    budget: float | None = None
    labels: list[str] | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def n(self) -> int:
        return self.cost.n

    def to_dict(self) -> dict:
        ground = {"n": self.n}
        if self.labels is not None:
            ground["labels"] = list(self.labels)
        problem = {"type": self.problem}
        if self.constraint is not None:
            problem["constraint"] = self.constraint.to_dict()
        if self.oracle is not None:
            problem["oracle"] = self.oracle.to_dict()
        if self.target is not None:
            problem["target"] = self.target
        if self.budget is not None:
            problem["budget"] = self.budget
        return {"version": FORMAT_VERSION, "ground_set": ground, "cost": self.cost.to_dict(),
                "problem": problem, "solver": asdict(self.solver)}

    def __eq__(self, other):
        return isinstance(other, Instance) and self.to_dict() == other.to_dict()


def _path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    return ".".join(parts) or "<root>"


def instance_from_dict(d: dict) -> Instance:
    validator = jsonschema.Draft202012Validator(INSTANCE_SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(d))
    if err is not None:
        raise InstanceError(err.message, _path(err))
    problem = d["problem"]
    kind = problem["type"]
    try:
        cost = cost_from_dict(d["cost"])
    except ValueError as exc:
        raise InstanceError(str(exc), "cost") from exc
    n = d["ground_set"]["n"]
    if cost.n != n:
        raise InstanceError(f"weights have length {cost.n}, ground set has {n}", "cost.components")
    labels = d["ground_set"].get("labels")
    if labels is not None and len(labels) != n:
        raise InstanceError(f"{len(labels)} labels for {n} elements", "ground_set.labels")
    needs = {1: ["constraint"], 2: ["oracle", "target"], 3: ["oracle", "budget"], 4: ["oracle"]}[kind]
    for key in needs:
        if key not in problem:
            raise InstanceError(f"Problem {kind} requires '{key}'", f"problem.{key}")
    constraint = oracle = None
    if "constraint" in problem:
        try:
            constraint = constraint_from_dict(problem["constraint"])
        except ValueError as exc:
            raise InstanceError(str(exc), "problem.constraint") from exc
        if constraint.n != n:
            raise InstanceError(f"constraint has {constraint.n} elements, ground set has {n}", "problem.constraint")
    if "oracle" in problem:
        try:
            oracle = oracle_from_dict(problem["oracle"])
        except ValueError as exc:
            raise InstanceError(str(exc), "problem.oracle") from exc
        if oracle.n != n:
            raise InstanceError(f"oracle has {oracle.n} elements, ground set has {n}", "problem.oracle")
    solver = SolverConfig(**d.get("solver", {}))
    return Instance(kind, cost, constraint, oracle, problem.get("target"), problem.get("budget"), labels, solver)


def load_instance(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"not valid JSON ({exc.msg} at line {exc.lineno})", "<file>") from exc
    return instance_from_dict(data)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(), indent=1) + "\n")


# ---------------------------------------------------------------------------
# results


def _plain(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    return x


def result_record(report: SolveReport, labels: list[str] | None = None) -> dict:
    """Flatten a SolveReport (nested dicts become prefixed keys) and stamp it."""
    raw = asdict(report)
    raw.pop("candidates", None)
    flat = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                flat[f"{key}_{sub}"] = v
        else:
            flat[key] = value
    if labels is not None:
        flat["chosen_labels"] = [labels[j] for j in report.chosen]
    flat["version"] = __version__
    flat["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return _plain(flat)


def error_record(kind: str, message: str, field: str = "") -> dict:
    return {"status": "error", "error": kind, "message": message, "field": field, "version": __version__}


def write_json(record: dict, path=None) -> str:
    text = json.dumps(record, indent=1, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


TABLE_COLUMNS = ["experiment", "seed", "algorithm", "f", "g", "accuracy", "size", "budget"]


def comparison_rows(records) -> list[dict]:
    rows = []
    for rec in records:
        for algo, metrics in rec.rows.items():
            row = {c: "" for c in TABLE_COLUMNS}
            row.update(experiment=rec.experiment, seed=rec.seed, algorithm=algo)
            for c in TABLE_COLUMNS[3:]:
                if c in metrics:
                    row[c] = repr(float(metrics[c])) if c != "size" else int(metrics[c])
            rows.append(row)
    return rows


def write_table(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        w.writeheader()
        w.writerows(rows)


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
