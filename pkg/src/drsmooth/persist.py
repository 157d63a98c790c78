"""Versioned JSON files for scenarios, parameters, run traces and oracle results, plus trace CSV.

Every document carries ``format`` and ``version`` keys. Floats are written
with Python's shortest round-tripping repr, so ``load(save(x)) == x``.
An infeasible recovered primal is stored as ``null``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .appliances import Appliance, ApplianceChoice, ApplianceKind, HouseholdSpec, TimeHorizon
from .coordinator import IterationRecord, RunTrace
from .errors import SchemaError, VersionError
from .oracle import OracleResult
from .scenario import AlgoParams, Scenario
from .subproblem import AggregatorCostModel

VERSION = 1
CSV_HEADER = ("k", "dual", "primal", "grad_norm", "mu", "mu_hat", "kappa")

_num = {"type": "number"}
_int = {"type": "integer"}
_str = {"type": "string"}
_nums = {"type": "array", "items": _num}


def _doc(fmt: str, props: dict, required: list[str]) -> dict:
    return {
        "type": "object",
        "properties": {"format": {"const": fmt}, "version": _int, **props},
        "required": ["format", "version", *required],
        "additionalProperties": False,
    }


def _obj(props: dict, required: list[str] | None = None) -> dict:
    return {"type": "object", "properties": props, "required": list(props) if required is None else required,
            "additionalProperties": False}


_APPLIANCE = {
    "oneOf": [
        _obj({"id": _str, "kind": {"const": "non_interruptible"},
              "window": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2},
              "profile": {"type": "array", "items": _num, "minItems": 1}}),
        _obj({"id": _str, "kind": {"const": "interruptible"},
              "window": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2},
              "duration": _int, "power": _num}),
    ]
}

SCENARIO_SCHEMA = _doc("drsmooth.scenario", {
    "name": _str,
    "seed": {"type": ["integer", "null"]},
    "horizon": _obj({"num_slots": _int, "start_slot": _int, "slot_duration": _num}),
    "cost": _obj({"c2": _nums, "c1": _nums, "y_max": _nums}),
    "households": {"type": "array", "minItems": 1, "items": _obj({
        "id": _str, "appliances": {"type": "array", "minItems": 1, "items": _APPLIANCE}})},
}, ["name", "seed", "horizon", "cost", "households"])

PARAMS_SCHEMA = _doc("drsmooth.params", {
    "lambda1": {"type": ["array", "null"], "items": _num},
    "kappa1": _num, "kappa_maxiter": _num, "alpha1_coeff": _num, "alpha_maxiter_coeff": _num,
    "mu_hat_min": _num, "maxiter": _int, "worker_count": _int, "rng_seed": _int,
    "prox_mode": {"enum": ["min", "max"]},
    "node_limit": {"type": ["integer", "null"]},
}, [])

_RECORD = _obj({
    "k": _int, "dual": _num, "primal": {"type": ["number", "null"]}, "grad_norm": _num,
    "mu": _num, "mu_hat": _num, "kappa": _num, "lam_hat": _nums, "limited": _int,
})

TRACE_SCHEMA = _doc("drsmooth.trace", {
    "scenario_name": _str,
    "D_X": _num,
    "params": {**PARAMS_SCHEMA, "properties": {k: v for k, v in PARAMS_SCHEMA["properties"].items()
                                               if k not in ("format", "version")}, "required": []},
    "records": {"type": "array", "minItems": 1, "items": _RECORD},
    "best": _obj({"k": _int, "lam_hat": _nums, "mu_hat": _num,
                  "demands": {"type": "object", "additionalProperties": _nums}}),
}, ["scenario_name", "D_X", "params", "records", "best"])


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _validate(doc: Any, schema: dict) -> None:
    if not isinstance(doc, dict):
        raise SchemaError("<root>: expected a JSON object")
    fmt = schema["properties"]["format"]["const"]
    if doc.get("format") != fmt:
        raise SchemaError(f"format: expected {fmt!r}, got {doc.get('format')!r}")
    if doc.get("version") != VERSION:
        raise VersionError(f"unsupported {fmt} version {doc.get('version')!r} (expected {VERSION})")
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise SchemaError("; ".join(f"{_path(e.absolute_path)}: {e.message}" for e in errors[:5]))


def _read(path) -> Any:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from None


def _write(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


# scenario

def scenario_to_dict(s: Scenario) -> dict:
    def app(a: Appliance) -> dict:
        d = {"id": a.id, "kind": a.kind.value, "window": list(a.window)}
        if a.kind is ApplianceKind.NON_INTERRUPTIBLE:
            d["profile"] = list(a.profile)
        else:
            d["duration"] = a.duration
            d["power"] = a.power
        return d

    h = s.horizon
    return {
        "format": "drsmooth.scenario",
        "version": VERSION,
        "name": s.name,
        "seed": s.seed,
        "horizon": {"num_slots": h.num_slots, "start_slot": h.start_slot, "slot_duration": h.slot_duration},
        "cost": {"c2": list(s.cost.c2), "c1": list(s.cost.c1), "y_max": list(s.cost.y_max)},
        "households": [{"id": hh.id, "appliances": [app(a) for a in hh.appliances]} for hh in s.households],
    }


def _domain(where: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ValueError, TypeError) as e:
        raise SchemaError(f"{where}: {e}") from None


def scenario_from_dict(doc: dict) -> Scenario:
    _validate(doc, SCENARIO_SCHEMA)
    horizon = _domain("horizon", TimeHorizon, **doc["horizon"])
    cost = _domain("cost", AggregatorCostModel, **doc["cost"])
    households = []
    for i, hd in enumerate(doc["households"]):
        apps = []
        for j, ad in enumerate(hd["appliances"]):
            where = f"households[{i}].appliances[{j}]"
            if ad["kind"] == "non_interruptible":
                apps.append(_domain(where, Appliance.non_interruptible, ad["id"], tuple(ad["window"]), ad["profile"]))
            else:
                apps.append(_domain(where, Appliance.interruptible, ad["id"], tuple(ad["window"]),
                                    ad["duration"], ad["power"]))
        households.append(_domain(f"households[{i}]", HouseholdSpec, hd["id"], tuple(apps)))
    return _domain("<root>", Scenario, horizon, tuple(households), cost, doc["name"], doc["seed"])


def save_scenario(s: Scenario, path) -> None:
    _write(scenario_to_dict(s), path)


def load_scenario(path) -> Scenario:
    return scenario_from_dict(_read(path))


# parameters

_PARAM_FIELDS = ("lambda1", "kappa1", "kappa_maxiter", "alpha1_coeff", "alpha_maxiter_coeff", "mu_hat_min",
                 "maxiter", "worker_count", "rng_seed", "prox_mode", "node_limit")


def params_to_dict(p: AlgoParams) -> dict:
    d = {"format": "drsmooth.params", "version": VERSION}
    for f in _PARAM_FIELDS:
        v = getattr(p, f)
        d[f] = list(v) if isinstance(v, tuple) else v
    return d


def params_from_dict(doc: dict) -> AlgoParams:
    """Missing fields take their defaults."""
    _validate(doc, PARAMS_SCHEMA)
    return _params(doc)


def _params(doc: dict) -> AlgoParams:
    kw = {f: doc[f] for f in _PARAM_FIELDS if f in doc}
    if kw.get("lambda1") is not None:
        kw["lambda1"] = tuple(kw["lambda1"])
    return _domain("<root>", AlgoParams, **kw)


def save_params(p: AlgoParams, path) -> None:
    _write(params_to_dict(p), path)


def load_params(path) -> AlgoParams:
    return params_from_dict(_read(path))


# traces

def trace_to_dict(t: RunTrace) -> dict:
    def rec(r: IterationRecord) -> dict:
        return {"k": r.k, "dual": r.dual, "primal": r.primal if math.isfinite(r.primal) else None,
                "grad_norm": r.grad_norm, "mu": r.mu, "mu_hat": r.mu_hat, "kappa": r.kappa,
                "lam_hat": list(r.lam_hat), "limited": r.limited}

    return {
        "format": "drsmooth.trace",
        "version": VERSION,
        "scenario_name": t.scenario_name,
        "D_X": t.D_X,
        "params": {k: v for k, v in params_to_dict(t.params).items() if k not in ("format", "version")},
        "records": [rec(r) for r in t.records],
        "best": {"k": t.best_k, "lam_hat": list(t.best_lam_hat), "mu_hat": t.best_mu_hat,
                 "demands": {h: list(v) for h, v in t.best_demands.items()}},
    }


def trace_from_dict(doc: dict) -> RunTrace:
    _validate(doc, TRACE_SCHEMA)
    records = []
    for i, r in enumerate(doc["records"]):
        r = dict(r)
        r["primal"] = math.inf if r["primal"] is None else r["primal"]
        r["lam_hat"] = tuple(r["lam_hat"])
        records.append(_domain(f"records[{i}]", IterationRecord, **r))
    b = doc["best"]
    return _domain("best", RunTrace, tuple(records), b["k"], tuple(b["lam_hat"]), b["mu_hat"],
                   {h: tuple(v) for h, v in b["demands"].items()}, doc["D_X"], doc["scenario_name"],
                   _params(doc["params"]))


def save_trace(t: RunTrace, path) -> None:
    _write(trace_to_dict(t), path)


def load_trace(path) -> RunTrace:
    return trace_from_dict(_read(path))


def solution_to_dict(t: RunTrace) -> dict:
    """The best recovered primal bundle of a run."""
    return {
        "format": "drsmooth.solution",
        "version": VERSION,
        "scenario_name": t.scenario_name,
        "k": t.best_k,
        "primal": t.best_primal if math.isfinite(t.best_primal) else None,
        "lam_hat": list(t.best_lam_hat),
        "mu_hat": t.best_mu_hat,
        "demands": {h: list(v) for h, v in t.best_demands.items()},
    }


def save_solution(t: RunTrace, path) -> None:
    _write(solution_to_dict(t), path)


def trace_csv(t: RunTrace) -> str:
    """One row per iteration; floats in shortest round-tripping form."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in t.records:
        w.writerow([r.k] + [repr(float(getattr(r, c))) for c in CSV_HEADER[1:]])
    return buf.getvalue()


def save_trace_csv(t: RunTrace, path) -> None:
    Path(path).write_text(trace_csv(t), encoding="utf-8")


def read_trace_csv(path) -> dict[str, list[float]]:
    """Columns of a trace CSV keyed by header name."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise SchemaError(f"{path}: header must be {','.join(CSV_HEADER)}")
    cols: dict[str, list[float]] = {c: [] for c in CSV_HEADER}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_HEADER):
            raise SchemaError(f"{path}: line {n} has {len(row)} fields")
        try:
            for c, v in zip(CSV_HEADER, row):
                cols[c].append(float(v))
        except ValueError:
            raise SchemaError(f"{path}: line {n} holds a non-numeric field") from None
    return cols


# oracle results

_CHOICE = {"oneOf": [_obj({"appliance_id": _str, "start": _int}),
                     _obj({"appliance_id": _str, "slots": {"type": "array", "items": _int}})]}

ORACLE_SCHEMA = _doc("drsmooth.oracle", {
    "scenario_name": _str,
    "optimal_cost": _num,
    "evaluations": _int,
    "aggregate": _nums,
    "choices": {"type": "object", "additionalProperties": {"type": "array", "items": _CHOICE}},
}, ["scenario_name", "optimal_cost", "evaluations", "aggregate", "choices"])


def oracle_to_dict(r: OracleResult, scenario_name: str = "") -> dict:
    def choice(c: ApplianceChoice) -> dict:
        if c.start is not None:
            return {"appliance_id": c.appliance_id, "start": c.start}
        return {"appliance_id": c.appliance_id, "slots": list(c.slots)}

    return {
        "format": "drsmooth.oracle",
        "version": VERSION,
        "scenario_name": scenario_name,
        "optimal_cost": r.optimal_cost,
        "evaluations": r.evaluations,
        "aggregate": [float(v) for v in r.aggregate],
        "choices": {h: [choice(c) for c in cs] for h, cs in sorted(r.choices.items())},
    }


def oracle_from_dict(doc: dict) -> OracleResult:
    _validate(doc, ORACLE_SCHEMA)
    choices = {}
    for h, cs in doc["choices"].items():
        choices[h] = tuple(_domain(f"choices.{h}", ApplianceChoice, c["appliance_id"], c.get("start"),
                                   None if "slots" not in c else tuple(c["slots"])) for c in cs)
    return OracleResult(doc["optimal_cost"], choices, np.array(doc["aggregate"], dtype=float), doc["evaluations"])


def save_oracle(r: OracleResult, path, scenario_name: str = "") -> None:
    _write(oracle_to_dict(r, scenario_name), path)


def load_oracle(path) -> OracleResult:
    return oracle_from_dict(_read(path))
