"""Frozen on-disk formats: model JSON, observation CSV, trace JSON.

Model JSON:
    {"theta": [..], "clock": {..}, "initial": {..}}
with clock objects as produced by ClockSpec.to_dict:
    {"kind": "sub"|"inverse", "family": "identity"|"drift"|"poisson"|
     "stable"|"gamma"|"ig"|"tempered", "params": {..}, "beta": 0.0}
    {"kind": "composed", "inner": {family...}, "outer": {family...}}
and initial one of
    {"kind": "stationary"}
    {"kind": "fixed", "x": [..]}
    {"kind": "mixture", "components": [{"m": [..], "w": ..}, ..]}

Observation CSV: header ``t,y1,...,yK``, nonnegative integer counts,
strictly increasing t.

Trace JSON: per-step predicted/updated mixtures as {"m": [..], "w": ..}
rows, the incremental log marginal likelihood, and (when present)
per-weight Monte Carlo standard errors.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Sequence

from .clocks import ClockSpec
from .errors import ConfigError
from .filtering import FilterStep, FilterTrace, ObservationRecord
from .mixtures import DirichletMixture
from .sampler import FixedPoint, MixtureStart, Stationary, SwfModel
from .wf import Theta

__all__ = [
    "model_to_dict",
    "model_from_dict",
    "load_model",
    "dumps_model",
    "observations_to_csv",
    "observations_from_csv",
    "trace_to_dict",
    "trace_from_dict",
    "mixture_to_rows",
    "mixture_from_rows",
]


def mixture_to_rows(mix: DirichletMixture) -> list[dict]:
    return mix.as_rows()


def mixture_from_rows(theta: Theta, rows: list[dict]) -> DirichletMixture:
    return DirichletMixture.from_rows(theta, rows)


def model_to_dict(model: SwfModel) -> dict:
    if isinstance(model.initial, Stationary):
        initial: dict = {"kind": "stationary"}
    elif isinstance(model.initial, FixedPoint):
        initial = {"kind": "fixed", "x": list(model.initial.x)}
    else:
        initial = {
            "kind": "mixture",
            "components": mixture_to_rows(model.initial.mixture),
        }
    return {
        "theta": list(model.theta.values),
        "clock": model.clock.to_dict(),
        "initial": initial,
    }


def model_from_dict(d: dict) -> SwfModel:
    try:
        theta = Theta.from_sequence(d["theta"])
        clock = ClockSpec.from_dict(d["clock"])
    except KeyError as exc:
        raise ConfigError(f"model JSON missing field: {exc}") from exc
    init_d = d.get("initial", {"kind": "stationary"})
    kind = init_d.get("kind", "stationary")
    if kind == "stationary":
        initial: Stationary | FixedPoint | MixtureStart = Stationary()
    elif kind == "fixed":
        initial = FixedPoint(tuple(float(v) for v in init_d["x"]))
    elif kind == "mixture":
        initial = MixtureStart(mixture_from_rows(theta, init_d["components"]))
    else:
        raise ConfigError(f"unknown initial kind {kind!r}")
    return SwfModel(theta, clock, initial)


def dumps_model(model: SwfModel) -> str:
    return json.dumps(model_to_dict(model), indent=2, sort_keys=True)


def load_model(path: str) -> SwfModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def observations_to_csv(data: Sequence[ObservationRecord]) -> str:
    if not data:
        raise ConfigError("no observations to write")
    dim = len(data[0].counts)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"y{i+1}" for i in range(dim)])
    for rec in data:
        writer.writerow([repr(rec.time)] + [str(c) for c in rec.counts])
    return buf.getvalue()


def observations_from_csv(text: str) -> list[ObservationRecord]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError("empty observations file") from None
    if not header or header[0].strip() != "t":
        raise ConfigError("observations CSV must start with header t,y1,...,yK")
    dim = len(header) - 1
    if dim < 2 or any(
        h.strip() != f"y{i+1}" for i, h in enumerate(header[1:])
    ):
        raise ConfigError("observations CSV header must be t,y1,...,yK with K >= 2")
    records: list[ObservationRecord] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != dim + 1:
            raise ConfigError(f"line {line_no}: expected {dim + 1} fields")
        try:
            t = float(row[0])
            counts = tuple(int(v) for v in row[1:])
        except ValueError as exc:
            raise ConfigError(f"line {line_no}: {exc}") from exc
        records.append(ObservationRecord(t, counts))
    if not records:
        raise ConfigError("observations file has a header but no rows")
    times = [r.time for r in records]
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise ConfigError("observation times must be strictly increasing")
    return records


def _step_to_dict(step: FilterStep) -> dict:
    d = {
        "t": step.time,
        "y": list(step.counts),
        "predicted": mixture_to_rows(step.predicted),
        "updated": mixture_to_rows(step.updated),
        "log_increment": step.log_increment,
    }
    if step.weight_se is not None:
        d["weight_se"] = [
            {"m": list(k), "se": v} for k, v in sorted(step.weight_se.items())
        ]
    return d


def trace_to_dict(trace: FilterTrace, theta: Theta) -> dict:
    return {
        "theta": list(theta.values),
        "log_marginal_likelihood": trace.log_marginal_likelihood,
        "steps": [_step_to_dict(s) for s in trace.steps],
    }


def trace_from_dict(d: dict) -> tuple[FilterTrace, Theta]:
    theta = Theta.from_sequence(d["theta"])
    steps = []
    for sd in d["steps"]:
        weight_se = None
        if "weight_se" in sd:
            weight_se = {
                tuple(int(v) for v in row["m"]): float(row["se"])
                for row in sd["weight_se"]
            }
        steps.append(
            FilterStep(
                time=float(sd["t"]),
                counts=tuple(int(v) for v in sd["y"]),
                predicted=mixture_from_rows(theta, sd["predicted"]),
                updated=mixture_from_rows(theta, sd["updated"]),
                log_increment=float(sd["log_increment"]),
                weight_se=weight_se,
            )
        )
    return FilterTrace(steps), theta
