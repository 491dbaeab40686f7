"""Reading, validating and writing case files."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .core import (
    RES_LOSS,
    UNIT_LOSS,
    Contingency,
    FrequencyParams,
    GeneratorUnit,
    InitialUnitState,
    RenewableSource,
    SystemCase,
)


class CaseParseError(ValueError):
    pass


class CaseValidationError(ValueError):
    """Raised with the full list of violated invariants."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid case:\n  " + "\n  ".join(self.errors))


SCHEMAS = ("case", "result", "verify", "comparison", "oracle")


def schema(name: str) -> dict:
    """One of the bundled JSON schemas, by short name."""
    if name not in SCHEMAS:
        raise KeyError(f"no schema named {name!r}")
    text = resources.files("frequc").joinpath(f"schemas/{name}.schema.json").read_text()
    return json.loads(text)


def case_schema() -> dict:
    return schema("case")


def schema_errors(doc: Any, name: str) -> list[str]:
    """Human-readable violations of schema ``name``; empty when ``doc`` conforms."""
    validator = jsonschema.Draft202012Validator(schema(name))
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        out.append(f"{where}: {err.message}")
    return out


def bundled_case_path(name: str = "elhierro-like.json") -> Path:
    return Path(str(resources.files("frequc").joinpath(f"data/{name}")))


def load_case(path: str | Path) -> SystemCase:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return case_from_dict(doc, name=path.stem)


def _schema_errors(doc: Any) -> list[str]:
    return schema_errors(doc, "case")


def case_from_dict(doc: dict, name: str = "case") -> SystemCase:
    errors = _schema_errors(doc)
    if errors:
        raise CaseValidationError(errors)

    units = []
    for u in doc["units"]:
        units.append(
            GeneratorUnit(
                id=u["id"],
                p_max=float(u["p_max"]),
                p_min=float(u["p_min"]),
                m_base=float(u["m_base"]),
                inertia_h=float(u["inertia_h"]),
                gov_gain_k=float(u["gov_gain_k"]),
                gov_time_t=float(u["gov_time_t"]),
                cost_quadratic=tuple(float(v) for v in u.get("cost_quadratic", (0.0, 0.0, 0.0))),
                startup_cost=float(u.get("startup_cost", 0.0)),
                min_up=int(u.get("min_up", 1)),
                min_down=int(u.get("min_down", 1)),
                ramp_up=float(u.get("ramp_up", math.inf)),
                ramp_down=float(u.get("ramp_down", math.inf)),
            )
        )
    r = doc["res"]
    res = RenewableSource(
        id=r["id"],
        availability=tuple(float(v) for v in r["availability"]),
        loss_fraction_L=float(r.get("loss_fraction_L", 0.2)),
        provides_inertia=bool(r.get("provides_inertia", False)),
        inertia_h=float(r.get("inertia_h", 0.0)),
        m_base=float(r.get("m_base", 0.0)),
    )
    f = doc["freq"]
    freq = FrequencyParams(
        f_nominal=float(f["f_nominal"]),
        delta_f_nadir=float(f["delta_f_nadir"]),
        s_base=float(f["s_base"]),
        vll=None if f.get("vll") is None else float(f["vll"]),
        outage_probabilities={k: float(v) for k, v in f.get("outage_probabilities", {}).items()},
    )
    conts = []
    for c in doc["contingencies"]:
        if c["kind"] == UNIT_LOSS:
            L = float(c.get("loss_fraction_L", 1.0))
        else:
            L = float(c.get("loss_fraction_L", res.loss_fraction_L))
        conts.append(Contingency(kind=c["kind"], target=c["target"], loss_fraction_L=L))
    init = {
        k: InitialUnitState(
            on=bool(v["on"]), hours_in_state=int(v.get("hours_in_state", 1000)), p=float(v.get("p", 0.0))
        )
        for k, v in doc.get("initial_state", {}).items()
    }
    override = doc.get("overrides", {}).get("c_ufls")
    case = SystemCase(
        units=tuple(units),
        res=res,
        demand=tuple(float(v) for v in doc["demand"]),
        horizon=int(doc["horizon"]),
        freq=freq,
        contingencies=tuple(conts),
        initial_state=init,
        c_ufls_override=override,
        cost_segments=int(doc.get("cost_segments", 4)),
        name=doc.get("name", name),
    )
    validate_case(case)
    return case


def validate_case(case: SystemCase) -> None:
    """Check every invariant and raise once with all violations."""
    errs: list[str] = []
    ids = [u.id for u in case.units]
    if len(set(ids)) != len(ids):
        errs.append("units: duplicate unit ids")
    for u in case.units:
        tag = f"units[{u.id}]"
        if not 0 < u.p_min <= u.p_max:
            errs.append(f"{tag}: need 0 < p_min <= p_max (got p_min={u.p_min}, p_max={u.p_max})")
        if u.m_base <= 0:
            errs.append(f"{tag}: m_base must be > 0")
        if u.inertia_h <= 0:
            errs.append(f"{tag}: inertia_h must be > 0")
        if u.gov_gain_k <= 0:
            errs.append(f"{tag}: gov_gain_k must be > 0")
        if u.gov_time_t <= 0:
            errs.append(f"{tag}: gov_time_t must be > 0")
        if u.ramp_up < 0 or u.ramp_down < 0:
            errs.append(f"{tag}: ramps must be >= 0")
        if u.min_up < 1 or u.min_down < 1:
            errs.append(f"{tag}: min_up and min_down must be >= 1")
        if u.cost_quadratic[2] < 0:
            errs.append(f"{tag}: quadratic cost coefficient must be >= 0")
    if any(d <= 0 for d in case.demand):
        errs.append("demand: every hour must be > 0")
    if len(case.demand) != case.horizon:
        errs.append(f"demand: length {len(case.demand)} differs from horizon {case.horizon}")
    if len(case.res.availability) != case.horizon:
        errs.append(
            f"res.availability: length {len(case.res.availability)} differs from horizon {case.horizon}"
        )
    if any(a < 0 for a in case.res.availability):
        errs.append("res.availability: values must be >= 0")
    if not 0 < case.res.loss_fraction_L <= 1:
        errs.append("res.loss_fraction_L: must lie in (0, 1]")
    fq = case.freq
    if fq.f_nominal <= 0:
        errs.append("freq.f_nominal: must be > 0")
    if fq.delta_f_nadir == 0:
        errs.append("freq.delta_f_nadir: must be non-zero")
    if fq.s_base <= 0:
        errs.append("freq.s_base: must be > 0")
    for k, rho in fq.outage_probabilities.items():
        if not 0 <= rho <= 1:
            errs.append(f"freq.outage_probabilities[{k}]: must lie in [0, 1]")
    seen = set()
    for c in case.contingencies:
        if c.id in seen:
            errs.append(f"contingencies: duplicate target {c.id}")
        seen.add(c.id)
        if c.kind == UNIT_LOSS:
            if c.target not in ids:
                errs.append(f"contingencies: unit-loss target {c.target} is not a unit")
            if c.loss_fraction_L != 1.0:
                errs.append(f"contingencies[{c.target}]: unit-loss must have L = 1.0")
        elif c.kind == RES_LOSS:
            if c.target != case.res.id:
                errs.append(f"contingencies: res-loss target {c.target} is not the RES source")
            if c.loss_fraction_L != case.res.loss_fraction_L:
                errs.append(f"contingencies[{c.target}]: res-loss L must equal res.loss_fraction_L")
    for k in case.initial_state:
        if k not in ids:
            errs.append(f"initial_state: unknown unit {k}")
    if errs:
        raise CaseValidationError(errs)


def case_to_dict(case: SystemCase) -> dict:
    def num(v: float):
        return None if math.isinf(v) else v

    units = []
    for u in case.units:
        d = {
            "id": u.id,
            "p_max": u.p_max,
            "p_min": u.p_min,
            "m_base": u.m_base,
            "inertia_h": u.inertia_h,
            "gov_gain_k": u.gov_gain_k,
            "gov_time_t": u.gov_time_t,
            "cost_quadratic": list(u.cost_quadratic),
            "startup_cost": u.startup_cost,
            "min_up": u.min_up,
            "min_down": u.min_down,
        }
        if num(u.ramp_up) is not None:
            d["ramp_up"] = u.ramp_up
        if num(u.ramp_down) is not None:
            d["ramp_down"] = u.ramp_down
        units.append(d)
    doc = {
        "name": case.name,
        "cost_segments": case.cost_segments,
        "units": units,
        "res": {
            "id": case.res.id,
            "availability": list(case.res.availability),
            "loss_fraction_L": case.res.loss_fraction_L,
            "provides_inertia": case.res.provides_inertia,
        },
        "demand": list(case.demand),
        "horizon": case.horizon,
        "freq": {
            "f_nominal": case.freq.f_nominal,
            "delta_f_nadir": case.freq.delta_f_nadir,
            "s_base": case.freq.s_base,
            "vll": case.freq.vll,
            "outage_probabilities": dict(case.freq.outage_probabilities),
        },
        "contingencies": [
            {"kind": c.kind, "target": c.target, "loss_fraction_L": c.loss_fraction_L}
            for c in case.contingencies
        ],
        "initial_state": {
            k: {"on": v.on, "hours_in_state": v.hours_in_state, "p": v.p}
            for k, v in case.initial_state.items()
        },
    }
    if case.c_ufls_override is not None:
        doc["overrides"] = {"c_ufls": case.c_ufls_override}
    return doc


def save_case(case: SystemCase, path: str | Path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=2) + "\n", encoding="utf-8")
