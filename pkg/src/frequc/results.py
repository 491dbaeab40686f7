"""Planning results: extraction from a solved model, cost breakdown, JSON round trip."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .core import SystemCase, critical_power_for, ideal_ufls, outage_mw, piecewise_cost
from .milp import MilpModel
from .solver import SolveResult

RESULT_VERSION = 1


@dataclass
class PlanningResult:
    mode: str
    status: str
    units: list[str]
    horizon: int
    commitment: dict[str, list[int]] = field(default_factory=dict)
    dispatch: dict[str, list[float]] = field(default_factory=dict)
    res_used: list[float] = field(default_factory=list)
    spillage: list[float] = field(default_factory=list)
    p_crit: dict[str, list[float]] = field(default_factory=dict)
    p_crit_exact: dict[str, list[float]] = field(default_factory=dict)
    p_ufls: dict[str, list[float]] = field(default_factory=dict)
    costs: dict[str, float] = field(default_factory=dict)
    objective: float | None = None
    gap: float | None = None
    bound: float | None = None
    pcrit_gap_max: float | None = None
    wall_time: float = 0.0
    settings: dict = field(default_factory=dict)
    assignment: dict[str, float] = field(default_factory=dict)
    case_name: str = ""

    @property
    def feasible(self) -> bool:
        return bool(self.commitment)

    def committed(self, t: int) -> list[str]:
        return [g for g in self.units if self.commitment[g][t] > 0.5]

    def dispatch_at(self, t: int) -> dict[str, float]:
        return {g: self.dispatch[g][t] for g in self.units}

    def to_dict(self, include_timing: bool = False) -> dict:
        """Plain-JSON form; wall time is left out unless asked so reruns serialize identically."""
        d = asdict(self)
        if not include_timing:
            d.pop("wall_time")
        d["version"] = RESULT_VERSION
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlanningResult":
        d = dict(d)
        d.pop("version", None)
        return cls(**d)


def planning_result(case: SystemCase, model: MilpModel, sol: SolveResult, mode: str, settings: dict) -> PlanningResult:
    res = PlanningResult(
        mode=mode,
        status=sol.status,
        units=case.unit_ids,
        horizon=case.horizon,
        objective=sol.objective,
        gap=sol.gap,
        bound=sol.bound,
        wall_time=sol.wall_time,
        settings=dict(settings),
        case_name=case.name,
    )
    if not sol.has_solution:
        return res
    v = sol.values
    T = case.horizon
    res.assignment = dict(v)
    res.commitment = {g: [int(round(v[f"x[{g},{t}]"])) for t in range(T)] for g in case.unit_ids}
    res.dispatch = {
        g: [v[f"P[{g},{t}]"] if res.commitment[g][t] else 0.0 for t in range(T)] for g in case.unit_ids
    }
    res.res_used = [v[f"res_used[{t}]"] for t in range(T)]
    res.spillage = [max(0.0, case.res.availability[t] - res.res_used[t]) for t in range(T)]
    if mode != "standard":
        res.p_crit = {gg.id: [v[f"pcrit[{gg.id},{t}]"] for t in range(T)] for gg in case.contingencies}
        res.p_ufls = {gg.id: [max(0.0, v[f"pufls[{gg.id},{t}]"]) for t in range(T)] for gg in case.contingencies}
        res.p_crit_exact = {
            gg.id: [critical_power_for(case, res.committed(t), gg) for t in range(T)] for gg in case.contingencies
        }
        res.pcrit_gap_max = max(
            (abs(res.p_crit[c][t] - res.p_crit_exact[c][t]) for c in res.p_crit for t in range(T)), default=0.0
        )
    res.costs = cost_breakdown(case, res)
    return res


def cost_breakdown(case: SystemCase, res: PlanningResult) -> dict[str, float]:
    """Startup, generation (PWL curve at the dispatch) and UFLS costs recomputed from the schedule."""
    startup = 0.0
    gen = 0.0
    for u in case.units:
        init = case.initial(u.id)
        prev = 1 if init.on else 0
        curve = piecewise_cost(u, case.cost_segments)
        for t in range(case.horizon):
            on = res.commitment[u.id][t]
            if on and not prev:
                startup += u.startup_cost
            if on:
                gen += curve(res.dispatch[u.id][t])
            prev = on
    ufls = 0.0
    c_ufls = res.settings.get("c_ufls") or {}
    for cid, series in res.p_ufls.items():
        ufls += c_ufls.get(cid, 0.0) * sum(series)
    return {"startup": startup, "generation": gen, "ufls": ufls, "total": startup + gen + ufls}


def estimated_shed(case: SystemCase, res: PlanningResult, include_res: bool = False) -> list[tuple[str, int, float]]:
    """(contingency, hour, p_ufls) for every contingency whose target is on line that hour."""
    out = []
    for gg in case.contingencies:
        for t in range(case.horizon):
            if not outage_active(case, res, gg, t, include_res):
                continue
            out.append((gg.id, t, res.p_ufls[gg.id][t] if res.p_ufls else float("nan")))
    return out


def outage_active(case, res, gg, t, include_res=False) -> bool:
    if gg.kind == "unit-loss":
        return res.commitment[gg.target][t] == 1
    return include_res and res.res_used[t] > 1e-9


def exact_ufls(case: SystemCase, res: PlanningResult, cid: str, t: int) -> float:
    """Shed recomputed from the commitment with the exact square root."""
    gg = case.contingency(cid)
    pc = critical_power_for(case, res.committed(t), gg)
    return ideal_ufls(outage_mw(case, gg, res.dispatch_at(t), res.res_used[t]), pc)


def mean_ufls_per_outage(case: SystemCase, res: PlanningResult, include_res: bool = False) -> float:
    if not res.commitment or not res.p_ufls:
        return float("nan")
    rows = estimated_shed(case, res, include_res)
    if not rows:
        return float("nan")
    return sum(r[2] for r in rows) / len(rows)


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_result(res: PlanningResult, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(res.to_dict(), indent=1, sort_keys=True) + "\n")


def load_result(path: str | Path) -> PlanningResult:
    return PlanningResult.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
