"""Builders for small synthetic cases used across the tests."""

from __future__ import annotations

import math
from dataclasses import replace

from frequc.core import (
    RES_LOSS,
    UNIT_LOSS,
    Contingency,
    FrequencyParams,
    GeneratorUnit,
    InitialUnitState,
    RenewableSource,
    SystemCase,
)


def make_unit(uid, p_max=10.0, p_min=2.0, m_base=12.0, h=2.0, k=20.0, t=8.0, cost=(10.0, 50.0, 1.0), **kw):
    return GeneratorUnit(uid, p_max, p_min, m_base, h, k, t, cost, **kw)


def make_case(units, demand, res=None, delta_f=-2.0, res_loss=0.2, c_ufls=None, initial=None, segments=4):
    demand = tuple(float(d) for d in demand)
    res = tuple(float(r) for r in (res if res is not None else [0.0] * len(demand)))
    conts = tuple(Contingency(UNIT_LOSS, u.id) for u in units) + (Contingency(RES_LOSS, "wind", res_loss),)
    probs = {c.id: 0.0005 for c in conts}
    return SystemCase(
        units=tuple(units),
        res=RenewableSource("wind", res, res_loss),
        demand=demand,
        horizon=len(demand),
        freq=FrequencyParams(50.0, delta_f, 100.0, 1e5, probs),
        contingencies=conts,
        initial_state=initial or {},
        c_ufls_override=c_ufls,
        cost_segments=segments,
    )


def slice_of(case: SystemCase, unit_ids, demand) -> SystemCase:
    """Truncation of ``case`` to ``unit_ids`` with its own demand profile (one value per hour)."""
    sub = case.truncated(list(unit_ids), len(demand))
    return replace(sub, demand=tuple(float(d) for d in demand))


def tiny_shed_slice(bundled: SystemCase) -> SystemCase:
    """Four units of the bundled fleet over three hours; cheap shedding makes unit 11 run above its critical size."""
    return slice_of(bundled, ["5", "8", "9", "11"], [24.0, 27.0, 30.0])


def isclose(a, b, rel=1e-9, abs_=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)
