"""Exhaustive reference solver for tiny cases.

Enumerates every commitment matrix allowed by the minimum up/down rules and,
for each one, solves the remaining dispatch problem exactly as an LP. Once the
commitment is fixed the critical power of every contingency is a constant, so
it is taken from the exact square-root formula rather than the MILP's chords.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np
from scipy.optimize import linprog

from .cfcuc import MODES, resolve_c_ufls
from .core import UNIT_LOSS, SystemCase, aggregate_gain, critical_power_for, piecewise_cost
from .results import PlanningResult, cost_breakdown

MAX_UNITS = 6
MAX_HOURS = 4


class OracleLimitError(ValueError):
    """The case is too large to enumerate."""


def unit_sequences(case: SystemCase, uid: str) -> list[tuple[int, ...]]:
    """All on/off sequences of one unit that satisfy its initial state and min up/down windows."""
    u = case.unit(uid)
    init = case.initial(uid)
    x0 = 1 if init.on else 0
    T = case.horizon
    out = []
    for seq in itertools.product((0, 1), repeat=T):
        if init.on and init.hours_in_state < u.min_up:
            if any(seq[t] == 0 for t in range(min(T, u.min_up - init.hours_in_state))):
                continue
        if not init.on and init.hours_in_state < u.min_down:
            if any(seq[t] == 1 for t in range(min(T, u.min_down - init.hours_in_state))):
                continue
        prev = (x0,) + seq[:-1]
        starts = [1 if seq[t] and not prev[t] else 0 for t in range(T)]
        ok = True
        for t in range(T):
            if u.min_up > 1 and sum(starts[max(0, t - u.min_up + 1): t + 1]) > seq[t]:
                ok = False
                break
            if u.min_down > 1:
                for tau in range(max(0, t - u.min_down + 1), t):
                    if prev[tau] - seq[tau] + seq[t] > 1:
                        ok = False
                        break
            if not ok:
                break
        if ok:
            out.append(seq)
    return out


def _hour_ok(case: SystemCase, commit: dict[str, tuple[int, ...]], t: int) -> bool:
    lo = sum(u.p_min for u in case.units if commit[u.id][t])
    hi = sum(u.p_max for u in case.units if commit[u.id][t])
    return lo <= case.demand[t] + 1e-9 and hi + case.res.availability[t] >= case.demand[t] - 1e-9


class _Lp:
    """Tiny sparse-free LP assembler for the fixed-commitment dispatch."""

    def __init__(self):
        self.c, self.bounds, self.names = [], [], {}
        self.ub_rows, self.ub_rhs, self.eq_rows, self.eq_rhs = [], [], [], []

    def var(self, name, lo, hi, cost=0.0):
        self.names[name] = len(self.c)
        self.c.append(cost)
        self.bounds.append((lo, hi))
        return self.names[name]

    def le(self, coeffs, rhs):
        self.ub_rows.append(coeffs)
        self.ub_rhs.append(rhs)

    def eq(self, coeffs, rhs):
        self.eq_rows.append(coeffs)
        self.eq_rhs.append(rhs)

    def _dense(self, rows):
        A = np.zeros((len(rows), len(self.c)))
        for i, row in enumerate(rows):
            for j, v in row:
                A[i, j] += v
        return A

    def solve(self):
        kw = {}
        if self.ub_rows:
            kw.update(A_ub=self._dense(self.ub_rows), b_ub=np.array(self.ub_rhs))
        if self.eq_rows:
            kw.update(A_eq=self._dense(self.eq_rows), b_eq=np.array(self.eq_rhs))
        return linprog(np.array(self.c), bounds=self.bounds, method="highs", **kw)


def _dispatch_lp(case, commit, mode, c_ufls, pcrit):
    """Build and solve the dispatch LP; returns (objective, values by name) or None if infeasible."""
    lp = _Lp()
    T = case.horizon
    const = 0.0
    pexpr = {}  # (g,t) -> (constant, [(col, coef)])
    for u in case.units:
        curve = piecewise_cost(u, case.cost_segments)
        widths = [curve.xs[k + 1] - curve.xs[k] for k in range(curve.n_segments)]
        slopes = curve.slopes()
        init = case.initial(u.id)
        prev = 1 if init.on else 0
        for t in range(T):
            on = commit[u.id][t]
            if on:
                const += curve.ys[0] + (u.startup_cost if not prev else 0.0)
                cols = [(lp.var(f"seg[{u.id},{t},{k}]", 0.0, w, sl), 1.0)
                        for k, (w, sl) in enumerate(zip(widths, slopes))]
                pexpr[u.id, t] = (u.p_min, cols)
            else:
                pexpr[u.id, t] = (0.0, [])
            prev = on
    res = [lp.var(f"res_used[{t}]", 0.0, case.res.availability[t]) for t in range(T)]

    for t in range(T):
        row, rhs = [(res[t], 1.0)], case.demand[t]
        for u in case.units:
            k0, cols = pexpr[u.id, t]
            row += cols
            rhs -= k0
        lp.eq(row, rhs)

    # ramps, written exactly like the MILP rows with x fixed
    for u in case.units:
        init = case.initial(u.id)
        x_init = 1 if init.on else 0
        for t in range(T):
            k_t, cols_t = pexpr[u.id, t]
            x_t = commit[u.id][t]
            if t == 0:
                k_p, cols_p, x_p, p_fix = 0.0, [], x_init, init.p
            else:
                k_p, cols_p = pexpr[u.id, t - 1]
                x_p, p_fix = commit[u.id][t - 1], 0.0
            if math.isfinite(u.ramp_up):
                rhs = u.p_min + (u.ramp_up - u.p_min) * x_p + p_fix - k_t + k_p
                lp.le(cols_t + [(j, -v) for j, v in cols_p], rhs)
            if math.isfinite(u.ramp_down):
                rhs = u.p_min + (u.ramp_down - u.p_min) * x_t - p_fix + k_t - k_p
                lp.le(cols_p + [(j, -v) for j, v in cols_t], rhs)

    pufls = {}
    for gg in case.contingencies:
        skip = gg.target if gg.kind == UNIT_LOSS else None
        for t in range(T):
            if gg.kind == UNIT_LOSS:
                k_o, cols_o = pexpr[gg.target, t]
                k_o, cols_o = gg.loss_fraction_L * k_o, [(j, gg.loss_fraction_L * v) for j, v in cols_o]
            else:
                k_o, cols_o = 0.0, [(res[t], gg.loss_fraction_L)]
            # reserve: sum_{g != gg} (pmax x - P) + pufls >= L * P_out
            row, rhs = list(cols_o), 0.0
            for u in case.units:
                if u.id == skip or not commit[u.id][t]:
                    continue
                k0, cols = pexpr[u.id, t]
                row += cols
                rhs += u.p_max - k0
            rhs -= k_o
            if mode == "cfcuc":
                pu = lp.var(f"pufls[{gg.id},{t}]", 0.0, None, c_ufls[gg.id])
                pufls[gg.id, t] = pu
                row.append((pu, -1.0))
            lp.le(row, rhs)
            if mode == "standard":
                continue
            pc = pcrit[gg.id][t]
            # L * P_out - pcrit <= pufls (pufls = 0 for the preventive mode)
            lo_row = list(cols_o) + ([(pufls[gg.id, t], -1.0)] if mode == "cfcuc" else [])
            lp.le(lo_row, pc - k_o)
            k_sys = aggregate_gain(case, [g for g in case.unit_ids if commit[g][t]], gg)
            if k_sys <= 0:
                continue
            for u in case.units:
                if u.id == skip or not commit[u.id][t]:
                    continue
                share = u.k_hat / case.freq.s_base / k_sys * pc
                k0, cols = pexpr[u.id, t]
                lp.le(cols, u.p_max - share - k0)

    r = lp.solve()
    if r.status != 0:
        return None
    vals = {name: float(r.x[j]) for name, j in lp.names.items()}
    dispatch = {}
    for (g, t), (k0, cols) in pexpr.items():
        dispatch[g, t] = float(k0 + sum(v * r.x[j] for j, v in cols))
    return float(r.fun) + const, vals, dispatch


def brute_force_uc(
    case: SystemCase,
    mode: str = "standard",
    c_ufls=None,
    max_units: int = MAX_UNITS,
    max_hours: int = MAX_HOURS,
) -> PlanningResult:
    """Best schedule over every admissible commitment, with exact critical power."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if len(case.units) > max_units or case.horizon > max_hours:
        raise OracleLimitError(
            f"oracle handles at most {max_units} units and {max_hours} hours, "
            f"got {len(case.units)} units and {case.horizon} hours"
        )
    t0 = time.perf_counter()
    costs = resolve_c_ufls(case, c_ufls) if mode == "cfcuc" else {}
    per_unit = [unit_sequences(case, g) for g in case.unit_ids]
    best = None
    enumerated = 0
    for combo in itertools.product(*per_unit):
        commit = dict(zip(case.unit_ids, combo))
        enumerated += 1
        if not all(_hour_ok(case, commit, t) for t in range(case.horizon)):
            continue
        pcrit = {}
        if mode != "standard":
            for gg in case.contingencies:
                pcrit[gg.id] = [
                    critical_power_for(case, [g for g in case.unit_ids if commit[g][t]], gg)
                    for t in range(case.horizon)
                ]
        out = _dispatch_lp(case, commit, mode, costs, pcrit)
        if out is None:
            continue
        obj = out[0]
        if best is None or obj < best[0] - 1e-9:
            best = (obj, commit, pcrit, out[1], out[2])

    res = PlanningResult(mode=mode, status="infeasible", units=case.unit_ids, horizon=case.horizon,
                         case_name=case.name, settings={"oracle": True, "enumerated": enumerated})
    res.wall_time = time.perf_counter() - t0
    if best is None:
        return res
    obj, commit, pcrit, vals, dispatch = best
    T = case.horizon
    res.status = "optimal"
    res.objective = obj
    res.gap = 0.0
    res.commitment = {g: list(commit[g]) for g in case.unit_ids}
    res.dispatch = {g: [dispatch[g, t] for t in range(T)] for g in case.unit_ids}
    res.res_used = [vals[f"res_used[{t}]"] for t in range(T)]
    res.spillage = [max(0.0, case.res.availability[t] - res.res_used[t]) for t in range(T)]
    if mode != "standard":
        res.p_crit = {k: list(v) for k, v in pcrit.items()}
        res.p_crit_exact = {k: list(v) for k, v in pcrit.items()}
        res.pcrit_gap_max = 0.0
        res.p_ufls = {}
        for gg in case.contingencies:
            row = []
            for t in range(T):
                lost = gg.loss_fraction_L * (dispatch[gg.target, t] if gg.kind == UNIT_LOSS else res.res_used[t])
                row.append(float(max(0.0, lost - pcrit[gg.id][t])))
            res.p_ufls[gg.id] = row
    if mode == "cfcuc":
        res.settings["c_ufls"] = costs
    res.costs = cost_breakdown(case, res)
    return res
