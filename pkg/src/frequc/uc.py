"""Standard unit-commitment MILP: costs, balance, unit logic, ramps and static reserve."""

from __future__ import annotations

import math
import warnings

from .core import RES_LOSS, UNIT_LOSS, Contingency, SystemCase, piecewise_cost
from .milp import BINARY, CONTINUOUS, EQ, GE, LE, MilpModel, SolveOptions


def xn(g, t):
    return f"x[{g},{t}]"


def un(g, t):
    return f"u[{g},{t}]"


def pn(g, t):
    return f"P[{g},{t}]"


def resn(t):
    return f"res_used[{t}]"


def build_base_model(case: SystemCase) -> MilpModel:
    """Objective, balance, limits, commitment logic and ramps (no security rows)."""
    m = MilpModel(case.name)
    T = case.horizon
    cap = sum(u.p_max for u in case.units)
    for t in range(T):
        if case.demand[t] > cap + case.res.availability[t] + 1e-9:
            warnings.warn(f"hour {t}: demand {case.demand[t]} exceeds fleet capacity plus RES", stacklevel=2)

    for u in case.units:
        g = u.id
        curve = piecewise_cost(u, case.cost_segments)
        widths = [curve.xs[k + 1] - curve.xs[k] for k in range(curve.n_segments)]
        slopes = curve.slopes()
        init = case.initial(g)
        x_prev_init = 1.0 if init.on else 0.0
        for t in range(T):
            x = m.add_var(xn(g, t), BINARY, key=("x", g, t))
            su = m.add_var(un(g, t), BINARY, key=("u", g, t))
            p = m.add_var(pn(g, t), CONTINUOUS, 0.0, u.p_max, key=("P", g, t))
            segs = [
                m.add_var(f"pseg[{g},{t},{k}]", CONTINUOUS, 0.0, widths[k], key=("pseg", g, t, k))
                for k in range(curve.n_segments)
            ]
            m.add_constraint(f"pdef[{g},{t}]", [(p, 1.0), (x, -u.p_min)] + [(s, -1.0) for s in segs], EQ, 0.0)
            for k, s in enumerate(segs):
                m.add_constraint(f"segub[{g},{t},{k}]", [(s, 1.0), (x, -widths[k])], LE, 0.0)
            if t == 0:
                m.add_constraint(f"startup[{g},{t}]", [(su, 1.0), (x, -1.0)], GE, -x_prev_init)
            else:
                m.add_constraint(
                    f"startup[{g},{t}]", [(su, 1.0), (x, -1.0), (m.var(xn(g, t - 1)), 1.0)], GE, 0.0
                )
            m.add_objective([(su, u.startup_cost), (x, curve.ys[0])] + list(zip(segs, slopes)))

        # initial min-up / min-down obligations
        if init.on and init.hours_in_state < u.min_up:
            for t in range(min(T, u.min_up - init.hours_in_state)):
                m.fix(xn(g, t), 1.0)
        if not init.on and init.hours_in_state < u.min_down:
            for t in range(min(T, u.min_down - init.hours_in_state)):
                m.fix(xn(g, t), 0.0)

        if u.min_up > 1:
            for t in range(T):
                window = range(max(0, t - u.min_up + 1), t + 1)
                m.add_constraint(
                    f"minup[{g},{t}]",
                    [(m.var(un(g, s)), 1.0) for s in window] + [(m.var(xn(g, t)), -1.0)],
                    LE,
                    0.0,
                )
        if u.min_down > 1:
            for t in range(T):
                for tau in range(max(0, t - u.min_down + 1), t):
                    # shutdown at tau (x[tau-1]=1, x[tau]=0) keeps the unit off at t
                    coeffs = [(m.var(xn(g, tau)), -1.0), (m.var(xn(g, t)), 1.0)]
                    rhs = 1.0
                    if tau == 0:
                        rhs -= x_prev_init
                    else:
                        coeffs.append((m.var(xn(g, tau - 1)), 1.0))
                    m.add_constraint(f"mindown[{g},{t},{tau}]", coeffs, LE, rhs)

        if math.isfinite(u.ramp_up):
            for t in range(T):
                p, x = m.var(pn(g, t)), m.var(xn(g, t))
                if t == 0:
                    rhs = u.p_min + init.p + (u.ramp_up - u.p_min) * x_prev_init
                    m.add_constraint(f"rampup[{g},{t}]", [(p, 1.0)], LE, rhs)
                else:
                    m.add_constraint(
                        f"rampup[{g},{t}]",
                        [(p, 1.0), (m.var(pn(g, t - 1)), -1.0), (m.var(xn(g, t - 1)), -(u.ramp_up - u.p_min))],
                        LE,
                        u.p_min,
                    )
        if math.isfinite(u.ramp_down):
            for t in range(T):
                p, x = m.var(pn(g, t)), m.var(xn(g, t))
                if t == 0:
                    m.add_constraint(
                        f"rampdown[{g},{t}]", [(p, -1.0), (x, -(u.ramp_down - u.p_min))], LE, u.p_min - init.p
                    )
                else:
                    m.add_constraint(
                        f"rampdown[{g},{t}]",
                        [(m.var(pn(g, t - 1)), 1.0), (p, -1.0), (x, -(u.ramp_down - u.p_min))],
                        LE,
                        u.p_min,
                    )

    for t in range(T):
        r = m.add_var(resn(t), CONTINUOUS, 0.0, case.res.availability[t], key=("res_used", case.res.id, t))
        m.add_constraint(
            f"balance[{t}]", [(m.var(pn(g, t)), 1.0) for g in case.unit_ids] + [(r, 1.0)], EQ, case.demand[t]
        )
    return m


def outage_terms(m: MilpModel, gg: Contingency, t: int) -> list[tuple[int, float]]:
    """Linear expression for the lost power L * P_out of contingency ``gg`` in hour ``t``."""
    if gg.kind == UNIT_LOSS:
        return [(m.var(pn(gg.target, t)), gg.loss_fraction_L)]
    return [(m.var(resn(t)), gg.loss_fraction_L)]


def add_reserve_constraints(model: MilpModel, case: SystemCase) -> list[str]:
    """Spinning reserve of the remaining units covers each contingency: rows ``reserve[gg,t]``."""
    names = []
    for gg in case.contingencies:
        skip = gg.target if gg.kind == UNIT_LOSS else None
        for t in range(case.horizon):
            coeffs = []
            for u in case.units:
                if u.id == skip:
                    continue
                coeffs += [(model.var(xn(u.id, t)), u.p_max), (model.var(pn(u.id, t)), -1.0)]
            coeffs += [(v, -c) for v, c in outage_terms(model, gg, t)]
            name = f"reserve[{gg.id},{t}]"
            model.add_constraint(name, coeffs, GE, 0.0)
            names.append(name)
    return names


def build_standard_model(case: SystemCase) -> MilpModel:
    m = build_base_model(case)
    add_reserve_constraints(m, case)
    return m


def solve_standard_uc(case: SystemCase, opts: SolveOptions | None = None):
    from .results import planning_result
    from .solver import solve

    opts = opts or SolveOptions()
    model = build_standard_model(case)
    sol = solve(model, opts)
    return planning_result(case, model, sol, mode="standard", settings={"gap_target": opts.gap, "seed": opts.seed})
