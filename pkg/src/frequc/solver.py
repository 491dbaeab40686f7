"""MILP solving behind a small contract, plus residual checking.

Two backends: ``highs`` hands the model to HiGHS through ``highspy``; ``bnb`` is a plain best-first branch and bound
over :func:`scipy.optimize.linprog` relaxations, meant for small models and
for cross-checking the first.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
import highspy
from scipy.optimize import linprog

from .milp import CONTINUOUS, EQ, GE, LE, MilpModel, SolveOptions

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time-limit"
UNBOUNDED = "unbounded"
ERROR = "error"


@dataclass
class SolveResult:
    status: str
    objective: float | None
    values: dict[str, float] = field(default_factory=dict)
    gap: float | None = None
    wall_time: float = 0.0
    message: str = ""
    bound: float | None = None

    @property
    def has_solution(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE, TIME_LIMIT) and bool(self.values)


@dataclass
class ResidualReport:
    residuals: dict[str, float]
    max_violation: float
    worst_row: str | None
    bound_violation: float
    integrality_violation: float
    objective: float

    def violated(self, tol: float = 1e-6) -> dict[str, float]:
        return {k: v for k, v in self.residuals.items() if v > tol}

    @property
    def clean(self) -> bool:
        return max(self.max_violation, self.bound_violation, self.integrality_violation) <= 1e-6


def solve(model: MilpModel, opts: SolveOptions | None = None, start: dict[str, float] | None = None) -> SolveResult:
    """Solve ``model``; ``start`` is an optional (partial) incumbent by variable name."""
    opts = opts or SolveOptions()
    if opts.backend == "highs":
        return _solve_highs(model, opts, start)
    if opts.backend == "bnb":
        return _solve_bnb(model, opts)
    raise ValueError(f"unknown backend {opts.backend!r}")


def _values(model: MilpModel, x: np.ndarray, int_tol: float) -> dict[str, float]:
    out = {}
    for v, val in zip(model.variables, x):
        val = float(val)
        if v.kind != CONTINUOUS and abs(val - round(val)) <= max(int_tol, 1e-5):
            val = float(round(val))
        out[v.name] = val
    return out


def _solve_highs(model: MilpModel, opts: SolveOptions, start: dict[str, float] | None = None) -> SolveResult:
    t0 = time.perf_counter()
    if model.n_vars == 0:
        return SolveResult(OPTIMAL, model.obj_constant, {}, 0.0, 0.0)
    c, A, rlb, rub, lb, ub, integ = model.to_arrays()
    A = A.tocsc()
    lp = highspy.HighsLp()
    lp.num_col_ = model.n_vars
    lp.num_row_ = model.n_rows
    lp.col_cost_ = c
    lp.col_lower_ = lb
    lp.col_upper_ = ub
    lp.row_lower_ = np.where(np.isfinite(rlb), rlb, -highspy.kHighsInf)
    lp.row_upper_ = np.where(np.isfinite(rub), rub, highspy.kHighsInf)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = A.indptr
    lp.a_matrix_.index_ = A.indices
    lp.a_matrix_.value_ = A.data
    lp.integrality_ = [highspy.HighsVarType.kInteger if i else highspy.HighsVarType.kContinuous for i in integ]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("random_seed", int(opts.seed))
    h.setOptionValue("threads", 1)
    h.setOptionValue("mip_rel_gap", float(opts.gap))
    h.setOptionValue("time_limit", float(opts.time_limit))
    h.setOptionValue("mip_feasibility_tolerance", float(opts.int_tol))
    h.passModel(lp)
    if start:
        sol = highspy.HighsSolution()
        sol.col_value = [float(start.get(v.name, 0.0)) for v in model.variables]
        sol.value_valid = True
        h.setSolution(sol)
    h.run()
    wall = time.perf_counter() - t0
    st = h.getModelStatus()
    info = h.getInfo()
    has_x = info.primal_solution_status == 2
    MS = highspy.HighsModelStatus
    if st == MS.kOptimal:
        status = OPTIMAL
    elif st in (MS.kInfeasible,):
        return SolveResult(INFEASIBLE, None, {}, None, wall, h.modelStatusToString(st))
    elif st in (MS.kUnbounded, MS.kUnboundedOrInfeasible):
        return SolveResult(UNBOUNDED, None, {}, None, wall, h.modelStatusToString(st))
    elif st in (MS.kTimeLimit, MS.kIterationLimit, MS.kSolutionLimit, MS.kInterrupt):
        status = TIME_LIMIT
    else:
        status = FEASIBLE if has_x else ERROR
    if not has_x:
        return SolveResult(status, None, {}, None, wall, h.modelStatusToString(st))
    x = np.asarray(h.getSolution().col_value)
    obj = float(info.objective_function_value) + model.obj_constant
    if integ.any():
        gap = float(info.mip_gap)
        bound = float(info.mip_dual_bound) + model.obj_constant
    else:
        gap, bound = 0.0, obj
    values = _values(model, x, opts.int_tol)
    return SolveResult(status, obj, values, gap, wall, h.modelStatusToString(st), bound)


def _solve_bnb(model: MilpModel, opts: SolveOptions, max_nodes: int = 200_000) -> SolveResult:
    t0 = time.perf_counter()
    c, A, rlb, rub, lb, ub, integ = model.to_arrays()
    A = A.toarray() if model.n_rows else np.zeros((0, model.n_vars))
    # linprog wants A_ub x <= b_ub and A_eq x = b_eq
    eq = np.isfinite(rlb) & np.isfinite(rub) & (rlb == rub)
    up = np.isfinite(rub) & ~eq
    lo = np.isfinite(rlb) & ~eq
    A_ub = np.vstack([A[up], -A[lo]])
    b_ub = np.concatenate([rub[up], -rlb[lo]])
    A_eq, b_eq = A[eq], rlb[eq]
    int_idx = np.flatnonzero(integ)
    tol = max(opts.int_tol, 1e-7)

    def relax(lo_b, hi_b):
        r = linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                    A_eq=A_eq if len(b_eq) else None, b_eq=b_eq if len(b_eq) else None,
                    bounds=list(zip(lo_b, hi_b)), method="highs")
        return r

    best_x, best_obj = None, math.inf
    root = relax(lb, ub)
    if root.status == 3:
        return SolveResult(UNBOUNDED, None, {}, None, time.perf_counter() - t0, "LP relaxation unbounded")
    if root.status != 0:
        return SolveResult(INFEASIBLE, None, {}, None, time.perf_counter() - t0, root.message)
    counter = 0
    heap = [(root.fun, counter, lb.copy(), ub.copy(), root.x)]
    nodes = 0
    timed_out = False
    while heap:
        bound, _, nlb, nub, x = heapq.heappop(heap)
        if bound >= best_obj - opts.gap * max(1.0, abs(best_obj)) and best_x is not None:
            continue
        nodes += 1
        if nodes > max_nodes or time.perf_counter() - t0 > opts.time_limit:
            timed_out = True
            heapq.heappush(heap, (bound, counter, nlb, nub, x))
            break
        frac = np.abs(x[int_idx] - np.round(x[int_idx]))
        if frac.size == 0 or frac.max() <= tol:
            if bound < best_obj:
                best_obj, best_x = bound, x
            continue
        # most fractional, lowest index on ties, keeps the search deterministic
        j = int_idx[int(np.argmax(frac))]
        for child_lb, child_ub in ((nlb[j], math.floor(x[j])), (math.ceil(x[j]), nub[j])):
            if child_lb > child_ub:
                continue
            clb, cub = nlb.copy(), nub.copy()
            clb[j], cub[j] = child_lb, child_ub
            r = relax(clb, cub)
            if r.status == 0 and r.fun < best_obj:
                counter += 1
                heapq.heappush(heap, (r.fun, counter, clb, cub, r.x))
    wall = time.perf_counter() - t0
    if best_x is None:
        return SolveResult(TIME_LIMIT if timed_out else INFEASIBLE, None, {}, None, wall)
    lower = min([best_obj] + [h[0] for h in heap]) if timed_out else best_obj
    gap = abs(best_obj - lower) / max(1e-10, abs(best_obj)) if best_obj else 0.0
    status = TIME_LIMIT if timed_out else OPTIMAL
    return SolveResult(status, float(best_obj) + model.obj_constant, _values(model, best_x, opts.int_tol), gap, wall,
                       bound=float(lower) + model.obj_constant)


def check_solution(model: MilpModel, assignment: dict[str, float]) -> ResidualReport:
    """Signed residual per row (positive = violated), plus bound/integrality checks."""
    missing = [v.name for v in model.variables if v.name not in assignment]
    if missing:
        raise KeyError(f"assignment is missing variable {missing[0]} ({len(missing)} missing)")
    x = np.array([assignment[v.name] for v in model.variables], dtype=float)
    res = {}
    worst, worst_row = 0.0, None
    for con in model.constraints:
        lhs = sum(c * x[k] for k, c in con.coeffs.items())
        if con.sense == LE:
            r = lhs - con.rhs
        elif con.sense == GE:
            r = con.rhs - lhs
        else:
            r = abs(lhs - con.rhs)
        res[con.name] = r
        if r > worst:
            worst, worst_row = r, con.name
    bviol = 0.0
    iviol = 0.0
    for v, val in zip(model.variables, x):
        bviol = max(bviol, v.lb - val, val - v.ub)
        if v.kind != CONTINUOUS:
            iviol = max(iviol, abs(val - round(val)))
    return ResidualReport(res, worst, worst_row, max(bviol, 0.0), iviol, model.objective_value(x))
