"""Frequency-constrained extensions of the standard UC model.

The critical outage size depends on the product H_sys * K_sys of two sums of
binaries. It is made linear in three steps:

* ``z[i,j,t]`` linearizes x_i * x_j, so ``w[gg,t] = H_sys * K_sys`` is an
  exact linear function of the commitment;
* ``pcrit[gg,t] = const * sqrt(w)`` is a chord interpolation of the square
  root (always at or below the true value);
* ``rx[g,gg,t] = r[gg,t] * x[g,t]`` expands the transient share of each unit
  without dividing by K_sys.

Load shed beyond the critical size is ``pufls[gg,t] = max(0, L*P_out - pcrit)``,
encoded with one binary ``y[gg,t]`` and bounds-derived big-M values.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .core import UNIT_LOSS, Contingency, SystemCase, ufls_cost_param
from .milp import BINARY, CONTINUOUS, EQ, GE, LE, MilpModel, SolveOptions
from .solver import INFEASIBLE, OPTIMAL, TIME_LIMIT, SolveResult, solve
from .uc import add_reserve_constraints, build_base_model, outage_terms, pn, xn

MODES = ("standard", "cfcuc", "pfcuc")


@dataclass(frozen=True)
class LinearizationConfig:
    sqrt_breakpoints: int = 16
    big_m_policy: str = "bounds"
    pwl_form: str = "incremental"
    epsilon_crit: float = 1e-3
    headroom: bool = True

    def __post_init__(self):
        if self.sqrt_breakpoints < 2:
            raise ValueError("sqrt_breakpoints must be >= 2")
        if self.pwl_form not in ("incremental", "sos2-emulated"):
            raise ValueError(f"unknown pwl_form {self.pwl_form!r}")
        if self.big_m_policy != "bounds":
            raise ValueError("only the bounds-derived big-M policy is supported")


def _h(case: SystemCase, uid: str) -> float:
    return case.unit(uid).h_sys / case.freq.s_base


def _k(case: SystemCase, uid: str) -> float:
    return case.unit(uid).k_hat / case.freq.s_base


def _h_res(case: SystemCase) -> float:
    if case.res.provides_inertia:
        return case.res.inertia_h * case.res.m_base / case.freq.s_base
    return 0.0


def responders(case: SystemCase, gg: Contingency) -> list[str]:
    return [u.id for u in case.units if not (gg.kind == UNIT_LOSS and u.id == gg.target)]


def sqrt_const(case: SystemCase) -> float:
    """``pcrit = sqrt_const * sqrt(w)`` in MW."""
    return case.freq.delta_f_pu * case.freq.s_base * math.sqrt(2.0)


def w_coefficients(case: SystemCase, gg: Contingency) -> tuple[dict[str, float], dict[tuple[str, str], float]]:
    """Coefficients of H_sys * K_sys on x_i (diagonal) and on z_ij (pairs, i before j in unit order)."""
    ids = responders(case, gg)
    hres = _h_res(case)
    diag = {i: _h(case, i) * _k(case, i) + hres * _k(case, i) for i in ids}
    pairs = {}
    for a, i in enumerate(ids):
        for j in ids[a + 1:]:
            pairs[(i, j)] = _h(case, i) * _k(case, j) + _h(case, j) * _k(case, i)
    return diag, pairs


def w_range(case: SystemCase, gg: Contingency) -> tuple[float, float]:
    """Smallest positive and largest reachable H_sys * K_sys for contingency ``gg``."""
    diag, pairs = w_coefficients(case, gg)
    if not diag:
        return 0.0, 0.0
    return min(diag.values()), sum(diag.values()) + sum(pairs.values())


def sqrt_breakpoints(case: SystemCase, gg: Contingency, n: int) -> list[float]:
    """Breakpoints in w: 0, then geometric spacing over the reachable positive range."""
    w_min, w_max = w_range(case, gg)
    if w_max <= 0:
        return [0.0]
    if n == 2 or w_min >= w_max:
        return [0.0, w_max]
    pts = [0.0] + list(np.geomspace(w_min, w_max, n - 1))
    pts[-1] = w_max
    return pts


def pwl_sqrt(case: SystemCase, gg: Contingency, w: float, n: int) -> float:
    """The MILP's chord approximation of pcrit at a given w (for checks and reports)."""
    xs = sqrt_breakpoints(case, gg, n)
    c = sqrt_const(case)
    if len(xs) == 1:
        return 0.0
    w = min(max(w, 0.0), xs[-1])
    return float(np.interp(w, xs, [c * math.sqrt(v) for v in xs]))


def pcrit_upper(case: SystemCase, gg: Contingency) -> float:
    return sqrt_const(case) * math.sqrt(w_range(case, gg)[1])


def r_upper(case: SystemCase, gg: Contingency) -> float:
    """Bound on pcrit / K_sys: a ratio of sums never exceeds the largest term ratio h_g / k_g."""
    ids = responders(case, gg)
    if not ids:
        return 0.0
    hres = _h_res(case)
    if hres > 0:
        ratio = (sum(_h(case, g) for g in ids) + hres) / min(_k(case, g) for g in ids)
    else:
        ratio = max(_h(case, g) / _k(case, g) for g in ids)
    return sqrt_const(case) * math.sqrt(ratio)


def add_commitment_products(model: MilpModel, case: SystemCase) -> dict[tuple[str, str, int], int]:
    """``z[i,j,t]`` with z <= x_i, z <= x_j, z >= x_i + x_j - 1; continuous, integral whenever x is."""
    ids = case.unit_ids
    out = {}
    for t in range(case.horizon):
        for a, i in enumerate(ids):
            for j in ids[a + 1:]:
                z = model.add_var(f"z[{i},{j},{t}]", CONTINUOUS, 0.0, 1.0, key=("z", (i, j), t))
                xi, xj = model.var(xn(i, t)), model.var(xn(j, t))
                model.add_constraint(f"zi[{i},{j},{t}]", [(z, 1.0), (xi, -1.0)], LE, 0.0)
                model.add_constraint(f"zj[{i},{j},{t}]", [(z, 1.0), (xj, -1.0)], LE, 0.0)
                model.add_constraint(f"zij[{i},{j},{t}]", [(z, 1.0), (xi, -1.0), (xj, -1.0)], GE, -1.0)
                out[(i, j, t)] = z
    return out


def add_critical_power(model: MilpModel, case: SystemCase, cfg: LinearizationConfig) -> None:
    """Rows ``wdef[gg,t]`` (exact product expansion) and the PWL square root defining ``pcrit[gg,t]``."""
    c = sqrt_const(case)
    for gg in case.contingencies:
        diag, pairs = w_coefficients(case, gg)
        _, w_max = w_range(case, gg)
        xs = sqrt_breakpoints(case, gg, cfg.sqrt_breakpoints)
        ys = [c * math.sqrt(v) for v in xs]
        model.notes[f"pcrit[{gg.id}]"] = {"breakpoints": xs}
        for t in range(case.horizon):
            w = model.add_var(f"w[{gg.id},{t}]", CONTINUOUS, 0.0, w_max, key=("w", gg.id, t))
            pc = model.add_var(f"pcrit[{gg.id},{t}]", CONTINUOUS, 0.0, ys[-1], key=("pcrit", gg.id, t))
            coeffs = [(w, 1.0)]
            coeffs += [(model.var(xn(i, t)), -v) for i, v in diag.items()]
            coeffs += [(model.var(f"z[{i},{j},{t}]"), -v) for (i, j), v in pairs.items()]
            model.add_constraint(f"wdef[{gg.id},{t}]", coeffs, EQ, 0.0)
            if len(xs) == 1:
                model.add_constraint(f"pcritdef[{gg.id},{t}]", [(pc, 1.0)], EQ, 0.0)
            elif cfg.pwl_form == "incremental":
                _pwl_incremental(model, f"{gg.id},{t}", w, pc, xs, ys)
            else:
                _pwl_lambda(model, f"{gg.id},{t}", w, pc, xs, ys)


def _pwl_incremental(model, tag, w, pc, xs, ys):
    n = len(xs) - 1
    segs = []
    for k in range(n):
        segs.append(model.add_var(f"wseg[{tag},{k}]", CONTINUOUS, 0.0, xs[k + 1] - xs[k]))
    bins = [model.add_var(f"wfill[{tag},{k}]", BINARY) for k in range(n - 1)]
    for k in range(n - 1):
        # segment k full before k+1 starts filling
        model.add_constraint(f"wfull[{tag},{k}]", [(segs[k], 1.0), (bins[k], -(xs[k + 1] - xs[k]))], GE, 0.0)
        model.add_constraint(f"wnext[{tag},{k}]", [(segs[k + 1], 1.0), (bins[k], -(xs[k + 2] - xs[k + 1]))], LE, 0.0)
    model.add_constraint(f"wsum[{tag}]", [(w, 1.0)] + [(s, -1.0) for s in segs], EQ, 0.0)
    slopes = [(ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]) for k in range(n)]
    model.add_constraint(f"pcritdef[{tag}]", [(pc, 1.0)] + [(s, -sl) for s, sl in zip(segs, slopes)], EQ, ys[0])


def _pwl_lambda(model, tag, w, pc, xs, ys):
    n = len(xs) - 1
    lam = [model.add_var(f"wlam[{tag},{k}]", CONTINUOUS, 0.0, 1.0) for k in range(n + 1)]
    sel = [model.add_var(f"wsel[{tag},{k}]", BINARY) for k in range(n)]
    model.add_constraint(f"wlamsum[{tag}]", [(v, 1.0) for v in lam], EQ, 1.0)
    model.add_constraint(f"wselsum[{tag}]", [(v, 1.0) for v in sel], EQ, 1.0)
    for k in range(n + 1):
        adj = [s for s in (k - 1, k) if 0 <= s < n]
        model.add_constraint(f"wadj[{tag},{k}]", [(lam[k], 1.0)] + [(sel[s], -1.0) for s in adj], LE, 0.0)
    model.add_constraint(f"wsum[{tag}]", [(w, 1.0)] + [(v, -x) for v, x in zip(lam, xs)], EQ, 0.0)
    model.add_constraint(f"pcritdef[{tag}]", [(pc, 1.0)] + [(v, -y) for v, y in zip(lam, ys)], EQ, 0.0)


def outage_upper(case: SystemCase, gg: Contingency, t: int) -> float:
    if gg.kind == UNIT_LOSS:
        return gg.loss_fraction_L * case.unit(gg.target).p_max
    return gg.loss_fraction_L * case.res.availability[t]


def add_ufls_definition(model: MilpModel, case: SystemCase, cfg: LinearizationConfig) -> None:
    """``pufls = max(0, L*P_out - pcrit)`` with shed indicator ``y``."""
    for gg in case.contingencies:
        m1 = pcrit_upper(case, gg)
        for t in range(case.horizon):
            m2 = outage_upper(case, gg, t)
            pu = model.add_var(f"pufls[{gg.id},{t}]", CONTINUOUS, 0.0, m2, key=("pufls", gg.id, t))
            y = model.add_var(f"y[{gg.id},{t}]", BINARY, key=("y", gg.id, t))
            pc = model.var(f"pcrit[{gg.id},{t}]")
            out = outage_terms(model, gg, t)
            neg_out = [(v, -c) for v, c in out]
            model.add_constraint(f"ufls_lo[{gg.id},{t}]", [(pu, 1.0), (pc, 1.0)] + neg_out, GE, 0.0)
            model.add_constraint(f"ufls_up[{gg.id},{t}]", [(pu, 1.0), (pc, 1.0), (y, m1)] + neg_out, LE, m1)
            model.add_constraint(f"ufls_on[{gg.id},{t}]", [(pu, 1.0), (y, -m2)], LE, 0.0)
            model.notes[f"ufls[{gg.id},{t}]"] = {"M1": m1, "M2": m2}


def add_headroom_constraints(model: MilpModel, case: SystemCase, cfg: LinearizationConfig) -> list[str]:
    """Each remaining unit keeps room for its governor share of pcrit: rows ``headroom[g,gg,t]``."""
    names = []
    for gg in case.contingencies:
        ids = responders(case, gg)
        R = r_upper(case, gg)
        model.notes[f"r[{gg.id}]"] = {"R_max": R}
        for t in range(case.horizon):
            r = model.add_var(f"r[{gg.id},{t}]", CONTINUOUS, 0.0, R, key=("r", gg.id, t))
            split = [(model.var(f"pcrit[{gg.id},{t}]"), -1.0)]
            for g in ids:
                x = model.var(xn(g, t))
                rx = model.add_var(f"rx[{g},{gg.id},{t}]", CONTINUOUS, 0.0, R, key=("rx", (g, gg.id), t))
                model.add_constraint(f"rx_r[{g},{gg.id},{t}]", [(rx, 1.0), (r, -1.0)], LE, 0.0)
                model.add_constraint(f"rx_x[{g},{gg.id},{t}]", [(rx, 1.0), (x, -R)], LE, 0.0)
                model.add_constraint(f"rx_lo[{g},{gg.id},{t}]", [(rx, 1.0), (r, -1.0), (x, -R)], GE, -R)
                kg = _k(case, g)
                split.append((rx, kg))
                if cfg.headroom:
                    u = case.unit(g)
                    name = f"headroom[{g},{gg.id},{t}]"
                    model.add_constraint(name, [(model.var(pn(g, t)), 1.0), (rx, kg), (x, -u.p_max)], LE, 0.0)
                    names.append(name)
            model.add_constraint(f"pcritsplit[{gg.id},{t}]", split, EQ, 0.0)
    return names


def relax_reserve_with_ufls(model: MilpModel, case: SystemCase) -> None:
    for gg in case.contingencies:
        for t in range(case.horizon):
            model.add_to_row(f"reserve[{gg.id},{t}]", model.var(f"pufls[{gg.id},{t}]"), 1.0)


def resolve_c_ufls(case: SystemCase, override=None) -> dict[str, float]:
    """Cost per MW shed for each contingency; explicit override beats the case file."""
    src = override if override is not None else case.c_ufls_override
    return {gg.id: ufls_cost_param(case.freq, gg, src) for gg in case.contingencies}


def extend_objective_with_lsc(model: MilpModel, case: SystemCase, c_ufls: dict[str, float]) -> None:
    for gg in case.contingencies:
        for t in range(case.horizon):
            model.add_objective([(model.var(f"pufls[{gg.id},{t}]"), c_ufls[gg.id])])


def build_model(
    case: SystemCase,
    mode: str = "cfcuc",
    cfg: LinearizationConfig | None = None,
    c_ufls=None,
    frequency_constraints: bool = True,
) -> MilpModel:
    """Assemble the model for ``mode``; without frequency constraints this is the standard UC."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    cfg = cfg or LinearizationConfig()
    model = build_base_model(case)
    add_reserve_constraints(model, case)
    if mode == "standard" or not frequency_constraints:
        return model
    add_commitment_products(model, case)
    add_critical_power(model, case, cfg)
    add_ufls_definition(model, case, cfg)
    add_headroom_constraints(model, case, cfg)
    relax_reserve_with_ufls(model, case)
    if mode == "pfcuc":
        for gg in case.contingencies:
            for t in range(case.horizon):
                model.fix(f"pufls[{gg.id},{t}]", 0.0)
    else:
        extend_objective_with_lsc(model, case, resolve_c_ufls(case, c_ufls))
    return model


def chord_ratio(case: SystemCase, gg: Contingency, n: int) -> float:
    """Smallest ratio pcrit_pwl / pcrit_exact over reachable non-zero w.

    On a chord of the square root between a and b the ratio is lowest at
    w = sqrt(a*b), where it equals 2 (ab)^(1/4) / (sqrt(a) + sqrt(b)). Reachable
    w is either 0 or at least the first positive breakpoint.
    """
    xs = sqrt_breakpoints(case, gg, n)
    worst = 1.0
    for a, b in zip(xs[1:-1], xs[2:]):
        worst = min(worst, 2.0 * (a * b) ** 0.25 / (math.sqrt(a) + math.sqrt(b)))
    return worst


def pcrit_linear_bounds(case: SystemCase, gg: Contingency, cfg: LinearizationConfig, n_tangents: int = 8):
    """Linear under- and over-estimators of the MILP's pcrit in the commitment, valid at every binary x.

    Lower: Cauchy-Schwarz gives sqrt(H*K) >= sum_g sqrt(h_g k_g) x_g, scaled by the
    worst chord ratio. Upper: sqrt(H*K) <= (lam*H + K/lam)/2 for any lam > 0.
    Returns (lower coefficients, [(constant, coefficients)] for each tangent, r_min).
    """
    ids = responders(case, gg)
    c = sqrt_const(case)
    if not ids:
        return {}, [], 0.0
    rho = chord_ratio(case, gg, cfg.sqrt_breakpoints) * (1.0 - 1e-9)
    lower = {g: rho * c * math.sqrt(_h(case, g) * _k(case, g)) for g in ids}
    ratios = [_k(case, g) / _h(case, g) for g in ids]
    hres = _h_res(case)
    uppers = []
    for lam2 in np.geomspace(min(ratios), max(ratios), n_tangents if max(ratios) > min(ratios) else 1):
        lam = math.sqrt(lam2)
        uppers.append((c / 2 * lam * hres, {g: c / 2 * (lam * _h(case, g) + _k(case, g) / lam) for g in ids}))
    r_min = rho * c * math.sqrt(min(_h(case, g) / _k(case, g) for g in ids))
    return lower, uppers, r_min


def build_screening_model(case: SystemCase, mode: str = "cfcuc", cfg: LinearizationConfig | None = None,
                          c_ufls=None, conservative: bool = False) -> MilpModel:
    """A compact relaxation of :func:`build_model` with only the commitment binaries.

    pcrit is boxed between linear functions of x, and each unit's transient share
    is bounded below by its smallest possible value, which turns the headroom rows
    into a derated capacity. Every solution of the full model maps onto a solution
    of this one with the same cost, so its optimum is a valid lower bound.

    With ``conservative=True`` the box is replaced by the linear under-estimator
    alone and the derate uses the largest possible share. The result is a
    restriction instead: every commitment it accepts is feasible in the full
    model, which makes it a source of starting schedules.
    """
    if mode not in ("cfcuc", "pfcuc"):
        raise ValueError("the screening model only exists for frequency-constrained modes")
    cfg = cfg or LinearizationConfig()
    m = build_base_model(case)
    add_reserve_constraints(m, case)
    costs = resolve_c_ufls(case, c_ufls) if mode == "cfcuc" else {}
    derate: dict[str, float] = {}
    for gg in case.contingencies:
        lower, uppers, r_min = pcrit_linear_bounds(case, gg, cfg)
        share = r_upper(case, gg) if conservative else r_min
        for g in responders(case, gg):
            derate[g] = max(derate.get(g, 0.0), _k(case, g) * share)
        for t in range(case.horizon):
            pc = m.add_var(f"pcrit[{gg.id},{t}]", CONTINUOUS, 0.0, pcrit_upper(case, gg))
            m.add_constraint(f"pcrit_lo[{gg.id},{t}]", [(pc, 1.0)] + [(m.var(xn(g, t)), -v) for g, v in lower.items()],
                             LE if conservative else GE, 0.0)
            for q, (k0, coef) in enumerate([] if conservative else uppers):
                m.add_constraint(f"pcrit_hi[{gg.id},{t},{q}]",
                                 [(pc, 1.0)] + [(m.var(xn(g, t)), -v) for g, v in coef.items()], LE, k0)
            pu = m.add_var(f"pufls[{gg.id},{t}]", CONTINUOUS, 0.0, outage_upper(case, gg, t))
            out = [(v, -cf) for v, cf in outage_terms(m, gg, t)]
            m.add_constraint(f"ufls_lo[{gg.id},{t}]", [(pu, 1.0), (pc, 1.0)] + out, GE, 0.0)
            if mode == "pfcuc":
                m.fix(f"pufls[{gg.id},{t}]", 0.0)
            else:
                m.add_objective([(pu, costs[gg.id])])
    if cfg.headroom:
        for u in case.units:
            d = derate.get(u.id, 0.0)
            if d <= 0:
                continue
            for t in range(case.horizon):
                m.add_constraint(f"derate[{u.id},{t}]", [(m.var(pn(u.id, t)), 1.0), (m.var(xn(u.id, t)), d - u.p_max)],
                                 LE, 0.0)
    relax_reserve_with_ufls(m, case)
    return m


def add_valid_cuts(model: MilpModel, case: SystemCase, cfg: LinearizationConfig) -> None:
    """Tighten a full model with the screening inequalities; no integer solution is cut off."""
    for gg in case.contingencies:
        lower, uppers, r_min = pcrit_linear_bounds(case, gg, cfg)
        for t in range(case.horizon):
            pc = model.var(f"pcrit[{gg.id},{t}]")
            model.add_constraint(f"pcrit_lo[{gg.id},{t}]",
                                 [(pc, 1.0)] + [(model.var(xn(g, t)), -v) for g, v in lower.items()], GE, 0.0)
            for q, (k0, coef) in enumerate(uppers):
                model.add_constraint(f"pcrit_hi[{gg.id},{t},{q}]",
                                     [(pc, 1.0)] + [(model.var(xn(g, t)), -v) for g, v in coef.items()], LE, k0)
            for g in lower:
                model.add_constraint(f"rx_min[{g},{gg.id},{t}]",
                                     [(model.var(f"rx[{g},{gg.id},{t}]"), 1.0), (model.var(xn(g, t)), -r_min)], GE, 0.0)


def _commitment_of(values: dict, case: SystemCase) -> dict[str, list[int]]:
    return {g: [int(round(values[xn(g, t)])) for t in range(case.horizon)] for g in case.unit_ids}


def _fixed_commitment_solve(model: MilpModel, case: SystemCase, commitment, opts: SolveOptions) -> SolveResult:
    fixed = model.copy()
    for g in case.unit_ids:
        init = case.initial(g)
        prev = 1 if init.on else 0
        for t in range(case.horizon):
            x = int(commitment[g][t])
            fixed.fix(xn(g, t), float(x))
            fixed.fix(f"u[{g},{t}]", float(1 if x and not prev else 0))
            prev = x
    return solve(fixed, replace(opts, gap=min(opts.gap, 1e-6)))


def solve_screened(
    case: SystemCase,
    model: MilpModel,
    mode: str,
    cfg: LinearizationConfig,
    c_ufls,
    opts: SolveOptions,
    start_commitment=None,
) -> SolveResult:
    """Exact solve of ``model`` through its screening relaxation.

    1. Solve the screening model (commitment binaries only) to a tight gap: its
       bound is a lower bound for ``model``.
    2. Fix each candidate commitment (the screening optimum and ``start_commitment``)
       in ``model`` and solve the small remaining MILP: an upper bound. When none
       of them is feasible, the conservative screening model supplies one.
    3. If the two bounds are within ``opts.gap`` stop; otherwise run ``model`` with
       the valid cuts, warm-started from the best candidate, for the remaining time.
    """
    t0 = time.perf_counter()

    def remaining():
        return max(1.0, opts.time_limit - (time.perf_counter() - t0))

    best: SolveResult | None = None

    def consider(sol: SolveResult):
        nonlocal best
        if sol.has_solution and (best is None or sol.objective < best.objective - 1e-9):
            best = sol

    screen = build_screening_model(case, mode, cfg, c_ufls)
    warm = None
    if start_commitment:
        cand = _fixed_commitment_solve(model, case, start_commitment, replace(opts, time_limit=remaining()))
        consider(cand)
        if cand.has_solution:
            warm = {k: v for k, v in cand.values.items() if screen.has_var(k)}
    s1 = solve(screen, replace(opts, gap=opts.gap / 5.0, time_limit=remaining()), start=warm)
    if s1.status == INFEASIBLE:
        return SolveResult(INFEASIBLE, None, {}, None, time.perf_counter() - t0, "screening relaxation infeasible")
    lower = s1.bound if s1.bound is not None else -math.inf
    if s1.has_solution:
        fixed_opts = replace(opts, time_limit=remaining())
        consider(_fixed_commitment_solve(model, case, _commitment_of(s1.values, case), fixed_opts))

    def gap_of(sol, lb):
        if sol is None or not math.isfinite(lb):
            return None
        return max(0.0, sol.objective - lb) / max(1e-10, abs(sol.objective))

    if best is None:
        inner = build_screening_model(case, mode, cfg, c_ufls, conservative=True)
        s2 = solve(inner, replace(opts, time_limit=remaining()))
        if s2.has_solution:
            fixed_opts = replace(opts, time_limit=remaining())
            consider(_fixed_commitment_solve(model, case, _commitment_of(s2.values, case), fixed_opts))

    gap = gap_of(best, lower)
    if gap is None or gap > opts.gap:
        full = model.copy()
        add_valid_cuts(full, case, cfg)
        s3 = solve(full, replace(opts, time_limit=remaining()), start=best.values if best else None)
        if s3.status == INFEASIBLE and best is None:
            return SolveResult(INFEASIBLE, None, {}, None, time.perf_counter() - t0, s3.message)
        if s3.has_solution:
            consider(SolveResult(s3.status, s3.objective, {k: s3.values[k] for k in (v.name for v in model.variables)},
                                 s3.gap, s3.wall_time, s3.message, s3.bound))
        if s3.bound is not None:
            lower = max(lower, s3.bound)
        gap = gap_of(best, lower)
    wall = time.perf_counter() - t0
    if best is None:
        return SolveResult(TIME_LIMIT, None, {}, None, wall, "no feasible schedule found in time")
    status = OPTIMAL if gap is not None and gap <= opts.gap + 1e-12 else TIME_LIMIT
    return SolveResult(status, best.objective, best.values, gap, wall, "screened", lower)


def run_mode(
    case: SystemCase,
    mode: str,
    opts: SolveOptions | None = None,
    cfg: LinearizationConfig | None = None,
    c_ufls=None,
    strategy: str = "screened",
    start_commitment=None,
):
    """Build and solve one mode, returning the result and the model it came from.

    ``strategy='direct'`` hands the full model straight to the backend.
    """
    from .results import planning_result

    if strategy not in ("screened", "direct"):
        raise ValueError(f"unknown strategy {strategy!r}")
    opts = opts or SolveOptions()
    cfg = cfg or LinearizationConfig()
    model = build_model(case, mode, cfg, c_ufls)
    if mode == "standard" or strategy == "direct":
        start = None
        if start_commitment:
            cand = _fixed_commitment_solve(model, case, start_commitment, opts)
            start = cand.values if cand.has_solution else None
        sol = solve(model, opts, start=start)
    else:
        sol = solve_screened(case, model, mode, cfg, c_ufls, opts, start_commitment)
    settings = {"sqrt_breakpoints": cfg.sqrt_breakpoints, "pwl_form": cfg.pwl_form, "headroom": cfg.headroom,
                "strategy": strategy if mode != "standard" else "direct", "gap_target": opts.gap, "seed": opts.seed}
    if mode == "cfcuc":
        settings["c_ufls"] = resolve_c_ufls(case, c_ufls)
    res = planning_result(case, model, sol, mode=mode, settings=settings)
    return res, model


def solve_cfcuc(
    case: SystemCase,
    opts: SolveOptions | None = None,
    cfg: LinearizationConfig | None = None,
    mode: str = "cfcuc",
    c_ufls=None,
    strategy: str = "screened",
    start_commitment=None,
):
    return run_mode(case, mode, opts, cfg, c_ufls, strategy, start_commitment)[0]
