"""End-to-end acceptance checks on the bundled fleet.

Each test records one PASS/FAIL line (printed in the terminal summary) and then
asserts. The 24-hour solves are shared through module fixtures.
"""

import math
import random
import time

import numpy as np
import pytest

from frequc import bundled_case_path, load_case
from frequc.cfcuc import (
    LinearizationConfig,
    add_commitment_products,
    build_model,
    run_mode,
    sqrt_breakpoints,
    sqrt_const,
)
from frequc.cli import compare_with_oracle, trend_violations
from frequc.core import critical_power_for
from frequc.milp import MilpModel, SolveOptions, models_equal
from frequc.oracle import brute_force_uc
from frequc.results import mean_ufls_per_outage
from frequc.sfr import (
    NO_SHED,
    HourState,
    SimOptions,
    UflsScheme,
    measure_shed,
    nadir,
    simulate_outage,
    verify_schedule,
)
from frequc.solver import check_solution
from frequc.uc import build_standard_model, solve_standard_uc, xn
from helpers import tiny_shed_slice

pytestmark = pytest.mark.slow

SWEEP = (1e4, 500.0, 50.0)
GAP = 1e-3  # relative MIP gap for the 24-hour solves
NADIR_BAND = 0.15  # nadir at the critical disturbance, relative to |delta_f_nadir|
NADIR_BAND_PINNED = 0.10  # observed worst case 9.0 % over the seeded commitments
SHED_BAND = 0.15  # shed one MW above the critical disturbance, relative to 1 MW
ESTIMATE_BAND = 0.15  # mean simulated vs estimated shed
HEADROOM_TOL = 1e-3  # MW

# Pinned after the first full run (seed 0, gap 1e-3, one solver thread).
PINNED_COST = {"standard": 97966.1, "pfcuc": 105499.5, 1e4: 105499.5, 500.0: 105499.5, 50.0: 101662.1}
PINNED_SHED = {1e4: 0.0, 500.0: 0.0, 50.0: 0.162}


def record(request, ok, detail):
    request.config._acceptance_lines.append(f"{'PASS' if ok else 'FAIL'}  {request.node.name}: {detail}")


@pytest.fixture(scope="module")
def case():
    return load_case(bundled_case_path())


@pytest.fixture(scope="module")
def runs(case):
    """standard, pfcuc and the CFCUC sweep, each C warm-started from the next larger one."""
    opts = SolveOptions(gap=GAP)
    out, times = {}, {}
    t0 = time.perf_counter()
    out["standard"] = solve_standard_uc(case, opts)
    times["standard"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    out["pfcuc"] = run_mode(case, "pfcuc", opts)[0]
    times["pfcuc"] = time.perf_counter() - t0
    start = out["pfcuc"].commitment
    for c in SWEEP:
        t0 = time.perf_counter()
        out[c] = run_mode(case, "cfcuc", opts, c_ufls=c, start_commitment=start)[0]
        times[c] = time.perf_counter() - t0
        start = out[c].commitment
    out["times"] = times
    return out


@pytest.fixture(scope="module")
def reports(case, runs):
    return {key: verify_schedule(case, runs[key]) for key in ("pfcuc", 50.0)}


def _shed(case, res):
    return mean_ufls_per_outage(case, res)


def test_1_high_shed_cost_matches_preventive(request, case, runs):
    cf, pf = runs[1e4], runs["pfcuc"]
    max_shed = max(v for row in cf.p_ufls.values() for v in row)
    rel = abs(cf.objective - pf.objective) / abs(pf.objective)
    budget = runs["times"]["pfcuc"] + runs["times"][1e4]
    ok = cf.feasible and pf.feasible and max_shed <= 1e-6 and rel <= 1e-3 and budget < 600
    record(request, ok, f"max p_ufls {max_shed:.2e} MW, cost gap {rel:.2e} (<= 1e-3), "
                        f"solve time {budget:.0f} s (< 600)")
    assert ok


def test_1_no_frequency_rows_is_standard_model(request, case):
    ok = models_equal(build_model(case, "cfcuc", frequency_constraints=False), build_standard_model(case))
    record(request, ok, "serialized models equal" if ok else "models differ")
    assert ok


def test_2_sweep_trends(request, case, runs):
    rows = [{"label": f"C={c:g}", "mode": "cfcuc", "total_cost": runs[c].objective, "gap": runs[c].gap,
             "ufls_est_mw_per_outage": _shed(case, runs[c])} for c in sorted(SWEEP)]
    problems = trend_violations(rows)
    costs = [r["total_cost"] for r in rows]
    sheds = [r["ufls_est_mw_per_outage"] for r in rows]
    strict_cost = any(b > a * (1 + GAP) for a, b in zip(costs, costs[1:]))
    strict_shed = any(b < a - 1e-6 for a, b in zip(sheds, sheds[1:]))
    pinned = all(math.isclose(runs[c].objective, PINNED_COST[c], rel_tol=GAP) for c in SWEEP)
    pinned &= all(abs(_shed(case, runs[c]) - PINNED_SHED[c]) <= 5e-3 for c in SWEEP)
    ok = not problems and strict_cost and strict_shed and pinned
    detail = ", ".join(f"{r['label']}: {r['total_cost']:.1f} EUR {r['ufls_est_mw_per_outage']:.3f} MW/out"
                       for r in rows)
    detail += "" if not problems else f"; {problems}"
    detail += "" if pinned else "; pinned values moved"
    record(request, ok, detail)
    assert ok


def test_2_every_schedule_is_clean(request, case, runs):
    worst = 0.0
    for key in ("standard", "pfcuc") + SWEEP:
        res = runs[key]
        mode = key if isinstance(key, str) else "cfcuc"
        c = None if isinstance(key, str) else key
        model = build_model(case, mode, c_ufls=c)
        worst = max(worst, check_solution(model, res.assignment).max_violation)
    ok = worst <= 1e-6
    record(request, ok, f"largest row violation over all 24 h schedules {worst:.1e}")
    assert ok


def test_3_simulated_shed_matches_estimate(request, reports):
    rep = reports[50.0]
    rel = rep.relative_deviation
    ok = rel is not None and rel <= ESTIMATE_BAND
    record(request, ok, f"C=50 mean simulated {rep.mean_measured_shed:.3f} MW vs estimated "
                        f"{rep.mean_estimated_shed:.3f} MW, deviation {rel:.1%} (<= 15%)")
    assert ok


def test_3_preventive_schedule_never_sheds(request, case, runs, reports):
    rep = reports["pfcuc"]
    limit = case.freq.f_nominal - abs(case.freq.delta_f_nadir)
    worst_shed = max(r.measured_shed_mw for r in rep.records)
    unprotected = verify_schedule(case, runs["pfcuc"], UflsScheme(NO_SHED), check_headroom=False)
    ok = worst_shed == 0.0 and unprotected.nadir_min_hz >= limit
    record(request, ok, f"largest simulated shed {worst_shed:.3f} MW, lowest unprotected nadir "
                        f"{unprotected.nadir_min_hz:.3f} Hz (>= {limit:g})")
    assert ok


def test_4_products_exact(request, case):
    one = case.truncated(case.unit_ids, 1)
    ids = one.unit_ids
    m = MilpModel("products")
    for g in ids:
        m.add_var(xn(g, 0), "binary")
    add_commitment_products(m, one)
    pairs = [(i, j) for a, i in enumerate(ids) for j in ids[a + 1:]]
    rng = random.Random(2024)
    bad = 0
    for _ in range(1000):
        x = {g: rng.randint(0, 1) for g in ids}
        vals = {xn(g, 0): float(x[g]) for g in ids}
        vals.update({f"z[{i},{j},0]": float(x[i] * x[j]) for i, j in pairs})
        bad += not check_solution(m, vals).clean
        # the three rows leave z the interval [max(0, xi + xj - 1), min(xi, xj)], a single point at the product
        bad += sum(max(0, x[i] + x[j] - 1) != min(x[i], x[j]) for i, j in pairs)
    ok = bad == 0 and len(pairs) == len(m.vars_with_prefix("z[")) == 55
    record(request, ok, f"{bad} mismatches over 1000 random commitments x 55 pairs")
    assert ok


def _worst_sqrt_error(case, gg, n, samples=200001):
    c = sqrt_const(case)
    xs = sqrt_breakpoints(case, gg, n)
    ws = np.geomspace(max(xs[1], 1e-12), xs[-1], samples)
    approx = np.interp(ws, xs, [c * math.sqrt(v) for v in xs])
    exact = c * np.sqrt(ws)
    return float(np.max(1 - approx / exact)), float(np.min(exact - approx))


def test_4_sqrt_chords_within_two_percent(request, case):
    worst, below = 0.0, 0.0
    for gg in case.contingencies:
        err, margin = _worst_sqrt_error(case, gg, 16)
        worst, below = max(worst, err), min(below, margin)
    ok = worst <= 0.02 and below >= -1e-12
    record(request, ok, f"worst relative under-estimate {worst:.3%} with 16 breakpoints (<= 2%), never above")
    assert ok


def test_4_pcrit_gap_shrinks_with_breakpoints(request, case):
    small = tiny_shed_slice(case)
    gaps = []
    for n in (4, 16, 64):
        res = run_mode(small, "cfcuc", SolveOptions(gap=1e-7), LinearizationConfig(sqrt_breakpoints=n), c_ufls=50.0)[0]
        gaps.append(res.pcrit_gap_max)
    ok = gaps[0] > gaps[1] > gaps[2]
    record(request, ok, "reported pcrit gap " + " > ".join(f"{g:.4f}" for g in gaps) + " MW at 4/16/64 breakpoints")
    assert ok


def test_5_oracle_agreement(request, case):
    small = tiny_shed_slice(case)
    t0 = time.perf_counter()
    std = solve_standard_uc(small, SolveOptions(gap=1e-8))
    ref_std = brute_force_uc(small, "standard")
    mine = run_mode(small, "cfcuc", SolveOptions(gap=1e-8), c_ufls=50.0)[0]
    ref = brute_force_uc(small, "cfcuc", c_ufls=50.0)
    elapsed = time.perf_counter() - t0
    # the oracle dispatches by exact LP, so the MW-grid allowance (0.1 MW at the top marginal cost) is generous
    top_slope = max(b + 2 * c * u.p_max for u in small.units for _, b, c in [u.cost_quadratic])
    grid_tol = 0.1 * top_slope * small.horizon
    std_gap = abs(std.objective - ref_std.objective)
    report = compare_with_oracle(small, mine, ref, tol=1e-3, shed_tol=0.2)
    ok = std_gap <= grid_tol and report["agree"] and elapsed < 120
    record(request, ok, f"standard |diff| {std_gap:.2e} EUR (<= {grid_tol:.1f}); cfcuc shedding pattern "
                        f"{'agrees' if report['agree'] else report['problems']}; {elapsed:.1f} s (< 120)")
    assert ok


def _random_commitments(case, n, seed=11):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        on = [g for g in case.unit_ids if rng.random() < 0.45]
        if len(on) >= 2:
            out.append(on)
    return out


def _unloaded_hour(case, on):
    # half load leaves room for the unsaturated transient of every unit
    return HourState({g: 0.5 * (case.unit(g).p_min + case.unit(g).p_max) for g in on}, 0.0, math.inf)


@pytest.fixture(scope="module")
def critical_runs(case):
    rows = []
    raw = SimOptions(saturation=False)
    for on in _random_commitments(case, 12):
        pc = critical_power_for(case, on, None)
        hour = _unloaded_hour(case, on)
        at = simulate_outage(case, hour, None, UflsScheme(NO_SHED), raw, disturbance_mw=pc)
        above = simulate_outage(case, hour, None, UflsScheme(), raw, disturbance_mw=pc + 1.0)
        rows.append((on, pc, case.freq.f_nominal - nadir(at), measure_shed(above)))
    return rows


def test_6_nadir_at_critical_disturbance(request, case, critical_runs):
    target = abs(case.freq.delta_f_nadir)
    devs = [abs(d - target) / target for _, _, d, _ in critical_runs]
    ok = max(devs) <= NADIR_BAND_PINNED
    record(request, ok, f"{len(devs)} commitments, nadir deviation {min(devs):.1%}..{max(devs):.1%} of 2 Hz "
                        f"(required band 15%, pinned {NADIR_BAND_PINNED:.0%})")
    assert ok


def test_6_shed_one_mw_above_critical(request, critical_runs):
    sheds = [s for *_, s in critical_runs]
    devs = [abs(s - 1.0) for s in sheds]
    ok = max(devs) <= SHED_BAND
    record(request, ok, f"shed for pcrit + 1 MW ranges {min(sheds):.2f}..{max(sheds):.2f} MW (1 +/- 0.15)")
    assert ok


def test_7_headroom_holds_on_cfcuc_schedules(request, reports):
    excess = reports[50.0].max_headroom_excess
    ok = excess is not None and excess <= HEADROOM_TOL
    record(request, ok, f"largest unsaturated overshoot of p_max before nadir {excess:.3f} MW (<= {HEADROOM_TOL})")
    assert ok


def test_7_headroom_rows_are_active(request, case):
    small = tiny_shed_slice(case)
    excess = {}
    for flag in (True, False):
        res = run_mode(small, "cfcuc", SolveOptions(gap=1e-7), LinearizationConfig(headroom=flag), c_ufls=50.0)[0]
        excess[flag] = verify_schedule(small, res).max_headroom_excess
    ok = excess[False] > HEADROOM_TOL and excess[False] > excess[True]
    record(request, ok, f"overshoot without rows {excess[False]:.3f} MW, with rows {excess[True]:.3f} MW")
    assert ok


def test_8_step_halving(request, case, runs, critical_runs):
    res = runs[50.0]
    fixtures = []
    for t in (0, 6, 12, 18):
        hour = HourState({g: res.dispatch[g][t] for g in res.committed(t)}, res.res_used[t], case.demand[t])
        for gg in case.contingencies:
            if gg.kind == "unit-loss" and gg.target in hour.dispatch:
                fixtures.append((hour, gg, None))
    for on, pc, *_ in critical_runs[:4]:
        fixtures.append((_unloaded_hour(case, on), None, pc + 1.0))
    worst_f, worst_s = 0.0, 0.0
    for hour, gg, dp in fixtures:
        a = simulate_outage(case, hour, gg, opts=SimOptions(step=0.01), disturbance_mw=dp)
        b = simulate_outage(case, hour, gg, opts=SimOptions(step=0.005), disturbance_mw=dp)
        worst_f = max(worst_f, abs(nadir(a) - nadir(b)))
        worst_s = max(worst_s, abs(measure_shed(a) - measure_shed(b)))
    ok = worst_f < 1e-3 and worst_s < 0.01
    record(request, ok, f"{len(fixtures)} fixtures, nadir change {worst_f:.1e} Hz (< 1e-3), "
                        f"shed change {worst_s:.1e} MW (< 0.01)")
    assert ok


def test_8_power_balance_closes(request, case, runs):
    res = runs[50.0]
    worst = 0.0
    count = 0
    for t in (3, 9, 15, 21):
        hour = HourState({g: res.dispatch[g][t] for g in res.committed(t)}, res.res_used[t], case.demand[t])
        for gg in case.contingencies:
            if gg.kind != "unit-loss" or gg.target not in hour.dispatch:
                continue
            tr = simulate_outage(case, hour, gg)
            settled = sum(float(pm[-1]) for pm in tr.pm_mw.values()) + measure_shed(tr)
            worst = max(worst, abs(settled - tr.disturbance_mw) / tr.disturbance_mw)
            count += 1
    ok = worst <= 0.01
    record(request, ok, f"{count} outages, worst imbalance {worst:.2%} of the disturbance (<= 1%)")
    assert ok
