import json
import math

import numpy as np
import pytest

from frequc.core import critical_power_for
from frequc.results import PlanningResult
from frequc.sfr import (
    NO_SHED,
    STAGED,
    FrequencyTrace,
    HourState,
    IncompleteResultError,
    OutageRecord,
    SimOptions,
    TraceError,
    UflsScheme,
    UflsStage,
    measure_shed,
    nadir,
    simulate_outage,
    summarize,
    verify_schedule,
)

DISPATCH = {"7": 8.0, "8": 7.0, "9": 7.0, "11": 10.0}


def hour(ids, demand=40.0):
    return HourState({g: DISPATCH[g] for g in ids}, 0.0, demand)


def test_zero_disturbance_is_flat(bundled):
    tr = simulate_outage(bundled, hour(["8", "9"]), None, disturbance_mw=0.0)
    assert nadir(tr) == 50.0 == tr.f_nominal
    assert measure_shed(tr) == 0.0
    assert np.all(tr.freq_hz == 50.0)
    assert tr.time[0] == 0.0 and tr.freq_hz[0] == 50.0


def test_extractors_refuse_empty_trace():
    empty = FrequencyTrace(np.array([]), np.array([]), np.array([]), {}, {}, 0.0, 50.0)
    with pytest.raises(TraceError):
        nadir(empty)
    with pytest.raises(TraceError):
        measure_shed(empty)


def test_single_block_shed_is_measured(bundled):
    scheme = UflsScheme(STAGED, (UflsStage(49.5, 0.0, amount_mw=2.0),))
    tr = simulate_outage(bundled, hour(["8", "9"]), None, scheme, disturbance_mw=5.0)
    assert measure_shed(tr) == pytest.approx(2.0)
    assert len(tr.shed_events) == 1
    t_shed, mw = tr.shed_events[0]
    assert mw == pytest.approx(2.0)
    assert tr.freq_hz[np.searchsorted(tr.time, t_shed) - 1] > 49.5 - 0.05


def test_staged_relay_delay_postpones_the_trip(bundled):
    fast = UflsScheme(STAGED, (UflsStage(49.5, 0.0, amount_mw=2.0),))
    slow = UflsScheme(STAGED, (UflsStage(49.5, 0.3, amount_mw=2.0),))
    a = simulate_outage(bundled, hour(["8", "9"]), None, fast, disturbance_mw=5.0)
    b = simulate_outage(bundled, hour(["8", "9"]), None, slow, disturbance_mw=5.0)
    assert b.shed_events[0][0] == pytest.approx(a.shed_events[0][0] + 0.3, abs=0.011)
    assert nadir(b) <= nadir(a)


def test_staged_scheme_validation():
    with pytest.raises(ValueError, match="decreasing"):
        UflsScheme(STAGED, (UflsStage(49.0, 0.1, amount_mw=1.0), UflsStage(49.5, 0.1, amount_mw=1.0)))
    with pytest.raises(ValueError, match="positive"):
        UflsScheme(STAGED, (UflsStage(49.0, 0.1, amount_mw=-1.0),))
    with pytest.raises(ValueError):
        UflsScheme("ideal", (UflsStage(49.0, 0.1, amount_mw=1.0),))


def test_demand_fraction_stage(bundled):
    scheme = UflsScheme(STAGED, (UflsStage(49.5, 0.0, demand_fraction=0.05),))
    tr = simulate_outage(bundled, hour(["8", "9"], demand=30.0), None, scheme, disturbance_mw=5.0)
    assert measure_shed(tr) == pytest.approx(1.5)


def test_disturbance_at_critical_power_reaches_the_limit(bundled):
    pc = critical_power_for(bundled, ["8", "9"], None)
    tr = simulate_outage(bundled, hour(["8", "9"]), None, UflsScheme(NO_SHED),
                         SimOptions(saturation=False), disturbance_mw=pc)
    # first-order governors respond a little slower than the ramp model behind pcrit
    assert 50.0 - nadir(tr) == pytest.approx(2.0, rel=0.15)
    ideal = simulate_outage(bundled, hour(["8", "9"]), None, UflsScheme(), SimOptions(saturation=False),
                            disturbance_mw=pc)
    assert measure_shed(ideal) < 0.5


@pytest.mark.parametrize("ids", [["8", "9"], ["7", "8", "9"], ["8", "9", "11"]])
def test_larger_disturbance_never_helps(bundled, ids):
    prev_nadir, prev_shed = math.inf, -math.inf
    for dp in (1.0, 3.0, 6.0, 9.0, 15.0):
        tr = simulate_outage(bundled, hour(ids), None, disturbance_mw=dp)
        assert nadir(tr) <= prev_nadir + 1e-9
        assert measure_shed(tr) >= prev_shed - 1e-9
        prev_nadir, prev_shed = nadir(tr), measure_shed(tr)
    assert prev_shed > 0


def test_extra_unit_never_lowers_the_nadir(bundled):
    for dp in (2.0, 4.0, 6.0):
        base = nadir(simulate_outage(bundled, hour(["8", "9"]), None, UflsScheme(NO_SHED), disturbance_mw=dp))
        more = nadir(simulate_outage(bundled, hour(["7", "8", "9"]), None, UflsScheme(NO_SHED), disturbance_mw=dp))
        assert more >= base - 1e-9


@pytest.mark.parametrize("dp", [2.0, 5.0, 8.0])
def test_step_halving_converges(bundled, dp):
    a = simulate_outage(bundled, hour(["8", "9", "11"]), None, opts=SimOptions(step=0.01), disturbance_mw=dp)
    b = simulate_outage(bundled, hour(["8", "9", "11"]), None, opts=SimOptions(step=0.005), disturbance_mw=dp)
    assert abs(nadir(a) - nadir(b)) < 1e-3
    assert abs(measure_shed(a) - measure_shed(b)) < 0.01


@pytest.mark.parametrize("dp", [2.0, 6.0, 9.0])
def test_power_balance_settles(bundled, dp):
    tr = simulate_outage(bundled, hour(["8", "9", "11"]), None, disturbance_mw=dp)
    response = sum(float(pm[-1]) for pm in tr.pm_mw.values())
    assert response + measure_shed(tr) == pytest.approx(dp, rel=0.01)


def test_horizon_covers_slow_governors(bundled):
    tr = simulate_outage(bundled, hour(["8", "9"]), None, disturbance_mw=1.0)
    assert tr.time[-1] >= 10 * bundled.unit("8").gov_time_t - 1e-9


def test_lost_unit_must_be_committed(bundled):
    with pytest.raises(ValueError, match="not committed"):
        simulate_outage(bundled, hour(["8", "9"]), bundled.contingency("7"))


def test_saturation_caps_output(bundled):
    h = HourState({"8": 11.0, "9": 11.0}, 0.0, 40.0)
    tr = simulate_outage(bundled, h, None, disturbance_mw=4.0)
    for g, pm in tr.pm_mw.items():
        assert h.dispatch[g] + float(np.max(pm)) <= bundled.unit(g).p_max + 1e-9


def test_blackout_is_flagged_not_raised(bundled):
    tr = simulate_outage(bundled, hour(["8", "9"]), None, UflsScheme(NO_SHED), disturbance_mw=14.0)
    assert tr.blackout


def test_trace_csv_columns(bundled):
    tr = simulate_outage(bundled, hour(["8", "9"]), None, disturbance_mw=1.0,
                         opts=SimOptions(horizon=1.0))
    header = tr.to_csv().splitlines()[0]
    assert header == "t,f_hz,shed_mw,pm_8,pm_9"


def test_verify_needs_a_schedule(bundled):
    with pytest.raises(IncompleteResultError):
        empty = PlanningResult(mode="standard", status="infeasible", units=bundled.unit_ids, horizon=24)
        verify_schedule(bundled, empty)


def test_report_json_is_strict():
    recs = [OutageRecord("7", 0, 3.0, 0.0, 0.5, 48.1, 1.2, False)]
    rep = summarize(recs)
    assert rep.relative_deviation == math.inf
    doc = json.loads(rep.to_json())
    assert doc["relative_deviation"] is None
    assert doc["records"][0]["measured_shed_mw"] == 0.5


def test_parallel_verification_matches_serial(tiny_shed_case):
    from frequc.cfcuc import run_mode

    res = run_mode(tiny_shed_case, "cfcuc", c_ufls=50.0)[0]
    one = verify_schedule(tiny_shed_case, res, workers=1)
    two = verify_schedule(tiny_shed_case, res, workers=2)
    assert one.to_dict() == two.to_dict()
    assert one.mean_measured_shed > 0
