import pytest

from frequc.cfcuc import run_mode
from frequc.cli import compare_with_oracle
from frequc.milp import SolveOptions
from frequc.oracle import OracleLimitError, brute_force_uc, unit_sequences
from frequc.uc import solve_standard_uc
from helpers import make_case, make_unit

EXACT = SolveOptions(gap=1e-8)


def test_two_units_one_hour_enumerates_four_commitments():
    case = make_case([make_unit("a"), make_unit("b")], [5.0])
    assert [len(unit_sequences(case, g)) for g in case.unit_ids] == [2, 2]
    res = brute_force_uc(case)
    assert res.settings["enumerated"] == 4
    # one unit alone cannot cover its own loss, so both must run
    assert res.status == "optimal"
    assert res.commitment == {"a": [1], "b": [1]}


def test_min_up_limits_sequences():
    case = make_case([make_unit("a", min_up=3, min_down=1)], [5.0, 5.0, 5.0])
    seqs = unit_sequences(case, "a")
    assert (0, 1, 0) not in seqs and (0, 1, 1) in seqs and (1, 1, 1) in seqs


def test_standard_mode_matches_milp_both_ways(tiny_shed_case):
    ref = brute_force_uc(tiny_shed_case, "standard")
    mine = solve_standard_uc(tiny_shed_case, EXACT)
    assert mine.objective == pytest.approx(ref.objective, rel=1e-6)
    assert mine.commitment == ref.commitment


def test_preventive_mode_is_no_cheaper_than_the_oracle(tiny_shed_case):
    # chords under-estimate pcrit, so the MILP is at least as conservative as exact evaluation
    ref = brute_force_uc(tiny_shed_case, "pfcuc")
    mine = run_mode(tiny_shed_case, "pfcuc", EXACT)[0]
    assert mine.objective >= ref.objective - 1e-6
    assert mine.objective == pytest.approx(ref.objective, rel=2e-3)


def test_shedding_pattern_agrees_with_oracle(tiny_shed_case):
    mine = run_mode(tiny_shed_case, "cfcuc", EXACT, c_ufls=50.0)[0]
    ref = brute_force_uc(tiny_shed_case, "cfcuc", c_ufls=50.0)
    report = compare_with_oracle(tiny_shed_case, mine, ref, tol=1e-3, shed_tol=0.2)
    assert report["agree"], report["problems"]
    shedding = {(g, t) for g, row in ref.p_ufls.items() for t, v in enumerate(row) if v > 1e-6}
    assert shedding and {g for g, _ in shedding} == {"11"}


def test_oracle_refuses_large_cases(bundled):
    with pytest.raises(OracleLimitError, match="at most 6 units"):
        brute_force_uc(bundled)
    with pytest.raises(OracleLimitError):
        brute_force_uc(bundled.truncated(["1", "2"], 5))


def test_infeasible_case_reported_not_raised():
    case = make_case([make_unit("a"), make_unit("b")], [50.0])
    assert brute_force_uc(case).status == "infeasible"
