import pytest

from frequc.milp import BINARY, SolveOptions
from frequc.oracle import brute_force_uc
from frequc.solver import check_solution
from frequc.uc import add_reserve_constraints, build_base_model, build_standard_model, solve_standard_uc
from helpers import InitialUnitState, make_case, make_unit, slice_of


def test_two_unit_two_hour_counts():
    case = make_case([make_unit("a"), make_unit("b")], [5.0, 6.0])
    m = build_base_model(case)
    assert sum(1 for v in m.variables if v.kind == BINARY and v.name.startswith("x[")) == 4
    assert sum(1 for v in m.variables if v.kind == BINARY and v.name.startswith("u[")) == 4
    assert len(m.vars_with_prefix("P[")) == 4
    assert len(m.vars_with_prefix("pseg[")) == 4 * case.cost_segments
    assert len(m.rows_with_prefix("balance[")) == 2


def test_single_unit_meets_demand():
    u = make_unit("a", p_max=10.0, p_min=2.0)
    case = make_case([u], [7.0])
    m = build_base_model(case)
    res = solve_standard_uc(case.__class__(**{**case.__dict__, "contingencies": ()}))
    assert res.status == "optimal"
    assert res.commitment["a"] == [1]
    assert res.dispatch["a"][0] == pytest.approx(7.0)
    assert m.n_rows > 0


def test_min_down_window_forces_off():
    u = make_unit("a", min_down=2)
    case = make_case([u], [5.0, 5.0, 5.0], initial={"a": InitialUnitState(True, 5, 5.0)})
    m = build_base_model(case)
    # shut down at hour 1: x[0]=1, x[1]=0 must keep x[2]=0
    row = m.row("mindown[a,2,1]")
    x0, x1, x2 = (m.var(f"x[a,{t}]") for t in range(3))
    assert row.coeffs == {x1: -1.0, x2: 1.0, x0: 1.0} and row.rhs == 1.0
    assignment = {v.name: 0.0 for v in m.variables}
    assignment.update({"x[a,0]": 1.0, "x[a,1]": 0.0, "x[a,2]": 1.0})
    assert check_solution(m, assignment).residuals["mindown[a,2,1]"] > 0


def test_initial_obligation_fixes_commitment():
    u = make_unit("a", min_up=4)
    case = make_case([u], [5.0] * 5, initial={"a": InitialUnitState(True, 1, 5.0)})
    m = build_base_model(case)
    for t in range(3):
        v = m.variables[m.var(f"x[a,{t}]")]
        assert v.lb == v.ub == 1.0
    assert m.variables[m.var("x[a,3]")].lb == 0.0


def test_reserve_coefficients(bundled):
    case = bundled.truncated(["7", "8"], 1)
    m = build_base_model(case)
    add_reserve_constraints(m, case)
    row = m.row("reserve[7,0]")
    assert row.coeffs[m.var("P[7,0]")] == -1.0
    assert m.var("P[8,0]") in row.coeffs and m.var("x[7,0]") not in row.coeffs
    assert row.coeffs[m.var("x[8,0]")] == 11.5
    wind = m.row("reserve[wind,0]")
    assert wind.coeffs[m.var("res_used[0]")] == pytest.approx(-0.2)


def test_single_unit_cannot_cover_its_own_loss():
    case = make_case([make_unit("a")], [5.0])
    res = solve_standard_uc(case)
    assert res.status == "infeasible"


def test_zero_demand_keeps_everything_off():
    case = make_case([make_unit("a"), make_unit("b")], [0.0, 0.0])
    res = solve_standard_uc(case)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(0.0)
    assert all(v == 0 for row in res.commitment.values() for v in row)


def test_excess_demand_is_infeasible():
    case = make_case([make_unit("a"), make_unit("b")], [5.0, 25.0])
    with pytest.warns(UserWarning, match="exceeds fleet capacity"):
        res = solve_standard_uc(case)
    assert res.status == "infeasible"


def test_standard_solution_is_clean_and_matches_oracle(bundled):
    case = slice_of(bundled, ["5", "8", "9", "11"], [24.0, 27.0, 30.0, 28.0])
    res = solve_standard_uc(case, SolveOptions(gap=1e-7))
    report = check_solution(build_standard_model(case), res.assignment)
    assert report.clean
    ref = brute_force_uc(case, "standard")
    assert res.objective == pytest.approx(ref.objective, rel=1e-6)
