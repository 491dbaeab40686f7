"""Command line: solve, verify, compare and oracle runs with file reports.

Exit codes: 0 success, 2 infeasible, 3 error (bad input, missing files, refused
runs), 4 a requested check failed.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import click

from . import __version__
from .case_io import CaseParseError, CaseValidationError, load_case, save_case
from .cfcuc import MODES, LinearizationConfig, run_mode
from .core import ConfigurationError, SystemCase
from .milp import SolveOptions, write_lp
from .oracle import OracleLimitError, brute_force_uc
from .results import PlanningResult, atomic_write_text, load_result, mean_ufls_per_outage, save_result
from .sfr import SimOptions, UflsScheme, hour_state, simulate_outage, verify_schedule

log = logging.getLogger("frequc")

EXIT_OK, EXIT_INFEASIBLE, EXIT_ERROR, EXIT_CHECK = 0, 2, 3, 4


class CheckFailed(Exception):
    """A requested consistency check did not hold; maps to exit code 4."""


def parse_c_ufls(text: str | None) -> list[float]:
    """``"50"`` or ``"50,500,1e4"`` into floats."""
    if text is None or str(text).strip() == "":
        return []
    out = []
    for part in str(text).split(","):
        v = float(part)
        if not math.isfinite(v) or v < 0:
            raise click.BadParameter(f"C_ufls must be a finite non-negative number, got {part!r}")
        out.append(v)
    return out


def parse_scheme(text: str) -> UflsScheme:
    if text == "ideal":
        return UflsScheme()
    if text == "ideal-crossing":
        return UflsScheme(trigger="crossing")
    if text == "none":
        return UflsScheme(kind="none")
    if text.startswith("staged:"):
        path = Path(text.split(":", 1)[1])
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise click.BadParameter(f"cannot read staged scheme {path}: {exc}") from exc
        return UflsScheme.from_dict({"kind": "staged", **doc})
    raise click.BadParameter(f"unknown scheme {text!r}; use ideal, ideal-crossing, none or staged:<file>")


def _case_with_overrides(case: SystemCase, deltaf: float | None) -> SystemCase:
    if deltaf is None:
        return case
    return replace(case, freq=replace(case.freq, delta_f_nadir=-abs(deltaf)))


def _dispatch_csv(res: PlanningResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hour"] + [f"P_{g}" for g in res.units] + ["res_used", "spillage"])
    for t in range(res.horizon):
        w.writerow([t] + [f"{res.dispatch[g][t]:.6f}" for g in res.units]
                   + [f"{res.res_used[t]:.6f}", f"{res.spillage[t]:.6f}"])
    return buf.getvalue()


def _sidecar(out: Path, name: str, payload: dict) -> None:
    payload = dict(payload, timestamp=time.strftime("%Y-%m-%dT%H:%M:%S%z"), version=__version__)
    atomic_write_text(out / f"{name}.log.json", json.dumps(payload, indent=1, sort_keys=True) + "\n")


common_solver = [
    click.option("--deltaf-nadir", type=float, default=None, envvar="FREQUC_DELTAF_NADIR",
                 help="Admissible nadir deviation in Hz (magnitude)."),
    click.option("--breakpoints", type=click.IntRange(min=2), default=16, envvar="FREQUC_BREAKPOINTS",
                 show_default=True, help="Square-root breakpoints."),
    click.option("--seed", type=int, default=0, envvar="FREQUC_SEED", show_default=True),
    click.option("--gap", type=click.FloatRange(min=0), default=1e-3, envvar="FREQUC_GAP", show_default=True,
                 help="Relative MIP gap."),
    click.option("--time-limit", type=click.FloatRange(min=0, min_open=True), default=600.0,
                 envvar="FREQUC_TIME_LIMIT", show_default=True, help="Seconds per solve."),
    click.option("--no-figures", is_flag=True, envvar="FREQUC_NO_FIGURES", help="Skip matplotlib figures."),
]


def with_options(opts):
    def deco(f):
        for o in reversed(opts):
            f = o(f)
        return f

    return deco


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool):
    """Frequency-constrained unit commitment planning and verification."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@cli.command()
@click.argument("case_path", type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice(MODES), default="cfcuc", envvar="FREQUC_MODE", show_default=True)
@click.option("--c-ufls", default=None, envvar="FREQUC_C_UFLS", help="Cost per MW shed (overrides the case file).")
@click.option("--dump-lp", is_flag=True, envvar="FREQUC_DUMP_LP", help="Also write model.lp.")
@click.option("--out", type=click.Path(file_okay=False), default="out", envvar="FREQUC_OUT", show_default=True)
@with_options(common_solver)
def solve(case_path, mode, c_ufls, dump_lp, out, deltaf_nadir, breakpoints, seed, gap, time_limit, no_figures):
    """Solve one planning problem and write result.json and dispatch.csv."""
    case = _case_with_overrides(load_case(case_path), deltaf_nadir)
    costs = parse_c_ufls(c_ufls)
    if len(costs) > 1:
        raise click.BadParameter("solve takes a single --c-ufls value; use compare for sweeps")
    out = Path(out)
    res, model = run_mode(case, mode, SolveOptions(gap=gap, time_limit=time_limit, seed=seed),
                          LinearizationConfig(sqrt_breakpoints=breakpoints), costs[0] if costs else None)
    _sidecar(out, "solve", {"case": str(case_path), "mode": mode, "wall_time": res.wall_time, "status": res.status})
    if dump_lp:
        atomic_write_text(out / "model.lp", write_lp(model))
    if not res.feasible:
        click.echo(f"{mode}: {res.status}", err=True)
        return EXIT_INFEASIBLE if res.status == "infeasible" else EXIT_ERROR
    save_case(case, out / "case.json")
    save_result(res, out / "result.json")
    atomic_write_text(out / "dispatch.csv", _dispatch_csv(res))
    if not no_figures:
        from .plotting import plot_dispatch

        plot_dispatch(res, out / "dispatch.png")
    est = mean_ufls_per_outage(case, res)
    click.echo(f"{mode}: {res.status} cost={res.objective:.2f} gap={res.gap:.2e} "
               f"spillage={sum(res.spillage):.2f} MWh ufls={est:.3f} MW/out" if mode != "standard" else
               f"{mode}: {res.status} cost={res.objective:.2f} gap={res.gap:.2e} spillage={sum(res.spillage):.2f} MWh")
    return EXIT_OK


@cli.command()
@click.argument("result_path", type=click.Path(dir_okay=False))
@click.option("--case", "case_path", type=click.Path(dir_okay=False), default=None,
              help="Case file; defaults to case.json next to the result.")
@click.option("--scheme", default="ideal", envvar="FREQUC_SCHEME", show_default=True,
              help="ideal, ideal-crossing, none or staged:<file.json>.")
@click.option("--bound", type=click.FloatRange(min=0), default=0.15, envvar="FREQUC_BOUND", show_default=True,
              help="Largest accepted relative gap between mean simulated and estimated shed.")
@click.option("--step", type=click.FloatRange(min=0, min_open=True), default=0.01, show_default=True)
@click.option("--include-res", is_flag=True, help="Also replay the renewable contingency.")
@click.option("--traces", is_flag=True, help="Write one CSV trace per replayed outage.")
@click.option("--workers", type=click.IntRange(min=1), default=1, envvar="FREQUC_WORKERS", show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None, envvar="FREQUC_OUT",
              help="Output directory; defaults to the result's directory.")
@click.option("--no-figures", is_flag=True, envvar="FREQUC_NO_FIGURES")
def verify(result_path, case_path, scheme, bound, step, include_res, traces, workers, out, no_figures):
    """Replay every outage of a schedule and compare simulated with estimated shed."""
    result_path = Path(result_path)
    if not result_path.exists():
        raise FileNotFoundError(f"no result at {result_path}")
    res = load_result(result_path)
    case = load_case(case_path or result_path.parent / "case.json")
    out = Path(out) if out else result_path.parent
    sch = parse_scheme(scheme)
    opts = SimOptions(step=step, stop_after_nadir=True)
    rep = verify_schedule(case, res, sch, opts, include_res=include_res, workers=workers)
    atomic_write_text(out / "verify.json", rep.to_json())
    if traces:
        full = SimOptions(step=step)
        for rec in rep.records:
            gg = case.contingency(rec.contingency)
            tr = simulate_outage(case, hour_state(case, res, rec.hour), gg, sch, full)
            atomic_write_text(out / "traces" / f"trace_{rec.contingency}_{rec.hour:02d}.csv", tr.to_csv())
    if not no_figures and rep.records:
        from .plotting import plot_nadir_histogram, plot_shed_comparison

        plot_nadir_histogram(rep, out / "nadir_hist.png", case.freq.threshold_hz)
        plot_shed_comparison(rep, out / "shed_comparison.png")
    rel = rep.relative_deviation
    click.echo(f"simulated {rep.mean_measured_shed:.3f} MW/out, estimated "
               f"{'n/a' if rep.mean_estimated_shed is None else f'{rep.mean_estimated_shed:.3f}'} MW/out, "
               f"deviation {'n/a' if rel is None else f'{rel:.1%}'}, lowest nadir {rep.nadir_min_hz:.3f} Hz")
    if rel is not None and rel > bound:
        raise CheckFailed(f"mean simulated shed deviates {rel:.1%} from the estimate (bound {bound:.1%})")
    return EXIT_OK


def _sweep_job(args):
    case, mode, c, opts, cfg, start = args
    res, _ = run_mode(case, mode, opts, cfg, c, start_commitment=start)
    return res


def comparison_rows(case: SystemCase, runs: list[tuple[str, float | None, PlanningResult]], simulate: bool,
                    scheme: UflsScheme | None = None) -> list[dict]:
    rows = []
    for mode, c, res in runs:
        row = {
            "label": mode if c is None else f"{mode} C={c:g}",
            "mode": mode,
            "c_ufls": c,
            "status": res.status,
            "total_cost": res.objective,
            "gap": res.gap,
            "spillage_mwh": sum(res.spillage),
            "ufls_est_mw_per_outage": mean_ufls_per_outage(case, res) if mode != "standard" else None,
            "ufls_sim_mw_per_outage": None,
        }
        if simulate and res.feasible:
            rep = verify_schedule(case, res, scheme, check_headroom=False)
            row["ufls_sim_mw_per_outage"] = rep.mean_measured_shed
        rows.append(row)
    order = {"standard": 0, "pfcuc": 2}
    rows.sort(key=lambda r: (order.get(r["mode"], 1), r["c_ufls"] if r["c_ufls"] is not None else math.inf))
    return rows


def trend_violations(rows: list[dict], tol: float = 1e-6) -> list[str]:
    """Cost must not fall and estimated shed must not rise as C_ufls grows (CFCUC rows only).

    Costs are compared up to the larger reported MIP gap of each pair, since two
    runs within their gaps cannot be ordered.
    """
    cf = [r for r in rows if r["mode"] == "cfcuc"]
    out = []
    for a, b in zip(cf, cf[1:]):
        slack = max(tol, a.get("gap") or 0.0, b.get("gap") or 0.0) * max(1.0, abs(a["total_cost"]))
        if b["total_cost"] < a["total_cost"] - slack:
            out.append(f"cost falls from {a['label']} ({a['total_cost']:.2f}) to {b['label']} ({b['total_cost']:.2f})")
        if b["ufls_est_mw_per_outage"] > a["ufls_est_mw_per_outage"] + tol:
            out.append(f"shed rises from {a['label']} ({a['ufls_est_mw_per_outage']:.4f}) "
                       f"to {b['label']} ({b['ufls_est_mw_per_outage']:.4f})")
    return out


def _rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    cols = ["label", "mode", "c_ufls", "status", "total_cost", "gap", "spillage_mwh", "ufls_est_mw_per_outage",
            "ufls_sim_mw_per_outage"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r[k] is None else r[k]) for k in cols})
    return buf.getvalue()


@cli.command()
@click.argument("case_path", type=click.Path(dir_okay=False))
@click.option("--c-ufls", default="50,500,1e4", envvar="FREQUC_C_UFLS", show_default=True,
              help="Comma separated CFCUC costs to sweep.")
@click.option("--modes", default="cfcuc", show_default=True,
              help="Comma separated extra modes to include besides the CFCUC sweep (standard, pfcuc).")
@click.option("--simulate", is_flag=True, help="Also replay every schedule with the ideal scheme.")
@click.option("--scheme", default="ideal", envvar="FREQUC_SCHEME", show_default=True)
@click.option("--workers", type=click.IntRange(min=1), default=1, envvar="FREQUC_WORKERS", show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default="out", envvar="FREQUC_OUT", show_default=True)
@with_options(common_solver)
def compare(case_path, c_ufls, modes, simulate, scheme, workers, out, deltaf_nadir, breakpoints, seed, gap,
            time_limit, no_figures):
    """Sweep C_ufls (and optional reference modes) and check the cost and shed trends."""
    case = _case_with_overrides(load_case(case_path), deltaf_nadir)
    costs = parse_c_ufls(c_ufls)
    extra = [m.strip() for m in modes.split(",") if m.strip() and m.strip() != "cfcuc"]
    for m in extra:
        if m not in MODES:
            raise click.BadParameter(f"unknown mode {m!r}")
    plan = [(m, None) for m in extra] + [("cfcuc", c) for c in sorted(costs, reverse=True)]
    if len(plan) < 2:
        raise click.UsageError("a comparison needs at least two runs")
    opts = SolveOptions(gap=gap, time_limit=time_limit, seed=seed)
    cfg = LinearizationConfig(sqrt_breakpoints=breakpoints)
    results: list = [None] * len(plan)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, [(case, m, c, opts, cfg, None) for m, c in plan]))
    else:
        # highest cost first; each schedule seeds the next, cheaper-to-violate run
        prev = None
        for i, (m, c) in enumerate(plan):
            results[i] = _sweep_job((case, m, c, opts, cfg, prev if m == "cfcuc" else None))
            if m == "cfcuc" and results[i].feasible:
                prev = results[i].commitment
    for (m, c), r in zip(plan, results):
        if not r.feasible:
            click.echo(f"{m} {'' if c is None else c}: {r.status}", err=True)
            return EXIT_INFEASIBLE if r.status == "infeasible" else EXIT_ERROR
    rows = comparison_rows(case, [(m, c, r) for (m, c), r in zip(plan, results)], simulate, parse_scheme(scheme))
    out = Path(out)
    atomic_write_text(out / "comparison.csv", _rows_csv(rows))
    atomic_write_text(out / "comparison.json", json.dumps({"rows": rows}, indent=1, sort_keys=True) + "\n")
    for (m, c), r in zip(plan, results):
        save_result(r, out / "runs" / (f"{m}.json" if c is None else f"{m}_{c:g}.json"))
    save_case(case, out / "case.json")
    if not no_figures:
        from .plotting import plot_comparison

        plot_comparison(rows, out / "comparison.png")
    for r in rows:
        est = r["ufls_est_mw_per_outage"]
        click.echo(f"{r['label']:<18} cost={r['total_cost']:.2f} spill={r['spillage_mwh']:.2f} "
                   f"ufls={'-' if est is None else f'{est:.3f}'}")
    bad = trend_violations(rows)
    if bad:
        raise CheckFailed("; ".join(bad))
    return EXIT_OK


@cli.command()
@click.argument("case_path", type=click.Path(dir_okay=False))
@click.option("--units", default=None, help="Comma separated unit ids to keep (default: all).")
@click.option("--hours", type=click.IntRange(min=1), default=None, help="Keep the first N hours (default: all).")
@click.option("--mode", type=click.Choice(MODES), default="standard", envvar="FREQUC_MODE", show_default=True)
@click.option("--c-ufls", default=None, envvar="FREQUC_C_UFLS")
@click.option("--tol", type=click.FloatRange(min=0), default=1e-3, show_default=True,
              help="Relative objective tolerance.")
@click.option("--shed-tol", type=click.FloatRange(min=0), default=0.2, show_default=True, help="MW.")
@click.option("--out", type=click.Path(file_okay=False), default="out", envvar="FREQUC_OUT", show_default=True)
@with_options(common_solver[:2])
def oracle(case_path, units, hours, mode, c_ufls, tol, shed_tol, out, deltaf_nadir, breakpoints):
    """Cross-check the MILP against exhaustive enumeration on a small case."""
    case = _case_with_overrides(load_case(case_path), deltaf_nadir)
    keep = [u.strip() for u in units.split(",")] if units else case.unit_ids
    case = case.truncated(keep, hours or case.horizon)
    costs = parse_c_ufls(c_ufls)
    c = costs[0] if costs else None
    ref = brute_force_uc(case, mode, c)
    mine, _ = run_mode(case, mode, SolveOptions(gap=1e-6), LinearizationConfig(sqrt_breakpoints=breakpoints), c)
    report = compare_with_oracle(case, mine, ref, tol, shed_tol)
    atomic_write_text(Path(out) / "oracle.json", json.dumps(report, indent=1, sort_keys=True, default=str) + "\n")
    click.echo(f"oracle {ref.objective} milp {mine.objective} agree={report['agree']}")
    if not report["agree"]:
        raise CheckFailed("; ".join(report["problems"]))
    return EXIT_OK


def compare_with_oracle(case: SystemCase, mine: PlanningResult, ref: PlanningResult, tol: float,
                        shed_tol: float) -> dict:
    problems = []
    if mine.feasible != ref.feasible:
        problems.append(f"feasibility differs: milp {mine.status}, oracle {ref.status}")
    elif mine.feasible:
        rel = abs(mine.objective - ref.objective) / max(1.0, abs(ref.objective))
        if rel > tol:
            problems.append(f"objective differs by {rel:.2e} (milp {mine.objective:.4f}, oracle {ref.objective:.4f})")
        if mine.mode != "standard":
            for cid in ref.p_ufls:
                for t in range(case.horizon):
                    a, b = mine.p_ufls[cid][t], ref.p_ufls[cid][t]
                    if (a > 1e-6) != (b > 1e-6) and max(a, b) > shed_tol:
                        problems.append(f"shedding pattern differs at {cid},{t}: milp {a:.3f}, oracle {b:.3f}")
                    elif abs(a - b) > shed_tol:
                        problems.append(f"shed differs at {cid},{t}: milp {a:.3f}, oracle {b:.3f}")
    return {"agree": not problems, "problems": problems, "milp_objective": mine.objective,
            "oracle_objective": ref.objective, "enumerated": ref.settings.get("enumerated"),
            "milp_p_ufls": mine.p_ufls, "oracle_p_ufls": ref.p_ufls}


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except CheckFailed as exc:
        click.echo(f"check failed: {exc}", err=True)
        return EXIT_CHECK
    except OracleLimitError as exc:
        click.echo(f"refused: {exc}", err=True)
        return EXIT_ERROR
    except click.exceptions.Abort:
        return EXIT_ERROR
    except click.ClickException as exc:
        exc.show()
        return EXIT_ERROR
    except (CaseParseError, CaseValidationError, ConfigurationError, FileNotFoundError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ERROR
    return rv if isinstance(rv, int) else EXIT_OK


def entry() -> None:
    sys.exit(main())
