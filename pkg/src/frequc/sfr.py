"""Single-bus frequency response simulation with governor lags and UFLS relays.

State, all per unit on the system base: frequency deviation ``df`` and, per
responding unit, the mechanical power deviation ``pm_g`` on the unit's own
base. The swing equation is

    2 H_sys d(df)/dt = sum_g pm_g M_g / S - (dP - shed) / S - D df

and each governor is a first-order lag  T_g d(pm_g)/dt = -K_g df - pm_g.
Integration is classic fixed-step RK4.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import UNIT_LOSS, Contingency, SystemCase, aggregate_inertia

IDEAL = "ideal"
STAGED = "staged"
NO_SHED = "none"


class TraceError(ValueError):
    """A trace is empty or otherwise unusable."""


@dataclass(frozen=True)
class UflsStage:
    threshold_hz: float
    delay_s: float
    amount_mw: float | None = None
    demand_fraction: float | None = None

    def amount(self, demand_mw: float) -> float:
        if self.amount_mw is not None:
            return self.amount_mw
        return (self.demand_fraction or 0.0) * demand_mw


@dataclass(frozen=True)
class UflsScheme:
    """``ideal`` sheds the least load that keeps the nadir at the threshold; ``staged`` trips relay blocks.

    ``none`` never sheds, which exposes the unprotected nadir.

    For the ideal scheme ``trigger`` picks when that load goes: at the disturbance
    (``onset``) or when frequency first reaches the threshold (``crossing``).
    """

    kind: str = IDEAL
    stages: tuple[UflsStage, ...] = ()
    trigger: str = "onset"

    def __post_init__(self):
        if self.kind not in (IDEAL, STAGED, NO_SHED):
            raise ValueError(f"unknown UFLS scheme {self.kind!r}")
        if self.trigger not in ("onset", "crossing"):
            raise ValueError(f"unknown ideal trigger {self.trigger!r}")
        if self.kind == STAGED:
            if not self.stages:
                raise ValueError("a staged scheme needs at least one stage")
            th = [s.threshold_hz for s in self.stages]
            if any(b >= a for a, b in zip(th, th[1:])):
                raise ValueError("stage thresholds must be strictly decreasing")
            for s in self.stages:
                if (s.amount_mw is None) == (s.demand_fraction is None):
                    raise ValueError("each stage needs exactly one of amount_mw or demand_fraction")
                if (s.amount_mw or s.demand_fraction or 0.0) <= 0:
                    raise ValueError("stage shed amounts must be positive")
                if s.delay_s < 0:
                    raise ValueError("relay delays must be non-negative")
        elif self.stages:
            raise ValueError(f"the {self.kind} scheme takes no stages")

    @classmethod
    def from_dict(cls, d: Mapping) -> "UflsScheme":
        stages = tuple(UflsStage(**s) for s in d.get("stages", ()))
        return cls(kind=d.get("kind", STAGED if stages else IDEAL), stages=stages, trigger=d.get("trigger", "onset"))


@dataclass(frozen=True)
class SimOptions:
    step: float = 0.01
    horizon: float = 60.0
    saturation: bool = True
    damping: float = 0.0
    stop_after_nadir: bool = False

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class HourState:
    """What the simulator needs from one scheduled hour."""

    dispatch: Mapping[str, float]
    res_used: float = 0.0
    demand: float = math.inf

    @property
    def committed(self) -> list[str]:
        return list(self.dispatch)


@dataclass
class FrequencyTrace:
    time: np.ndarray
    freq_hz: np.ndarray
    shed_mw: np.ndarray
    pm_mw: dict[str, np.ndarray]
    dispatch: dict[str, float]
    disturbance_mw: float
    f_nominal: float
    shed_events: list[tuple[float, float]] = field(default_factory=list)
    blackout: bool = False

    @property
    def nadir_index(self) -> int:
        if len(self.freq_hz) == 0:
            raise TraceError("empty trace")
        return int(np.argmin(self.freq_hz))

    @property
    def nadir_time(self) -> float:
        return float(self.time[self.nadir_index])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        ids = list(self.pm_mw)
        w.writerow(["t", "f_hz", "shed_mw"] + [f"pm_{g}" for g in ids])
        for k in range(len(self.time)):
            w.writerow([f"{self.time[k]:.4f}", f"{self.freq_hz[k]:.6f}", f"{self.shed_mw[k]:.6f}"]
                       + [f"{self.pm_mw[g][k]:.6f}" for g in ids])
        return buf.getvalue()


def nadir(trace: FrequencyTrace) -> float:
    """Lowest frequency sample in Hz."""
    if len(trace.freq_hz) == 0:
        raise TraceError("empty trace")
    return float(np.min(trace.freq_hz))


def measure_shed(trace: FrequencyTrace) -> float:
    """Total load shed by the end of the trace in MW."""
    if len(trace.shed_mw) == 0:
        raise TraceError("empty trace")
    return float(trace.shed_mw[-1])


def headroom_excess(trace: FrequencyTrace, case: SystemCase) -> float:
    """Largest amount (MW) by which any unit's output exceeds its p_max up to the nadir; 0 if none."""
    k = trace.nadir_index
    worst = 0.0
    for g, pm in trace.pm_mw.items():
        over = trace.dispatch[g] + float(np.max(pm[: k + 1])) - case.unit(g).p_max
        worst = max(worst, over)
    return worst


class _System:
    """Vectorized right-hand side for one post-fault configuration."""

    def __init__(self, case: SystemCase, hour: HourState, gg: Contingency | None, opts: SimOptions):
        s = case.freq.s_base
        skip = gg.target if gg is not None and gg.kind == UNIT_LOSS else None
        self.ids = [g for g in hour.committed if g != skip]
        units = [case.unit(g) for g in self.ids]
        self.m = np.array([u.m_base for u in units], dtype=float)
        self.mfrac = self.m / s
        self.k = np.array([u.gov_gain_k for u in units], dtype=float)
        self.tg = np.array([u.gov_time_t for u in units], dtype=float)
        self.cap = np.array([(u.p_max - hour.dispatch[u.id]) / u.m_base for u in units], dtype=float)
        self.h = aggregate_inertia(case, hour.committed, gg)
        self.s = s
        self.f0 = case.freq.f_nominal
        self.d = opts.damping
        self.sat = opts.saturation
        # long enough for the slowest governor to settle
        self.horizon = max(opts.horizon, 10.0 * float(self.tg.max(initial=0.0)))

    def rhs(self, y: np.ndarray, net_mw: float) -> np.ndarray:
        df = y[0]
        pm = y[1:]
        dpm = (-self.k * df - pm) / self.tg
        if self.sat:
            dpm = np.where((pm >= self.cap) & (dpm > 0), 0.0, dpm)
        ddf = (float(pm @ self.mfrac) - net_mw / self.s - self.d * df) / (2.0 * self.h)
        out = np.empty_like(y)
        out[0] = ddf
        out[1:] = dpm
        return out

    def step(self, y: np.ndarray, net_mw: float, h: float) -> np.ndarray:
        k1 = self.rhs(y, net_mw)
        k2 = self.rhs(y + 0.5 * h * k1, net_mw)
        k3 = self.rhs(y + 0.5 * h * k2, net_mw)
        k4 = self.rhs(y + h * k3, net_mw)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if self.sat:
            y[1:] = np.minimum(y[1:], self.cap)
        return y


def _lowest_df(sysm: _System, y0: np.ndarray, net_mw: float, opts: SimOptions, floor: float) -> float:
    """Minimum frequency deviation (pu) reached from state ``y0`` under a constant net disturbance."""
    y = y0.copy()
    low = y[0]
    n = int(round(sysm.horizon / opts.step))
    for _ in range(n):
        y = sysm.step(y, net_mw, opts.step)
        if y[0] < low:
            low = y[0]
        elif y[0] > low + 1e-7 and sysm.rhs(y, net_mw)[0] > 0:
            break
        if low < floor:
            break
    return low


def simulate_outage(
    case: SystemCase,
    hour: HourState,
    gg: Contingency | None,
    scheme: UflsScheme | None = None,
    opts: SimOptions | None = None,
    disturbance_mw: float | None = None,
) -> FrequencyTrace:
    """Trace of frequency, governor output and shed load after contingency ``gg`` in one hour.

    ``disturbance_mw`` replaces the lost power implied by the contingency; with
    ``gg=None`` it is applied with every committed unit responding.
    """
    scheme = scheme or UflsScheme()
    opts = opts or SimOptions()
    if disturbance_mw is None:
        if gg is None:
            raise ValueError("give a contingency or a disturbance size")
        if gg.kind == UNIT_LOSS:
            if gg.target not in hour.dispatch:
                raise ValueError(f"contingency {gg.id}: unit {gg.target} is not committed")
            disturbance_mw = gg.loss_fraction_L * hour.dispatch[gg.target]
        else:
            disturbance_mw = gg.loss_fraction_L * hour.res_used
    dp = float(disturbance_mw)
    sysm = _System(case, hour, gg, opts)
    thr = -case.freq.delta_f_pu
    floor = 2.0 * thr
    shed_cap = min(dp, hour.demand)
    y = np.zeros(1 + len(sysm.ids))
    n = int(round(sysm.horizon / opts.step))
    times = [0.0]
    fs = [0.0]
    sheds = [0.0]
    pms = [y[1:].copy()]
    shed = 0.0
    events: list[tuple[float, float]] = []
    blackout = False

    if sysm.h <= 0:
        # nothing left spinning: the island cannot survive any net deficit
        blackout = dp > 0
        return FrequencyTrace(np.array([0.0]), np.array([sysm.f0]), np.array([0.0]),
                              {g: np.zeros(1) for g in sysm.ids}, {g: hour.dispatch[g] for g in sysm.ids},
                              dp, sysm.f0, [], blackout)

    if scheme.kind == IDEAL and scheme.trigger == "onset" and dp > 0:
        shed = _ideal_onset_shed(sysm, y, dp, opts, thr, floor, shed_cap)
        if shed > 0:
            events.append((0.0, shed))
            sheds[0] = shed
    armed = list(scheme.stages) if scheme.kind == STAGED else []
    timers: dict[int, float] = {}
    crossing_done = False
    low = 0.0
    t = 0.0
    for k in range(n):
        y_new = sysm.step(y, dp - shed, opts.step)
        t_new = (k + 1) * opts.step
        if scheme.kind == IDEAL and scheme.trigger == "crossing" and not crossing_done and y_new[0] < thr:
            # locate the crossing inside the step, then shed just enough to stop the decline
            frac = brentq(lambda h: sysm.step(y, dp - shed, h)[0] - thr, 0.0, opts.step, xtol=1e-12)
            y_c = sysm.step(y, dp - shed, frac)
            t_c = t + frac
            extra = _ideal_crossing_shed(sysm, y_c, dp - shed, opts, thr, floor, shed_cap - shed)
            shed += extra
            crossing_done = True
            if extra > 0:
                events.append((t_c, extra))
            times.append(t_c)
            fs.append(y_c[0])
            sheds.append(shed)
            pms.append(y_c[1:].copy())
            y_new = sysm.step(y_c, dp - shed, t_new - t_c)
        if armed:
            f_hz = sysm.f0 * (1.0 + y_new[0])
            for i, st in enumerate(armed):
                if st is None:
                    continue
                if f_hz < st.threshold_hz:
                    timers.setdefault(i, t_new)
                    if t_new - timers[i] >= st.delay_s - 1e-12:
                        amt = min(st.amount(hour.demand), max(0.0, shed_cap - shed))
                        shed += amt
                        events.append((t_new, amt))
                        armed[i] = None
                else:
                    timers.pop(i, None)
            if all(s is None for s in armed):
                armed = []
        y, t = y_new, t_new
        times.append(t)
        fs.append(y[0])
        sheds.append(shed)
        pms.append(y[1:].copy())
        low = min(low, y[0])
        if y[0] < floor:
            no_more = (scheme.kind == IDEAL or not armed) and shed >= shed_cap - 1e-9
            if no_more or scheme.kind != IDEAL and not armed:
                blackout = True
                break
        if opts.stop_after_nadir and not timers and y[0] > low + 1e-6 and t > opts.step * 10:
            if sysm.rhs(y, dp - shed)[0] > 0:
                break

    pm_arr = np.array(pms)
    return FrequencyTrace(
        time=np.array(times),
        freq_hz=sysm.f0 * (1.0 + np.array(fs)),
        shed_mw=np.array(sheds),
        pm_mw={g: pm_arr[:, i] * sysm.m[i] for i, g in enumerate(sysm.ids)},
        dispatch={g: hour.dispatch[g] for g in sysm.ids},
        disturbance_mw=dp,
        f_nominal=sysm.f0,
        shed_events=events,
        blackout=blackout,
    )


def _ideal_onset_shed(sysm, y0, dp, opts, thr, floor, cap) -> float:
    """Least shed at the disturbance instant that keeps the lowest frequency at or above the threshold."""

    def excess(s):
        return _lowest_df(sysm, y0, dp - s, opts, floor) - thr

    if excess(0.0) >= 0:
        return 0.0
    if excess(cap) < 0:
        return cap
    # without saturation the nadir is linear in the net disturbance; start the bracket there
    unit_low = _lowest_df(_unsaturated(sysm), y0, 1.0, opts, -math.inf)
    guess = dp - thr / unit_low if unit_low < 0 else 0.0
    lo, hi = max(0.0, guess - 0.05), min(cap, guess + 0.05)
    if excess(lo) >= 0:
        lo = 0.0
    if excess(hi) < 0:
        hi = cap
    return float(brentq(excess, lo, hi, xtol=1e-7))


def _ideal_crossing_shed(sysm, y_c, net, opts, thr, floor, cap) -> float:
    def excess(s):
        return _lowest_df(sysm, y_c, net - s, opts, floor) - thr + 1e-9

    if cap <= 0 or excess(0.0) >= 0:
        return 0.0
    if excess(cap) < 0:
        return cap
    return float(brentq(excess, 0.0, cap, xtol=1e-7))


def _unsaturated(sysm: _System) -> _System:
    clone = object.__new__(_System)
    clone.__dict__.update(sysm.__dict__)
    clone.sat = False
    return clone


def hour_state(case: SystemCase, result, t: int) -> HourState:
    committed = result.committed(t)
    return HourState({g: result.dispatch[g][t] for g in committed}, result.res_used[t], case.demand[t])


@dataclass
class OutageRecord:
    contingency: str
    hour: int
    disturbance_mw: float
    estimated_shed_mw: float | None
    measured_shed_mw: float
    nadir_hz: float
    nadir_time_s: float
    blackout: bool
    headroom_excess_mw: float | None = None


@dataclass
class VerificationReport:
    records: list[OutageRecord]
    mean_measured_shed: float
    mean_estimated_shed: float | None
    relative_deviation: float | None
    max_headroom_excess: float | None
    nadir_min_hz: float
    nadir_max_hz: float
    nadir_mean_hz: float
    blackouts: int
    settings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Plain data with non-finite floats mapped to None (strict JSON has no inf/nan)."""
        return _finite(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"


def _finite(o):
    if isinstance(o, float):
        return o if math.isfinite(o) else None
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    return o


class IncompleteResultError(ValueError):
    """The planning result has no schedule to replay."""


def _one(args):
    case, hour, gg, t, scheme, opts, estimate, pcrit_probe = args
    tr = simulate_outage(case, hour, gg, scheme, opts)
    rec = OutageRecord(gg.id, t, tr.disturbance_mw, estimate, measure_shed(tr), nadir(tr), tr.nadir_time, tr.blackout)
    if pcrit_probe is not None:
        probe_opts = SimOptions(opts.step, opts.horizon, False, opts.damping, True)
        probe = simulate_outage(case, hour, gg, UflsScheme(), probe_opts, disturbance_mw=pcrit_probe)
        rec.headroom_excess_mw = headroom_excess(probe, case)
    return rec


def verify_schedule(
    case: SystemCase,
    result,
    scheme: UflsScheme | None = None,
    opts: SimOptions | None = None,
    include_res: bool = False,
    check_headroom: bool = True,
    workers: int = 1,
) -> VerificationReport:
    """Replay every outage of every hour and compare measured with estimated shed.

    Only contingencies whose lost element is producing are replayed; the RES
    contingency joins when ``include_res`` is set. The headroom check repeats each
    outage at the schedule's critical power with saturation off.
    """
    if not getattr(result, "commitment", None) or not result.dispatch:
        raise IncompleteResultError("result has no commitment/dispatch to verify")
    scheme = scheme or UflsScheme()
    opts = opts or SimOptions(stop_after_nadir=True)
    jobs = []
    for gg in case.contingencies:
        if gg.kind != UNIT_LOSS and not include_res:
            continue
        for t in range(case.horizon):
            hour = hour_state(case, result, t)
            if gg.kind == UNIT_LOSS and gg.target not in hour.dispatch:
                continue
            if gg.kind != UNIT_LOSS and hour.res_used <= 1e-9:
                continue
            est = result.p_ufls[gg.id][t] if result.p_ufls else None
            probe = None
            if check_headroom and result.p_crit:
                probe = result.p_crit[gg.id][t]
            jobs.append((case, hour, gg, t, scheme, opts, est, probe))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_one, jobs, chunksize=4))
    else:
        records = [_one(j) for j in jobs]
    records.sort(key=lambda r: (r.hour, r.contingency))
    return summarize(records, {"scheme": asdict(scheme), "sim": asdict(opts), "include_res": include_res})


def summarize(records: Sequence[OutageRecord], settings: dict | None = None) -> VerificationReport:
    meas = [r.measured_shed_mw for r in records]
    ests = [r.estimated_shed_mw for r in records if r.estimated_shed_mw is not None]
    mean_meas = float(np.mean(meas)) if meas else 0.0
    mean_est = float(np.mean(ests)) if ests and len(ests) == len(records) else None
    rel = None
    if mean_est is not None:
        if mean_est > 0:
            rel = abs(mean_meas - mean_est) / mean_est
        else:
            rel = 0.0 if mean_meas == 0 else math.inf
    heads = [r.headroom_excess_mw for r in records if r.headroom_excess_mw is not None]
    nad = [r.nadir_hz for r in records] or [float("nan")]
    return VerificationReport(
        records=list(records),
        mean_measured_shed=mean_meas,
        mean_estimated_shed=mean_est,
        relative_deviation=rel,
        max_headroom_excess=max(heads) if heads else None,
        nadir_min_hz=float(np.min(nad)),
        nadir_max_hz=float(np.max(nad)),
        nadir_mean_hz=float(np.mean(nad)),
        blackouts=sum(r.blackout for r in records),
        settings=settings or {},
    )
