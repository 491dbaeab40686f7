"""Domain types and exact evaluations of the frequency-security formulas.

Everything in here is a pure function of immutable inputs. The MILP layer
approximates some of these quantities (the square root in particular); the
functions below are the non-linearized ground truth used to check it.

Per-unit convention: inertia constants and governor gains are given on each
machine's own MVA base and converted to the common system base by the factor
``m_base / s_base`` before being summed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

UNIT_LOSS = "unit-loss"
RES_LOSS = "res-loss"


class ConfigurationError(ValueError):
    """A parameter needed for a computation is missing or inconsistent."""


@dataclass(frozen=True)
class GeneratorUnit:
    id: str
    p_max: float
    p_min: float
    m_base: float
    inertia_h: float
    gov_gain_k: float
    gov_time_t: float
    cost_quadratic: tuple[float, float, float] = (0.0, 0.0, 0.0)
    startup_cost: float = 0.0
    min_up: int = 1
    min_down: int = 1
    ramp_up: float = math.inf
    ramp_down: float = math.inf

    @property
    def h_sys(self) -> float:
        """Inertia on a 1 MVA base (H * M_base); divide by S_base for system pu."""
        return self.inertia_h * self.m_base

    @property
    def k_hat(self) -> float:
        """Governor ramp gain K/T on a 1 MVA base."""
        return self.gov_gain_k / self.gov_time_t * self.m_base

    def cost(self, p: float) -> float:
        a, b, c = self.cost_quadratic
        return a + b * p + c * p * p


@dataclass(frozen=True)
class RenewableSource:
    id: str
    availability: tuple[float, ...]
    loss_fraction_L: float = 0.2
    provides_inertia: bool = False
    inertia_h: float = 0.0
    m_base: float = 0.0


@dataclass(frozen=True)
class FrequencyParams:
    f_nominal: float = 50.0
    delta_f_nadir: float = -2.0
    s_base: float = 100.0
    vll: float | None = None
    outage_probabilities: Mapping[str, float] = field(default_factory=dict)

    @property
    def delta_f_pu(self) -> float:
        """Admissible nadir deviation as a positive per-unit magnitude."""
        return abs(self.delta_f_nadir) / self.f_nominal

    @property
    def threshold_hz(self) -> float:
        return self.f_nominal - abs(self.delta_f_nadir)


@dataclass(frozen=True)
class Contingency:
    kind: str
    target: str
    loss_fraction_L: float = 1.0

    @property
    def id(self) -> str:
        return self.target


@dataclass(frozen=True)
class InitialUnitState:
    on: bool = False
    hours_in_state: int = 1000
    p: float = 0.0


@dataclass(frozen=True)
class SystemCase:
    units: tuple[GeneratorUnit, ...]
    res: RenewableSource
    demand: tuple[float, ...]
    horizon: int
    freq: FrequencyParams
    contingencies: tuple[Contingency, ...]
    initial_state: Mapping[str, InitialUnitState] = field(default_factory=dict)
    c_ufls_override: Mapping[str, float] | float | None = None
    cost_segments: int = 4
    name: str = "case"

    def unit(self, uid: str) -> GeneratorUnit:
        for u in self.units:
            if u.id == uid:
                return u
        raise KeyError(uid)

    @property
    def unit_ids(self) -> list[str]:
        return [u.id for u in self.units]

    def contingency(self, cid: str) -> Contingency:
        for c in self.contingencies:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def initial(self, uid: str) -> InitialUnitState:
        u = self.unit(uid)
        return self.initial_state.get(uid, InitialUnitState(False, max(u.min_down, 1), 0.0))

    def with_overrides(self, **changes) -> "SystemCase":
        from dataclasses import replace

        return replace(self, **changes)

    def truncated(self, unit_ids: Sequence[str], hours: int) -> "SystemCase":
        """Sub-case restricted to ``unit_ids`` and the first ``hours`` hours."""
        from dataclasses import replace

        keep = set(unit_ids)
        units = tuple(u for u in self.units if u.id in keep)
        conts = tuple(
            c for c in self.contingencies if c.kind == RES_LOSS or c.target in keep
        )
        res = replace(self.res, availability=tuple(self.res.availability[:hours]))
        init = {k: v for k, v in self.initial_state.items() if k in keep}
        return replace(
            self,
            units=units,
            res=res,
            demand=tuple(self.demand[:hours]),
            horizon=hours,
            contingencies=conts,
            initial_state=init,
        )


@dataclass(frozen=True)
class PwlCurve:
    breakpoints: tuple[tuple[float, float], ...]

    @property
    def n_segments(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def xs(self) -> list[float]:
        return [p[0] for p in self.breakpoints]

    @property
    def ys(self) -> list[float]:
        return [p[1] for p in self.breakpoints]

    def slopes(self) -> list[float]:
        bp = self.breakpoints
        return [(bp[k + 1][1] - bp[k][1]) / (bp[k + 1][0] - bp[k][0]) for k in range(len(bp) - 1)]

    def __call__(self, x: float) -> float:
        bp = self.breakpoints
        if x <= bp[0][0]:
            k = 0
        elif x >= bp[-1][0]:
            k = len(bp) - 2
        else:
            k = next(i for i in range(len(bp) - 1) if x <= bp[i + 1][0])
        (x0, y0), (x1, y1) = bp[k], bp[k + 1]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)


def _excluded_unit(gg: Contingency | str | None) -> str | None:
    if gg is None:
        return None
    if isinstance(gg, str):
        return gg
    return gg.target if gg.kind == UNIT_LOSS else None


def aggregate_inertia(
    case: SystemCase, committed: Iterable[str], excluded_gg: Contingency | str | None
) -> float:
    """System inertia H_sys in pu-seconds on S_base, excluding the lost unit."""
    skip = _excluded_unit(excluded_gg)
    s = case.freq.s_base
    total = sum(case.unit(g).h_sys for g in set(committed) if g != skip) / s
    if case.res.provides_inertia:
        total += case.res.inertia_h * case.res.m_base / s
    return total


def aggregate_gain(
    case: SystemCase, committed: Iterable[str], excluded_gg: Contingency | str | None
) -> float:
    """Aggregated governor ramp gain sum(K/T) in pu on S_base."""
    skip = _excluded_unit(excluded_gg)
    s = case.freq.s_base
    return sum(case.unit(g).k_hat for g in set(committed) if g != skip) / s


def critical_power(h_sys: float, k_sys: float, freq: FrequencyParams) -> float:
    """Largest outage (MW) whose frequency nadir just reaches the admissible deviation."""
    if h_sys < 0 or k_sys < 0:
        raise ValueError("h_sys and k_sys must be non-negative")
    return freq.delta_f_pu * freq.s_base * math.sqrt(2.0 * h_sys * k_sys)


def ideal_ufls(outage_mw: float, p_crit: float) -> float:
    if outage_mw < 0 or p_crit < 0:
        raise ValueError("outage and critical power must be non-negative")
    return max(0.0, outage_mw - p_crit)


def ufls_cost_param(
    freq: FrequencyParams,
    gg: Contingency | str,
    override: Mapping[str, float] | float | None = None,
) -> float:
    """Cost per MW shed for contingency ``gg``: an override, else VLL times outage probability."""
    cid = gg if isinstance(gg, str) else gg.id
    if override is not None:
        if isinstance(override, Mapping):
            if cid in override:
                return float(override[cid])
            if "*" in override:
                return float(override["*"])
        else:
            return float(override)
    rho = freq.outage_probabilities.get(cid)
    if rho is None or freq.vll is None:
        raise ConfigurationError(
            f"no UFLS cost for contingency {cid!r}: give vll and outage probability, or an override"
        )
    return freq.vll * rho


def critical_power_for(
    case: SystemCase, committed: Iterable[str], gg: Contingency | str | None
) -> float:
    committed = list(committed)
    return critical_power(
        aggregate_inertia(case, committed, gg), aggregate_gain(case, committed, gg), case.freq
    )


def piecewise_cost(unit: GeneratorUnit, n_segments: int) -> PwlCurve:
    """Chord interpolation of the quadratic cost over [p_min, p_max]."""
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    a, b, c = unit.cost_quadratic
    if c < 0:
        raise ValueError(f"unit {unit.id}: negative quadratic coefficient gives a non-convex cost")
    if not unit.p_min < unit.p_max:
        raise ValueError(f"unit {unit.id}: p_min must be below p_max")
    step = (unit.p_max - unit.p_min) / n_segments
    xs = [unit.p_min + k * step for k in range(n_segments)] + [unit.p_max]
    return PwlCurve(tuple((x, a + b * x + c * x * x) for x in xs))


def outage_mw(case: SystemCase, gg: Contingency, dispatch: Mapping[str, float], res_used: float) -> float:
    """Lost power L * P for a contingency given one hour's dispatch."""
    if gg.kind == UNIT_LOSS:
        return gg.loss_fraction_L * dispatch.get(gg.target, 0.0)
    return gg.loss_fraction_L * res_used
