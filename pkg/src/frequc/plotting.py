"""Report figures rendered to files (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_dispatch(result, path: str | Path, title: str | None = None) -> Path:
    """Stacked hourly dispatch per unit plus the renewable infeed."""
    hours = np.arange(result.horizon)
    fig, ax = plt.subplots(figsize=(9, 4.5))
    base = np.zeros(result.horizon)
    for g in result.units:
        vals = np.asarray(result.dispatch[g])
        if not vals.any():
            continue
        ax.bar(hours, vals, bottom=base, label=f"unit {g}", width=0.85)
        base += vals
    ax.bar(hours, result.res_used, bottom=base, label="RES", width=0.85, color="0.75")
    ax.set_xlabel("hour")
    ax.set_ylabel("MW")
    ax.set_title(title or f"{result.mode} dispatch")
    ax.legend(ncol=4, fontsize=7, loc="upper left")
    return _save(fig, path)


def plot_traces(traces: Sequence, labels: Sequence[str], path: str | Path, threshold_hz: float | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(8, 4))
    for tr, lab in zip(traces, labels):
        ax.plot(tr.time, tr.freq_hz, lw=1.2, label=lab)
    if threshold_hz is not None:
        ax.axhline(threshold_hz, color="k", ls="--", lw=0.8, label="nadir limit")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (Hz)")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_nadir_histogram(report, path: str | Path, threshold_hz: float | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist([r.nadir_hz for r in report.records], bins=30, color="tab:blue")
    if threshold_hz is not None:
        ax.axvline(threshold_hz, color="k", ls="--", lw=0.8)
    ax.set_xlabel("nadir (Hz)")
    ax.set_ylabel("outages")
    return _save(fig, path)


def plot_shed_comparison(report, path: str | Path) -> Path:
    """Measured against estimated shed, one point per replayed outage."""
    est = [r.estimated_shed_mw or 0.0 for r in report.records]
    meas = [r.measured_shed_mw for r in report.records]
    top = max(est + meas + [1.0])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, top], [0, top], color="0.6", lw=0.8)
    ax.scatter(est, meas, s=10)
    ax.set_xlabel("estimated shed (MW)")
    ax.set_ylabel("simulated shed (MW)")
    return _save(fig, path)


def plot_comparison(rows: Sequence[dict], path: str | Path) -> Path:
    """Total cost and shed per outage across a sweep."""
    labels = [r["label"] for r in rows]
    x = np.arange(len(rows))
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.bar(x, [r["total_cost"] for r in rows], color="tab:blue", width=0.6)
    ax1.set_ylabel("total cost (EUR)", color="tab:blue")
    ax1.set_xticks(x, labels, rotation=20, fontsize=8)
    ax2 = ax1.twinx()
    ax2.plot(x, [r["ufls_est_mw_per_outage"] for r in rows], "o-", color="tab:red", label="estimated")
    sim = [r.get("ufls_sim_mw_per_outage") for r in rows]
    if any(v is not None for v in sim):
        ax2.plot(x, [np.nan if v is None else v for v in sim], "s--", color="tab:orange", label="simulated")
    ax2.set_ylabel("UFLS (MW/outage)", color="tab:red")
    ax2.legend(fontsize=7, loc="upper right")
    return _save(fig, path)
