"""Deterministic SVG figures from a results directory."""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from rainplan.errors import EmptyTable  # noqa: E402
from rainplan.harness.runner import METRICS, read_csv  # noqa: E402

PLANNER_LABELS = {"rain": "RAIN", "nonresilient": "NonResilient"}
METRIC_LABELS = {
    "mean_rmse": "mean RMSE [m]",
    "peak_rmse": "peak RMSE [m]",
    "mean_entropy": "mean target entropy [nats]",
    "final_grid_entropy": "final map entropy [nats]",
    "mean_unobserved_duration": "mean unobserved duration [steps]",
    "rmse": "RMSE [m]",
    "grid_entropy": "map entropy [nats]",
}
TRACE_METRICS = ("rmse", "mean_entropy", "grid_entropy")
_RC = {"svg.hashsalt": "rainplan", "svg.fonttype": "none", "figure.figsize": (6.4, 4.0), "font.size": 9}


def series_label(planner: str, attack: str) -> str:
    return f"{PLANNER_LABELS.get(planner, planner)} ({attack})"


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def _finite(values) -> list[float]:
    return [v for v in values if math.isfinite(v)]


def bar_chart(rows: list[dict], metric: str, path: Path) -> Path | None:
    """Grouped bars: one group per sweep point, one bar per planner and attack kind."""
    groups = list(dict.fromkeys(r["sweep"] for r in rows))
    series = list(dict.fromkeys((r["planner"], r["attack_kind"]) for r in rows))
    data = defaultdict(list)
    for r in rows:
        if r["status"] == "ok":
            data[(r["sweep"], r["planner"], r["attack_kind"])].append(float(r[metric]))
    if not any(_finite(v) for v in data.values()):
        return None
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        width = 0.8 / len(series)
        x = np.arange(len(groups))
        for i, (planner, attack) in enumerate(series):
            vals = [_finite(data[(g, planner, attack)]) for g in groups]
            means = [np.mean(v) if v else np.nan for v in vals]
            errs = [np.std(v) if v else 0.0 for v in vals]
            ax.bar(x + (i - (len(series) - 1) / 2) * width, means, width, yerr=errs, capsize=2,
                   label=series_label(planner, attack))
        ax.set_xticks(x, [g if g != "-" else "all" for g in groups])
        ax.set_ylabel(METRIC_LABELS.get(metric, metric))
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def time_series(rows: list[dict], traces: dict, metric: str, path: Path) -> Path | None:
    """Seed-averaged per-step curves, one per planner, attack kind and sweep point."""
    curves = defaultdict(list)
    multi = len({r["sweep"] for r in rows}) > 1
    for r in rows:
        tr = traces.get(r["cell"])
        if r["status"] != "ok" or not tr:
            continue
        vals = np.array([float(step[metric]) for step in tr])
        if not np.isfinite(vals).all():
            continue
        curves[(r["sweep"], r["planner"], r["attack_kind"])].append(vals)
    if not curves:
        return None
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for (sweep, planner, attack), runs in curves.items():
            n = min(len(v) for v in runs)
            mean = np.mean([v[:n] for v in runs], axis=0)
            label = series_label(planner, attack) + (f" {sweep}" if multi else "")
            ax.plot(np.arange(1, n + 1), mean, label=label)
        ax.set_xlabel("timestep")
        ax.set_ylabel(METRIC_LABELS.get(metric, metric))
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def load_traces(results_dir: Path, rows: list[dict]) -> dict:
    tdir = Path(results_dir) / "traces"
    out = {}
    for r in rows:
        path = tdir / f"{r['cell']}.csv"
        if path.exists():
            out[r["cell"]] = read_csv(path)
    return out


def emit_plots(results_dir: str | Path) -> list[Path]:
    """Render every figure that the results support; returns the written paths in order."""
    results_dir = Path(results_dir)
    path = results_dir / "results.csv"
    rows = read_csv(path) if path.exists() else []
    if not rows:
        raise EmptyTable(f"no result rows in {results_dir}")
    written = []
    for metric in METRICS:
        p = bar_chart(rows, metric, results_dir / f"summary_{metric}.svg")
        if p:
            written.append(p)
    traces = load_traces(results_dir, rows)
    for metric in TRACE_METRICS:
        p = time_series(rows, traces, metric, results_dir / f"timeseries_{metric}.svg")
        if p:
            written.append(p)
    return written
