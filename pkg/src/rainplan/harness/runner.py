"""Monte Carlo execution of a manifest and persistence of its results."""
from __future__ import annotations

import csv
import json
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from rainplan.errors import RainError
from rainplan.estimation.grid import write_pgm
from rainplan.harness.manifest import SCHEMA_VERSION, Cell, RunManifest
from rainplan.planning.rain import run_loop
from rainplan.scenarios.metrics import compute_metrics, total_plan_seconds

METRICS = ("mean_rmse", "peak_rmse", "mean_entropy", "final_grid_entropy", "mean_unobserved_duration")
RESULT_COLUMNS = (
    "schema_version", "cell", "sweep", "attack_kind", "attack_cadence", "alpha", "planner", "seed", "status",
    *METRICS, "attacked_steps", "error",
)
TRACE_COLUMNS = ("t", "attacked", "rmse", "mean_entropy", "grid_entropy", "observed")
TIMING_COLUMNS = ("cell", "plan_seconds", "wall_seconds")


def format_value(v) -> str:
    """Serialize a CSV cell so that parsing it back yields the same text."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class CellResult:
    cell: Cell
    row: dict
    timing: dict
    trace_rows: list = field(default_factory=list)
    poses: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)  # name -> OccupancyGrid

    @property
    def ok(self) -> bool:
        return self.row["status"] == "ok"


def _trace_row(rec) -> dict:
    return {
        "t": rec.t,
        "attacked": " ".join(map(str, rec.attacked)),
        "rmse": rec.rmse,
        "mean_entropy": rec.mean_entropy,
        "grid_entropy": rec.grid_entropy,
        "observed": sum(rec.observed),
    }


def run_cell(manifest: RunManifest, cell: Cell) -> CellResult:
    """Run one trial. Planner and scenario errors mark the cell failed instead of raising."""
    start = time.perf_counter()
    cfg = manifest.config(cell.sweep)
    attack = manifest.attack_model(cfg, cell.attack)
    row = {
        "schema_version": SCHEMA_VERSION,
        "cell": cell.cell_id,
        "sweep": cell.sweep_tag,
        "attack_kind": attack.kind,
        "attack_cadence": attack.cadence,
        "alpha": cfg.alpha,
        "planner": cell.planner,
        "seed": cell.seed,
    }
    result = CellResult(cell, row, {"cell": cell.cell_id})
    try:
        sim = cfg.make_simulation(cell.seed)
        half = cfg.horizon.t_task // 2
        grid_snaps = {}
        if hasattr(sim, "grid"):
            record = sim.record

            def snapshot_record(t, attacked, plan_seconds):
                if t == half:
                    grid_snaps[f"t{t:04d}"] = sim.grid
                return record(t, attacked, plan_seconds)

            sim.record = snapshot_record
        trace = run_loop(sim, cfg.horizon, attack, cell.planner, cell.seed)
        metrics = compute_metrics(trace)
        row.update(status="ok", **metrics, attacked_steps=sum(len(r.attacked) for r in trace), error="")
        result.timing["plan_seconds"] = total_plan_seconds(trace)
        result.poses = [tuple(map(float, p)) for p in sim.initial_poses]
        if hasattr(sim, "grid"):
            grid_snaps[f"t{cfg.horizon.t_task:04d}"] = sim.grid
            result.snapshots = grid_snaps
        if manifest.traces:
            result.trace_rows = [_trace_row(r) for r in trace]
    except (RainError, ValueError, ArithmeticError, MemoryError, RuntimeError) as exc:
        msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        row.update(status="failed", **{m: float("nan") for m in METRICS}, attacked_steps=0, error=msg)
        result.timing["plan_seconds"] = float("nan")
        result.timing["traceback"] = traceback.format_exc()
    result.timing["wall_seconds"] = time.perf_counter() - start
    return result


def _run_cell_star(args):
    return run_cell(*args)


def execute(manifest: RunManifest, jobs: int | None = None) -> list[CellResult]:
    """Run every cell; the returned order is the manifest's cell order whatever ``jobs`` is."""
    jobs = manifest.jobs if jobs is None else jobs
    cells = manifest.cells()
    work = [(manifest, c) for c in cells]
    if jobs <= 1 or len(cells) <= 1:
        return [run_cell(*w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell_star, work, chunksize=1))


def _sort_key(row: dict):
    return (row["sweep"], row["attack_kind"], row["attack_cadence"], int(row["seed"]), row["planner"])


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in columns])


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_results(out_dir: Path, manifest: RunManifest, results: list[CellResult]) -> dict:
    """Persist results.csv, timing.csv, the manifest, and optional traces and snapshots."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = sorted((r.row for r in results), key=_sort_key)
    write_csv(out_dir / "results.csv", RESULT_COLUMNS, rows)
    timing = sorted((r.timing for r in results), key=lambda t: t["cell"])
    write_csv(out_dir / "timing.csv", TIMING_COLUMNS, timing)
    (out_dir / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    poses = out_dir / "initial_poses.csv"
    pose_rows = [
        {"cell": r.cell.cell_id, "robot": i, "x": p[0], "y": p[1], "theta": p[2]}
        for r in sorted(results, key=lambda r: r.cell.cell_id) for i, p in enumerate(r.poses)
    ]
    write_csv(poses, ("cell", "robot", "x", "y", "theta"), pose_rows)
    if manifest.traces:
        tdir = out_dir / "traces"
        tdir.mkdir(exist_ok=True)
        for r in results:
            if r.trace_rows:
                write_csv(tdir / f"{r.cell.cell_id}.csv", TRACE_COLUMNS, r.trace_rows)
    snaps = [r for r in results if r.snapshots]
    if snaps:
        sdir = out_dir / "snapshots"
        sdir.mkdir(exist_ok=True)
        for r in snaps:
            for name, grid in r.snapshots.items():
                write_pgm(sdir / f"{r.cell.cell_id}_{name}.pgm", grid)
    failed = [r for r in results if not r.ok]
    if failed:
        (out_dir / "failures.txt").write_text(
            "".join(f"{r.cell.cell_id}\n{r.timing.get('traceback', '')}\n" for r in failed)
        )
    return {"cells": len(results), "failed": len(failed), "out_dir": str(out_dir)}


def run(manifest: RunManifest, out_dir: str | Path | None = None, jobs: int | None = None) -> list[dict]:
    """Execute ``manifest`` and write its outputs; returns the sorted result rows."""
    results = execute(manifest, jobs)
    write_results(Path(out_dir or manifest.out_dir), manifest, results)
    return sorted((r.row for r in results), key=_sort_key)
