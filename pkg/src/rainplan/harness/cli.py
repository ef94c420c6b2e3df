"""Command-line entry point: ``rainplan run | plot | certify-bounds``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from rainplan.errors import ConfigInvalid, EmptyTable
from rainplan.harness.certify import run_certification
from rainplan.harness.manifest import load_manifest
from rainplan.harness.plots import emit_plots
from rainplan.harness.runner import execute, write_results

log = logging.getLogger("rainplan")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rainplan", description="Resilient multi-robot information acquisition")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a JSON run manifest, then render its figures")
    run.add_argument("manifest", type=Path)
    run.add_argument("--seeds", type=_positive, help="use seeds 0..N-1 instead of the manifest's")
    run.add_argument("--paper-scale", action="store_true", help="restore full task durations")
    run.add_argument("--traces", action="store_true", help="write per-trial CSV traces")
    run.add_argument("--jobs", type=_positive, help="worker processes")
    run.add_argument("--out", type=Path, help="output directory (default: the manifest's out_dir)")
    run.add_argument("--no-plots", action="store_true", help="skip SVG rendering")

    plot = sub.add_parser("plot", help="render SVG figures from a results directory")
    plot.add_argument("results_dir", type=Path)

    cert = sub.add_parser("certify-bounds", help="check the approximation bounds on random small instances")
    cert.add_argument("--instances", type=_positive, default=200, help="instances per objective family")
    cert.add_argument("--max-team", type=_positive, default=6)
    cert.add_argument("--seed", type=int, default=0)
    cert.add_argument("--out", type=Path, help="also write the table to this CSV file")
    return parser


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest).with_cli(
        seeds=args.seeds, paper_scale=args.paper_scale, traces=args.traces, jobs=args.jobs, out_dir=args.out
    )
    cells = manifest.cells()
    log.info("running %d cells with %d job(s)", len(cells), manifest.jobs)
    results = execute(manifest)
    summary = write_results(Path(manifest.out_dir), manifest, results)
    if not args.no_plots and summary["failed"] < summary["cells"]:
        for path in emit_plots(manifest.out_dir):
            log.info("wrote %s", path)
    print(f"{summary['cells']} cells, {summary['failed']} failed -> {summary['out_dir']}")
    return 1 if summary["failed"] else 0


def cmd_plot(args) -> int:
    for path in emit_plots(args.results_dir):
        print(path)
    return 0


def cmd_certify(args) -> int:
    report = run_certification(args.instances, args.max_team, args.seed)
    table = report.table()
    print(table)
    print(f"{report.instances} instances in {report.seconds:.1f} s: {'PASS' if report.ok else 'FAIL'}")
    if args.out:
        args.out.write_text(table + "\n")
    return 0 if report.ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handlers = {"run": cmd_run, "plot": cmd_plot, "certify-bounds": cmd_certify}
    try:
        return handlers[args.command](args)
    except (ConfigInvalid, EmptyTable, OSError) as exc:
        print(f"rainplan: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
