"""Single command-line entry point dispatching every subcommand.

Exit codes: 0 success, 1 usage error, 2 configuration parse/validation error
(the offending field path goes to stderr), 3 simulation or runtime failure,
4 partial batch failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import signal
import sys
from pathlib import Path

from vmsim import analysis, runner, schedule as sched
from vmsim.config import ConfigInvalid, config_to_dict, load_config
from vmsim.engine import format_result_line, run_simulation
from vmsim.model import DomainSize, dump_series_csv, load_series_csv
from vmsim.runner import result_csv_row
from vmsim.times.net import BindFailure, TimesClient, TimesServer, parse_address
from vmsim.times.store import SeriesStore, StoreError
from vmsim.workloads import WorkloadMissing, open_workloads


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--csv", help="append the result row to this CSV file")
    p.add_argument("--dump-config", action="store_true",
                   help="print the normalized config as JSON and exit")

    p = sub.add_parser("batch", help="run the factor-level matrix of simulations")
    p.add_argument("--initial", required=True, help="comma-separated controller names")
    p.add_argument("--realloc", required=True)
    p.add_argument("--placement", required=True)
    p.add_argument("--estimators", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--err", required=True)
    p.add_argument("--parallelism", type=int, default=1)

    p = sub.add_parser("schedule", help="schedule tools")
    ssub = p.add_subparsers(dest="schedule_command", required=True)
    b = ssub.add_parser("build", help="generate an arrival-departure schedule")
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--rate", type=float, required=True, help="arrivals per second")
    b.add_argument("--mean-lifetime", type=float, required=True)
    b.add_argument("--horizon", type=int, required=True)
    b.add_argument("--sizes", required=True, help="JSON file with the size catalog")
    b.add_argument("--series-pool", default="",
                   help="series name prefix, resolved against --workloads")
    b.add_argument("--workloads", help="series source: directory or HOST:PORT")
    b.add_argument("--series", help="explicit comma-separated series names")
    b.add_argument("--lifetime-dist", choices=("exponential", "fixed"),
                   default="exponential")
    b.add_argument("--id", dest="schedule_id", default="generated")

    p = sub.add_parser("times", help="series store tools")
    tsub = p.add_subparsers(dest="times_command", required=True)
    t = tsub.add_parser("serve", help="serve a store directory over the network")
    t.add_argument("--listen", required=True, help="HOST:PORT")
    t.add_argument("--store", required=True)
    for name, need_name in (("put", True), ("get", True), ("list", False)):
        t = tsub.add_parser(name)
        if need_name:
            t.add_argument("name")
        else:
            t.add_argument("prefix", nargs="?", default="")
        group = t.add_mutually_exclusive_group(required=True)
        group.add_argument("--store")
        group.add_argument("--addr", help="HOST:PORT of a running server")
        if name == "put":
            t.add_argument("--file", required=True, help="CSV trace (t_s,util_pct)")

    p = sub.add_parser("analyze", help="aggregate a batch CSV into a report")
    p.add_argument("results")
    p.add_argument("--out", required=True, help="report path (.md or .html)")
    p.add_argument("--svg", action="store_true", help="include the bar chart")

    return parser


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else list(argv))


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems and 0 for --help
        return 0 if exc.code == 0 else 1
    handler = {
        "simulate": _cmd_simulate,
        "batch": _cmd_batch,
        "schedule": _cmd_schedule,
        "times": _cmd_times,
        "analyze": _cmd_analyze,
    }[args.command]
    return handler(args)


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


def _cmd_simulate(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigInvalid as exc:
        return _fail(2, f"config error: {exc}")
    if args.dump_config:
        print(json.dumps(config_to_dict(config), indent=2))
        return 0
    if config.schedule_path is None:
        return _fail(2, "config error: schedule: missing required field")
    if config.workloads is None:
        return _fail(2, "config error: workloads: missing required field")
    try:
        schedule = sched.read_schedule(_resolve_relative(args.config, config.schedule_path))
        provider = open_workloads(_resolve_relative(args.config, config.workloads))
    except (sched.ScheduleError, WorkloadMissing) as exc:
        return _fail(2, f"config error: {exc}")
    result = run_simulation(config, schedule, provider)
    if result.status != "ok":
        return _fail(3, f"simulation failed: {result.message}")
    print(format_result_line(result))
    if args.csv:
        path = Path(args.csv)
        new_file = not path.exists()
        with open(path, "a", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if new_file:
                writer.writerow(runner.CSV_HEADER)
            writer.writerow(result_csv_row(result))
    return 0


def _resolve_relative(config_path, value: str) -> str:
    """Paths inside a config resolve relative to the config file itself."""
    candidate = Path(value)
    if candidate.is_absolute() or candidate.exists():
        return value
    sibling = Path(config_path).resolve().parent / value
    return str(sibling) if sibling.exists() else value


def _split(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(",") if part.strip())


def _cmd_batch(args) -> int:
    try:
        config = load_config(args.config)
        lists = runner.FactorLists(
            initial=_split(args.initial),
            reallocation=_split(args.realloc),
            placement=_split(args.placement),
            estimators=_split(args.estimators),
            seeds=tuple(int(s) for s in _split(args.seeds)),
        )
        schedule = sched.read_schedule(args.schedule)
    except (ConfigInvalid, sched.ScheduleError, runner.EmptyFactor, ValueError) as exc:
        return _fail(2, f"config error: {exc}")
    if "exact" in lists.reallocation and not config.exact_budget.bounded:
        return _fail(2, "config error: exact_budget: at least one bound must be "
                        "finite when the batch sweeps the exact controller")
    if config.workloads is None:
        return _fail(2, "config error: workloads: missing required field")
    workloads = _resolve_relative(args.config, config.workloads)
    matrix = runner.build_matrix(lists)
    try:
        summary = runner.run_batch(matrix, config, schedule, workloads,
                                   args.parallelism, args.out, args.err)
    except (runner.RunnerError, ValueError) as exc:
        return _fail(2, f"batch error: {exc}")
    print(f"BATCH total={summary.total} succeeded={summary.succeeded} "
          f"failed={summary.failed} csv={summary.csv_path} err={summary.err_path}")
    if summary.succeeded == 0:
        return 3
    return 4 if summary.failed else 0


def _cmd_schedule(args) -> int:
    try:
        with open(args.sizes) as fh:
            sizes_doc = json.load(fh)
        sizes = tuple(
            DomainSize(cpu_units=item["cpu_units"], memory_mb=item["memory_mb"],
                       probability=float(item["probability"]))
            for item in sizes_doc
        )
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        return _fail(2, f"sizes file error: {exc}")
    if args.series:
        pool = _split(args.series)
    elif args.workloads:
        try:
            pool = tuple(open_workloads(args.workloads).list(args.series_pool))
        except WorkloadMissing as exc:
            return _fail(2, f"workloads error: {exc}")
    else:
        return _fail(2, "config error: series pool needs --series or "
                        "--series-pool with --workloads")
    try:
        params = sched.BuilderParams(
            arrival_rate_per_s=args.rate,
            mean_lifetime_s=args.mean_lifetime,
            horizon_s=args.horizon,
            sizes=sizes,
            series_pool=pool,
            seed=args.seed,
            lifetime_dist=args.lifetime_dist,
            schedule_id=args.schedule_id,
        )
        built = sched.build_schedule(params)
    except sched.InvalidParams as exc:
        return _fail(2, f"builder error: {exc}")
    sched.write_schedule(built, args.out)
    print(f"SCHEDULE id={built.id} entries={len(built.entries)} out={args.out}")
    return 0


def _cmd_times(args) -> int:
    try:
        if args.times_command == "serve":
            return _times_serve(args)
        if args.times_command == "put":
            series = load_series_csv(args.name, args.file)
            if args.store:
                SeriesStore(args.store).put(args.name, series)
            else:
                host, port = parse_address(args.addr)
                with TimesClient(host, port) as client:
                    client.put(args.name, series)
            return 0
        if args.times_command == "get":
            if args.store:
                series = SeriesStore(args.store, create=False).get(args.name)
            else:
                host, port = parse_address(args.addr)
                with TimesClient(host, port) as client:
                    series = client.get(args.name)
            dump_series_csv(series, sys.stdout)
            return 0
        if args.times_command == "list":
            if args.store:
                names = SeriesStore(args.store, create=False).list(args.prefix)
            else:
                host, port = parse_address(args.addr)
                with TimesClient(host, port) as client:
                    names = client.list(args.prefix)
            for name in names:
                print(name)
            return 0
    except (StoreError, ValueError, OSError) as exc:
        return _fail(3, f"times error: {exc}")
    raise AssertionError("unreachable")


def _times_serve(args) -> int:
    try:
        host, port = parse_address(args.listen)
    except ValueError as exc:
        return _fail(2, f"config error: listen: {exc}")
    try:
        server = TimesServer(SeriesStore(args.store), (host, port))
    except BindFailure as exc:
        return _fail(3, f"times error: {exc}")

    def _request_stop(signum, frame):
        # Raising unwinds serve_forever; calling shutdown() here would
        # deadlock, since this handler runs on the serving thread itself.
        raise SystemExit(0)

    for signum in (signal.SIGINT, signal.SIGTERM):
        signal.signal(signum, _request_stop)
    bound_host, bound_port = server.address
    print(f"SERVING {bound_host}:{bound_port} store={args.store}", flush=True)
    try:
        server.serve_forever()
    except (KeyboardInterrupt, SystemExit):
        pass
    finally:
        server.shutdown()
    return 0


def _cmd_analyze(args) -> int:
    try:
        rows = analysis.read_results_csv(args.results)
        aggregated = analysis.aggregate(rows)
    except OSError as exc:
        return _fail(2, f"analyze error: {exc}")
    except analysis.AnalysisError as exc:
        return _fail(2, f"analyze error: {exc}")
    out = Path(args.out)
    fmt = "html" if out.suffix == ".html" else "markdown"
    svg_document = analysis.render_svg(aggregated) if args.svg else None
    svg_filename = None
    if args.svg and fmt == "markdown":
        svg_path = out.with_suffix(".svg")
        svg_path.write_text(svg_document)
        svg_filename = svg_path.name
    report = analysis.render_report(aggregated, fmt, svg_document=svg_document,
                                    svg_filename=svg_filename)
    out.write_text(report)
    print(f"REPORT rows={len(aggregated)} out={out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
