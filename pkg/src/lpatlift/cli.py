"""Command-line entry point.

Output is JSON lines (or CSV with ``--format csv``).  Streams that carry
randomness start with a header naming the version, the RNG derivation and
the parameters.  Exit status: 0 success, 1 verification failure, 2 usage
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from lpatlift import __version__
from lpatlift._rng import RngSpec
from lpatlift.coalescent import (
    RateError,
    parse_lambda,
    rate_integral,
    rate_table,
    simulate_lambda_coalescent,
)
from lpatlift.lifting import simulate_lift_chain
from lpatlift.partitions import PartitionError, discrete_partition, from_text, to_text
from lpatlift.port_trees import EnumerationCapError, encode, iter_ports, sample_lpat
from lpatlift.stats_verify import (
    DEFAULTS,
    EXPERIMENTS,
    ExperimentConfig,
    _Jumps,
    header,
    jsonable,
    reports_csv,
    verify_suite,
)

THREADS_ENV = "LPATLIFT_THREADS"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise UsageError(f"{THREADS_ENV} must be at least 1, got {value}")
    return value


def _positive(name: str, value: Optional[int], minimum: int = 1) -> None:
    if value is not None and value < minimum:
        raise UsageError(f"{name} must be at least {minimum}, got {value}")


# -- commands ------------------------------------------------------------------------


def cmd_enumerate(args, out) -> int:
    if args.labels is not None:
        pi = from_text(args.labels)
        if args.size is not None and args.size != len(pi):
            raise UsageError(f"--size {args.size} disagrees with {len(pi)} blocks in --labels")
    elif args.size is not None:
        _positive("--size", args.size)
        pi = discrete_partition(args.size)
    else:
        raise UsageError("enumerate needs --size or --labels")
    count = 0
    for t in iter_ports(pi):
        out.write(encode(t) + "\n")
        count += 1
    out.write(f"count={count}\n")
    return EXIT_OK


def _trajectory_header(command: str, spec: RngSpec, params: dict) -> dict:
    return {"type": "header", "command": command, "version": __version__, "rng": spec.as_dict(), "params": params}


def _emit_rows(args, out, head: dict, rows) -> None:
    if args.format == "json":
        out.write(_dump(head) + "\n")
        for row in rows:
            out.write(_dump(row) + "\n")
        return
    out.write("# " + _dump(head) + "\n")
    out.write("rep,index,t,k,partition\n")
    for row in rows:
        k = "" if row.get("k") is None else row["k"]
        out.write(f"{row['rep']},{row['index']},{row['t']!r},{k},{row['partition']}\n")


def cmd_lift_chain(args, out) -> int:
    _positive("--size", args.size)
    _positive("--reps", args.reps)
    spec = RngSpec(args.seed)
    params = {"size": args.size, "reps": args.reps, "emit": args.emit, "horizon": args.horizon}

    def rows():
        for chunk, lo, hi in spec.chunks(args.reps):
            stream = spec.stream(chunk)
            for rep in range(lo, hi):
                traj = simulate_lift_chain(
                    sample_lpat(args.size, stream), stream, horizon=args.horizon, record_null=args.emit == "events"
                )
                pi = traj.initial_partition
                states = iter(traj.states)
                for i, ev in enumerate(traj.events):
                    row = {"rep": rep, "index": i, "t": ev.time}
                    if ev.is_null:
                        row.update(k=None, partition=to_text(pi), null=True)
                    else:
                        pi = next(states)[1]
                        row.update(k=ev.merged_block_count, partition=to_text(pi))
                    yield row

    _emit_rows(args, out, _trajectory_header("lift-chain", spec, params), rows())
    return EXIT_OK


def _rate_entry(value, b: int, k: int, lam) -> dict:
    entry = {"b": b, "k": k, "rate": value}
    if lam.kind in ("beta", "density"):
        entry["quadrature"] = rate_integral(b, k, lam)
    return entry


def cmd_coalescent(args, out) -> int:
    _positive("--n", args.n)
    _positive("--reps", args.reps)
    lam = parse_lambda(args.lam)
    table = rate_table(lam, max(args.n, 2))
    spec = RngSpec(args.seed)
    params = {"n": args.n, "lambda": lam.describe(), "reps": args.reps, "horizon": args.horizon}
    head = _trajectory_header("coalescent", spec, params)
    head["rates"] = [_rate_entry(table.rate(b, k), b, k, lam) for b in sorted(table.rows) for k in sorted(table.rows[b])]
    jumps = _Jumps(table)

    def rows():
        for chunk, lo, hi in spec.chunks(args.reps):
            stream = spec.stream(chunk)
            for rep in range(lo, hi):
                traj = simulate_lambda_coalescent(args.n, None, stream, horizon=args.horizon, _jumps=jumps)
                for i, ((t, pi), k) in enumerate(zip(traj.states, traj.merger_sizes)):
                    yield {"rep": rep, "index": i, "t": t, "k": k, "partition": to_text(pi)}

    _emit_rows(args, out, head, rows())
    return EXIT_OK


def cmd_rates(args, out) -> int:
    _positive("--b-max", args.b_max, 2)
    out.write(rate_table(parse_lambda(args.lam), args.b_max).to_csv())
    return EXIT_OK


def cmd_verify(args, out) -> int:
    _positive("--size", args.size)
    _positive("--reps", args.reps)
    threads = args.threads if args.threads is not None else _default_threads()
    _positive("--threads", threads)
    cfg = ExperimentConfig(
        args.experiment,
        n=args.size,
        lam=args.lam,
        replicates=args.reps,
        seed=args.seed,
        threads=threads,
        threshold=args.threshold,
    )
    reports = verify_suite(cfg)
    if args.format == "json":
        out.write(_dump(header(cfg)) + "\n")
        for r in reports:
            out.write(r.to_json() + "\n")
    else:
        out.write("# " + _dump(header(cfg)) + "\n")
        out.write(reports_csv(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lpatlift", description="Edge lifting on preferential attachment trees.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("enumerate", help="list every PORT on a label set")
    e.add_argument("--size", type=int)
    e.add_argument("--labels", help="partition such as '{1}|{2,5}|{3,4}'")
    e.set_defaults(func=cmd_enumerate)

    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("json", "csv"), default="json")

    lc = sub.add_parser("lift-chain", parents=[fmt], help="simulate the lifting chain from LPATs")
    lc.add_argument("--size", type=int, required=True)
    lc.add_argument("--seed", type=int, default=0)
    lc.add_argument("--reps", type=int, default=1)
    lc.add_argument("--emit", choices=("states", "events"), default="states")
    lc.add_argument("--horizon", type=float)
    lc.set_defaults(func=cmd_lift_chain)

    co = sub.add_parser("coalescent", parents=[fmt], help="simulate a Lambda n-coalescent")
    co.add_argument("--n", type=int, required=True)
    co.add_argument("--lambda", dest="lam", default="arcsine", help="arcsine | kingman | uniform | beta:a,b")
    co.add_argument("--seed", type=int, default=0)
    co.add_argument("--reps", type=int, default=1)
    co.add_argument("--horizon", type=float)
    co.set_defaults(func=cmd_coalescent)

    ra = sub.add_parser("rates", help="rate table as CSV")
    ra.add_argument("--lambda", dest="lam", default="arcsine")
    ra.add_argument("--b-max", type=int, default=8)
    ra.set_defaults(func=cmd_rates)

    v = sub.add_parser("verify", parents=[fmt], help="run a verification experiment")
    v.add_argument("experiment", choices=sorted(EXPERIMENTS))
    v.add_argument("--size", "--n", dest="size", type=int)
    v.add_argument("--lambda", dest="lam", default="arcsine")
    v.add_argument("--reps", type=int)
    v.add_argument("--seed", type=int, default=ExperimentConfig.seed)
    v.add_argument("--threads", type=int, help=f"worker processes (default from {THREADS_ENV}, else 1)")
    v.add_argument("--threshold", type=float)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except (UsageError, EnumerationCapError, PartitionError, RateError, ValueError) as exc:
        print(f"lpatlift: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        return EXIT_OK


__all__ = ["main", "build_parser", "DEFAULTS"]
