"""Command line interface: ``python -m dynbinpack {gen,run,verify,bench}``.

* ``gen`` writes an event stream (JSON lines) from one of the generators;
* ``run`` replays a stream and writes per-event metrics (CSV or JSON) plus,
  optionally, a JSON snapshot of the final packing;
* ``verify`` checks a stream file or a packing snapshot;
* ``bench`` times the compiled and pure-Python kernels.

Exit codes: 0 success, 1 failed verification, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import List, Optional, Sequence

from .core import ValidationReport, as_fraction, check_stream, read_stream, write_stream
from .harness import (DISTRIBUTIONS, RandomSpec, bench_kernels, bench_table, gen_firstfit_adversary,
                      gen_lower_bound, gen_random, run)
from .mixed import verify_snapshot
from .oracle import DEFAULT_MAX_N


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynbinpack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an event stream")
    gen.add_argument("generator", choices=["lower-bound", "firstfit", "random"])
    gen.add_argument("--epsilon-inv", type=int, default=4, help="E = 1/epsilon (default 4)")
    gen.add_argument("--gamma", type=as_fraction, default=Fraction(1), help="migration factor (lower-bound)")
    gen.add_argument("--M", type=int, default=10, help="instance scale (lower-bound, firstfit)")
    gen.add_argument("--c", type=int, default=1, help="migration factor c of the FirstFit adversary")
    gen.add_argument("--n", type=int, default=100, help="number of events (random)")
    gen.add_argument("--dist", choices=DISTRIBUTIONS, default="bimodal", help="size distribution (random)")
    gen.add_argument("--delete-fraction", type=float, default=0.3, help="delete probability (random)")
    gen.add_argument("--max-live", type=int, default=None, help="cap on live items (random)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="stream file to write")

    run_p = sub.add_parser("run", help="replay a stream through the engine")
    run_p.add_argument("--stream", required=True)
    run_p.add_argument("--epsilon-inv", type=int, default=4)
    run_p.add_argument("--verify", action="store_true", help="audit all invariants after every event")
    run_p.add_argument("--oracle-max-n", type=int, default=DEFAULT_MAX_N,
                       help="use the exact optimum while at most this many items are live")
    run_p.add_argument("--out", help="metrics file (.csv or .json)")
    run_p.add_argument("--snapshot", help="write the final packing as JSON")
    run_p.add_argument("--seed", type=int, default=0, help="accepted for symmetry; runs are deterministic")

    ver = sub.add_parser("verify", help="check a stream file or a packing snapshot")
    ver.add_argument("path", nargs="?")
    ver.add_argument("--stream", help="stream file to check")

    bench = sub.add_parser("bench", help="compare kernel backends")
    bench.add_argument("--repeat", type=int, default=3)
    bench.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_gen(args: argparse.Namespace) -> int:
    if args.generator == "lower-bound":
        events = gen_lower_bound(args.gamma, args.M).events
    elif args.generator == "firstfit":
        events = gen_firstfit_adversary(Fraction(1, args.epsilon_inv), args.M, args.c).events
    else:
        spec = RandomSpec(args.n, args.dist, args.delete_fraction, args.seed,
                          Fraction(1, args.epsilon_inv), args.max_live)
        events = gen_random(spec)
    write_stream(events, args.out)
    print(f"wrote {len(events)} events to {args.out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    events = read_stream(args.stream)
    report = run(events, args.epsilon_inv, verify=args.verify, oracle_max_n=args.oracle_max_n)
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(report.to_json() if args.out.endswith(".json") else report.to_csv())
    if args.snapshot:
        with open(args.snapshot, "w") as handle:
            json.dump(report.final_snapshot, handle, indent=1, sort_keys=True)
    for key, value in report.summary().items():
        print(f"{key}: {value}")
    if args.verify and not report.all_ok:
        first = report.failures()[0]
        print(f"invariant violation at event {first.t}: {first.violations[0]}", file=sys.stderr)
        return 1
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    path = args.stream or args.path
    if not path:
        print("verify: give a snapshot or --stream FILE", file=sys.stderr)
        return 2
    with open(path) as handle:
        text = handle.read()
    data = None
    if not args.stream:
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            data = None
    if isinstance(data, dict) and "bins" in data:
        report = verify_snapshot(data)
        kind = "snapshot"
    else:
        try:
            check_stream(read_stream(path))
            problems: List[str] = []
        except (ValueError, KeyError) as exc:
            problems = [str(exc)]
        kind = "stream"
        report = ValidationReport(not problems, problems)
    if report.ok:
        print(f"{kind} OK")
        return 0
    print(f"{kind} INVALID")
    for line in report.violations:
        print(f"  {line}")
    return 1


def _cmd_bench(args: argparse.Namespace) -> int:
    results, agree = bench_kernels(args.repeat, args.seed)
    print(bench_table(results, agree))
    return 0 if agree else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return {"gen": _cmd_gen, "run": _cmd_run, "verify": _cmd_verify, "bench": _cmd_bench}[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
