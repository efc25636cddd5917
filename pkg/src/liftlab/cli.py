"""Command-line entry point: ``liftlab sweep | hist | analyze``.

Exit codes: 0 on success, 2 on validation or parse errors, 3 when a sweep
produced no records (every cell skipped or infeasible).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from .errors import LiftlabError
from .harness import (
    MECHANISMS,
    SweepConfig,
    analyze,
    default_report_path,
    lift_histogram,
    parse_grid,
    run_sweep,
)
from .io import read_joint_csv, report_to_text, write_text
from .lift import Budget
from .measures import MeasureKind
from .prob import GENERATORS

EXIT_OK, EXIT_INVALID, EXIT_EMPTY = 0, 2, 3


def _mechanisms(text: str) -> tuple[str, ...]:
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    for n in names:
        if n not in MECHANISMS:
            raise argparse.ArgumentTypeError(f"unknown mechanism {n!r}; choose from {MECHANISMS}")
    return names


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="liftlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="Monte-Carlo sweep over budgets, written as CSV")
    sw.add_argument("--ns", type=int, default=5)
    sw.add_argument("--nx", type=int, default=17)
    sw.add_argument("--trials", type=int, default=1000)
    sw.add_argument("--eps", default="0.25:8:0.25", help="start:stop:step (nats) or a list")
    sw.add_argument("--lambda", dest="lambdas", default="0.5", help="comma-separated list")
    sw.add_argument("--mechanism", type=_mechanisms, default=("watchdog-subset",),
                    help="comma-separated subset of " + ", ".join(MECHANISMS))
    sw.add_argument("--kind", default="alip")
    sw.add_argument("--alpha", default="2", help="comma-separated list, alpha-lift only")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--generator", choices=GENERATORS, default="dirichlet")
    sw.add_argument("--joint", help="use this joint CSV for every trial instead of random joints")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--no-timing", action="store_true",
                    help="write 0 wall time so reruns are byte-identical")
    sw.add_argument("--out", required=True)

    hi = sub.add_parser("hist", help="pooled histograms of log min-lift and log max-lift")
    hi.add_argument("--ns", type=int, default=5)
    hi.add_argument("--nx", type=int, default=17)
    hi.add_argument("--trials", type=int, default=1000)
    hi.add_argument("--seed", type=int, default=0)
    hi.add_argument("--width", type=float, default=0.1, help="bin width")
    hi.add_argument("--generator", choices=GENERATORS, default="dirichlet")
    hi.add_argument("--out", required=True)

    an = sub.add_parser("analyze", help="synthesize one mechanism for a joint CSV")
    an.add_argument("joint")
    an.add_argument("--kind", default="alip")
    an.add_argument("--alpha", type=float, default=2.0)
    an.add_argument("--eps-l", type=float, default=math.inf)
    an.add_argument("--eps-u", type=float, default=math.inf)
    an.add_argument("--mechanism", choices=MECHANISMS, default="watchdog-subset")
    an.add_argument("--out", required=True, help="channel CSV path")
    an.add_argument("--report", help="report path (default: <out stem>.report.txt)")
    return ap


def _sweep(args) -> int:
    cfg = SweepConfig(
        ns=args.ns,
        nx=args.nx,
        trials=args.trials,
        eps=parse_grid(args.eps),
        lambdas=parse_grid(args.lambdas),
        mechanisms=args.mechanism,
        kind=MeasureKind.parse(args.kind),
        alphas=parse_grid(args.alpha),
        seed=args.seed,
        out=args.out,
        generator=args.generator,
        joint=read_joint_csv(args.joint) if args.joint else None,
        workers=args.workers,
        timing=not args.no_timing,
    )
    res = run_sweep(cfg)
    return EXIT_OK if res.records else EXIT_EMPTY


def _hist(args) -> int:
    h = lift_histogram(args.ns, args.nx, args.trials, args.seed, args.width, args.generator)
    write_text(args.out, h.to_csv())
    return EXIT_OK


def _analyze(args) -> int:
    kind = MeasureKind.parse(args.kind, args.alpha)
    b = Budget(args.eps_l, args.eps_u)
    report_path = args.report or default_report_path(args.out)
    rep = analyze(args.joint, kind, b, args.mechanism, args.out, report_path)
    sys.stdout.write(report_to_text(rep))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {"sweep": _sweep, "hist": _hist, "analyze": _analyze}
    try:
        return handlers[args.command](args)
    except LiftlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
