"""Command-line entry point: ``run``, ``verify`` and ``generate-data``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import bench, mps


def _cmd_run(args) -> int:
    cfg = bench.load_config(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.jobs:
        cfg.jobs = args.jobs
    summary = bench.run_benchmark(cfg)
    sys.stdout.write(bench.format_summary(summary))
    print(f"wrote traces and summaries to {cfg.output_dir}")
    failed = [r["name"] for r in summary["runs"] if r["error"]]
    if failed:
        print(f"error: non-finite values in {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def _cmd_verify(args) -> int:
    cfg = bench.load_config(args.config)
    results = bench.verify(cfg)
    for r in results:
        print(r.line())
    return 1 if any(r.status == "fail" for r in results) else 0


def _cmd_generate(args) -> int:
    data = mps.generate_target_data(args.length, args.noise, args.seed)
    data.write(args.out)
    print(f"wrote {args.length - 1} target matrices to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pullback-ngd", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every method in a benchmark config")
    r.add_argument("config")
    r.add_argument("--output-dir", help="override [benchmark] output_dir")
    r.add_argument("--jobs", type=int, help="override [benchmark] jobs")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="dense oracle checks for a (small) config")
    v.add_argument("config")
    v.set_defaults(func=_cmd_verify)

    g = sub.add_parser("generate-data", help="write noisy Heisenberg two-site RDM targets")
    g.add_argument("--length", type=int, required=True)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # report, don't dump a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
