"""Command line entry point: ``srfb run|summary|compare|selftest``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import sys

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="srfb", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a seed sweep from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (overrides output.directory)")
    r.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    s = sub.add_parser("summary", help="cross-seed statistics of an experiment directory")
    s.add_argument("--in", dest="indir", required=True)

    c = sub.add_parser("compare", help="oracle-cost table across experiment directories")
    c.add_argument("--in", dest="indirs", nargs="+", required=True)
    c.add_argument("--tol", type=float, default=None, help="residual threshold (default: each run.tolerance)")

    sub.add_parser("selftest", help="run the built-in invariant checks")
    return p


def _cmd_run(args) -> int:
    from .harness import load_config, run_experiment

    cfg = load_config(args.config)
    if args.jobs < 1:
        raise ValueError("--jobs must be >= 1")
    out = args.out or cfg.output.directory
    records = run_experiment(cfg, out, jobs=args.jobs)
    counts = {}
    for rec in records:
        counts[rec.status] = counts.get(rec.status, 0) + 1
    print(f"wrote {len(records)} traces to {out}  status: {counts}")
    return EXIT_OK


def _cmd_summary(args) -> int:
    from .harness import format_table, summarize_dir

    rows, statuses, man = summarize_dir(args.indir)
    print(f"{man['resolved']['algorithm']} on {man['config']['problem']['type']}, "
          f"{len(man['runs'])} seeds, K={man['resolved']['K']}, status: {statuses}")
    print(format_table(rows, ["metric", "mean", "variance", "min", "max", "ratio"]))
    return EXIT_OK


def _cmd_compare(args) -> int:
    from .harness import compare, format_table

    rows = compare(args.indirs, args.tol)
    print(format_table(rows, ["algorithm", "evals_to_tol", "samples_to_tol", "evals_total",
                              "samples_total", "final_residual", "final_gap", "wall_ms",
                              "diverged", "experiment"]))
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_RUNTIME


def main(argv=None) -> int:
    from .harness import ConfigError

    args = _build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "summary": _cmd_summary,
               "compare": _cmd_compare, "selftest": _cmd_selftest}[args.command]
    try:
        return handler(args)
    except (ConfigError, ValueError) as err:
        print(f"srfb {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as err:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"srfb {args.command}: runtime failure: {err!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
