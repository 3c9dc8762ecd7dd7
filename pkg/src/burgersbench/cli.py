"""Command-line entry point: solve, sweep, compare, plot-data and selftest."""

from __future__ import annotations

import argparse
import logging
import statistics
import sys
from collections import defaultdict
from collections.abc import Sequence
from pathlib import Path

from .bench import (
    METHODS,
    QUANTUM_METHODS,
    BenchmarkRecord,
    Cell,
    emit_records,
    load_config,
    read_records,
    run_cell,
    run_sweep,
    write_csv,
)
from .core import IC_KINDS, SimConfig, is_power_of_two
from .figures import FIGURES, RECORD_FIGURES, figure_table, table_to_csv
from .selftest import run_selftest

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this harness reserves 2 for runtime failures."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="burgers-bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", help="run one method on one grid")
    solve.add_argument("--method", required=True, choices=METHODS)
    solve.add_argument("--n", type=int, required=True, help="number of grid points")
    solve.add_argument("--chi", type=int, default=16, help="QTN bond-dimension cap")
    solve.add_argument("--dt", type=float, default=0.005, help="time-step cap")
    solve.add_argument("--nu", type=float, default=0.01)
    solve.add_argument("--T", dest="total_time", type=float, default=0.1)
    solve.add_argument("--ic", default="step", choices=IC_KINDS)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--out", required=True, help="record file (.csv or .json)")

    sweep = sub.add_parser("sweep", help="run a key=value sweep configuration")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", help="record file (.csv or .json); stdout CSV if omitted")

    compare = sub.add_parser("compare", help="per-(method, N) deltas between two record files")
    compare.add_argument("baseline")
    compare.add_argument("candidate")

    plot = sub.add_parser("plot-data", help="emit the CSV table behind one figure")
    plot.add_argument("--figure", required=True, choices=FIGURES)
    plot.add_argument("--records", help="existing record file; a default sweep runs otherwise")
    plot.add_argument("--out", help="output CSV path; stdout if omitted")

    sub.add_parser("selftest", help="run the oracle-equivalence checks")
    return parser


def _write_text(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror or exc}") from exc


def cmd_solve(args) -> int:
    if args.method in QUANTUM_METHODS and not is_power_of_two(args.n):
        raise ValueError(f"{args.method} needs a power-of-two grid, got --n {args.n}")
    if args.n < 2:
        raise ValueError(f"--n must be >= 2, got {args.n}")
    if args.chi < 1 or args.dt <= 0:
        raise ValueError("--chi must be >= 1 and --dt positive")
    config = SimConfig(viscosity=args.nu, total_time=args.total_time, ic_kind=args.ic)
    chi = args.chi if args.method == "qtn" else None
    record = run_cell(Cell(args.method, args.n, chi, args.dt, config, args.seed, 1))
    emit_records([record], args.out)
    status = "diverged" if record.diverged else f"l2_error={record.l2_error:.3e}"
    print(f"{record.method} N={record.N}: {status} in {record.runtime_seconds:.3f}s")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_config(args.config)
    records = run_sweep(spec)
    if args.out:
        emit_records(records, args.out)
    else:
        write_csv(records, sys.stdout)
    failed = sum(r.diverged for r in records)
    print(f"{len(records)} records, {failed} diverged or errored", file=sys.stderr)
    return EXIT_OK


def _group(records: Sequence[BenchmarkRecord]) -> dict[tuple[str, int], tuple[float | None, float]]:
    groups: dict[tuple[str, int], list[BenchmarkRecord]] = defaultdict(list)
    for r in records:
        groups[(r.method, r.N)].append(r)
    out = {}
    for key, rows in groups.items():
        errors = [r.l2_error for r in rows if r.l2_error is not None]
        out[key] = (
            min(errors) if errors else None,
            statistics.median(r.runtime_seconds for r in rows),
        )
    return out


def _sci(value: float | None) -> str:
    return "" if value is None else f"{value:.6e}"


def cmd_compare(args) -> int:
    base = _group(read_records(args.baseline))
    cand = _group(read_records(args.candidate))
    keys = [k for k in base if k in cand]
    if not keys:
        raise ValueError("the two record files share no (method, N) pairs")
    print("method,N,l2_error_a,l2_error_b,l2_delta,runtime_a,runtime_b,runtime_delta")
    for method, n in keys:
        (ea, ta), (eb, tb) = base[(method, n)], cand[(method, n)]
        delta = "" if ea is None or eb is None else f"{eb - ea:.6e}"
        print(f"{method},{n},{_sci(ea)},{_sci(eb)},{delta},{ta:.6e},{tb:.6e},{tb - ta:.6e}")
    only = sorted(set(base) ^ set(cand))
    if only:
        print(f"{len(only)} (method, N) pairs appear in only one file", file=sys.stderr)
    return EXIT_OK


def cmd_plot_data(args) -> int:
    records = None
    if args.records:
        if args.figure not in RECORD_FIGURES:
            raise ValueError(f"figure {args.figure!r} is computed directly and takes no --records")
        records = read_records(args.records)
    _write_text(table_to_csv(figure_table(args.figure, records)), args.out)
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "plot-data": cmd_plot_data,
    "selftest": cmd_selftest,
}


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(cli_main())
