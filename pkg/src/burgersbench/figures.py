"""Tabular data behind each comparison figure; rendering is left to external tools."""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import replace

from .bench import BenchmarkRecord, SweepSpec, format_value, run_sweep
from .core import SimConfig, viscosity_from_reynolds
from .hse import hse_run
from .mps import TruncationPolicy
from .qtn import qtn_run, required_bond_dimension

FIGURES = ("accuracy", "runtime", "depth", "entropy", "chi-sweep", "dt-convergence", "re-scaling")
RECORD_FIGURES = frozenset({"accuracy", "runtime", "depth", "chi-sweep"})
CHI_SWEEP = (2, 4, 8, 16, 32)
RE_VALUES = (10.0, 50.0, 100.0)

Table = tuple[tuple[str, ...], list[tuple]]


def default_records(figure: str, repetitions: int = 1) -> list[BenchmarkRecord]:
    """Records a figure needs when none are supplied."""
    if figure == "chi-sweep":
        spec = SweepSpec(methods=("qtn",), grid_sizes=(128,), chi_values=CHI_SWEEP, repetitions=1)
    else:
        spec = SweepSpec(repetitions=repetitions)
    return run_sweep(spec)


def _column(records: Sequence[BenchmarkRecord], name: str, methods=None) -> list[tuple]:
    return [
        (r.method, r.N, getattr(r, name))
        for r in records
        if (methods is None or r.method in methods)
    ]


def accuracy_table(records: Sequence[BenchmarkRecord]) -> Table:
    return ("method", "N", "l2_error"), _column(records, "l2_error")


def runtime_table(records: Sequence[BenchmarkRecord]) -> Table:
    return ("method", "N", "runtime_seconds"), _column(records, "runtime_seconds")


def depth_table(records: Sequence[BenchmarkRecord]) -> Table:
    rows = [row for row in _column(records, "depth_per_step") if row[2] is not None]
    return ("method", "N", "depth_per_step"), rows


def chi_sweep_table(records: Sequence[BenchmarkRecord]) -> Table:
    rows = [
        (r.N, r.chi_max, r.l2_error, r.max_bond_used, r.entropy_max)
        for r in records
        if r.method == "qtn"
    ]
    return ("N", "chi_max", "l2_error", "max_bond_used", "entropy_max"), rows


def entropy_table(n: int = 128, chi: int = 16, config: SimConfig | None = None) -> Table:
    """Mid-cut entropy and largest bond against time for one QTN run."""
    _, telemetry = qtn_run(config or SimConfig(), n, TruncationPolicy(chi_max=chi), dt_max=0.005)
    rows = [(r.time, r.mid_entropy, max(r.bond_dims, default=1)) for r in telemetry]
    return ("time", "mid_entropy", "max_bond"), rows


def dt_convergence_table(
    n: int = 32, dts: Sequence[float] = (0.005, 0.0025, 0.00125, 0.000625)
) -> Table:
    """Final HSE-FD readout error against an exactly evolved companion, per dt."""
    config = SimConfig(ic_kind="sine", viscosity=0.01, total_time=0.1)
    rows = []
    for dt in dts:
        res = hse_run(config, n, "fd", dt, "trotter", shadow_exact=True)
        rows.append((dt, res.telemetry[-1].l2_vs_exact))
    return ("dt", "l2_vs_exact"), rows


def re_scaling_table(
    re_values: Sequence[float] = RE_VALUES, n_qtn: int = 128, n_hse: int = 64
) -> Table:
    """Required QTN bond dimension and HSE per-step depth as Re varies."""
    rows = []
    for re in re_values:
        config = replace(SimConfig(), viscosity=viscosity_from_reynolds(re))
        rows.append((re, "qtn", required_bond_dimension(config, n_qtn, dt_max=0.005)))
        for method in ("fd", "spectral"):
            res = hse_run(config, n_hse, method, 0.005, "trotter")
            rows.append((re, f"hse-{method}", res.depth_per_step))
    return ("Re", "method", "value"), rows


def figure_table(figure: str, records: Sequence[BenchmarkRecord] | None = None) -> Table:
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    if figure in RECORD_FIGURES:
        recs = records if records is not None else default_records(figure)
        return {
            "accuracy": accuracy_table,
            "runtime": runtime_table,
            "depth": depth_table,
            "chi-sweep": chi_sweep_table,
        }[figure](recs)
    if figure == "entropy":
        return entropy_table()
    if figure == "dt-convergence":
        return dt_convergence_table()
    return re_scaling_table()


def table_to_csv(table: Table) -> str:
    header, rows = table
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()
