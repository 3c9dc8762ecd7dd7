"""Sweeps over solvers and grids, benchmark records, and CSV/JSON emission."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import statistics
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TextIO

import numpy as np

from .classical import UnsupportedCaseError, reference_solution, run_semi_implicit, run_spectral
from .core import (
    SimConfig,
    VelocityField,
    is_power_of_two,
    relative_l2_error,
    reynolds_number,
    viscosity_from_reynolds,
)
from .hse import hse_run
from .mps import TruncationPolicy
from .qtn import qtn_depth_proxy, qtn_run

log = logging.getLogger(__name__)

METHODS = ("gmres", "spectral-classical", "qtn", "hse-fd", "hse-spectral")
QUANTUM_METHODS = frozenset({"qtn", "hse-fd", "hse-spectral"})
DEFAULT_GRID_SIZES = (4, 8, 16, 32, 64, 128)
WORKERS_ENV = "BQB_WORKERS"


@dataclass(frozen=True)
class SweepSpec:
    methods: tuple[str, ...] = METHODS
    grid_sizes: tuple[int, ...] = DEFAULT_GRID_SIZES
    chi_values: tuple[int, ...] = (16,)
    dt_values: tuple[float, ...] = (0.005,)
    reynolds_values: tuple[float, ...] = ()
    nu: float = 0.01
    total_time: float = 0.1
    ic: str = "step"
    cfl: float = 0.1
    seed: int = 0
    repetitions: int = 3
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.methods:
            raise ValueError("sweep needs at least one method")
        if not self.grid_sizes:
            raise ValueError("sweep needs at least one grid size")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown method(s) {unknown}; expected a subset of {METHODS}")
        for n in self.grid_sizes:
            if n < 2:
                raise ValueError(f"grid size must be >= 2, got {n}")
        if QUANTUM_METHODS.intersection(self.methods):
            bad = [n for n in self.grid_sizes if not is_power_of_two(n)]
            if bad:
                raise ValueError(f"quantum methods need power-of-two grids, got {bad}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if not self.chi_values or not self.dt_values:
            raise ValueError("chi_values and dt_values must be non-empty")
        # validates nu, T, cfl and ic
        self.base_config()

    def base_config(self) -> SimConfig:
        return SimConfig(
            viscosity=self.nu, total_time=self.total_time, cfl_coefficient=self.cfl, ic_kind=self.ic
        )

    def viscosities(self) -> tuple[float, ...]:
        if self.reynolds_values:
            return tuple(viscosity_from_reynolds(re) for re in self.reynolds_values)
        return (self.nu,)


@dataclass
class BenchmarkRecord:
    method: str
    N: int
    chi_max: int | None
    dt: float
    nu: float
    Re: float
    l2_error: float | None
    runtime_seconds: float
    entropy_max: float | None = None
    max_bond_used: int | None = None
    depth_per_step: int | None = None
    readout_cost: int | None = None
    diverged: bool = False
    seed: int = 0


FIELDS = tuple(f.name for f in dataclasses.fields(BenchmarkRecord))
_INT_FIELDS = {"N", "chi_max", "max_bond_used", "depth_per_step", "readout_cost", "seed"}
_FLOAT_FIELDS = {"dt", "nu", "Re", "l2_error", "runtime_seconds", "entropy_max"}


@dataclass(frozen=True)
class Cell:
    method: str
    n: int
    chi: int | None
    dt: float
    config: SimConfig
    seed: int
    repetitions: int


@dataclass
class CellOutcome:
    field: VelocityField | None = None
    entropy_max: float | None = None
    max_bond_used: int | None = None
    depth_per_step: int | None = None
    readout_cost: int | None = None
    diverged: bool = False
    note: str = ""


def expand_cells(spec: SweepSpec) -> list[Cell]:
    """Cartesian product of the parameters that apply to each method, in spec order."""
    cells = []
    base = spec.base_config()
    for nu in spec.viscosities():
        config = replace(base, viscosity=nu)
        for method in spec.methods:
            for n in spec.grid_sizes:
                chis: Sequence[int | None] = spec.chi_values if method == "qtn" else (None,)
                for chi in chis:
                    for dt in spec.dt_values:
                        cells.append(Cell(method, n, chi, dt, config, spec.seed, spec.repetitions))
    return cells


def _reference_config(method: str, config: SimConfig) -> SimConfig:
    return replace(config, periodic=True) if method == "spectral-classical" else config


def _solve_cell(cell: Cell) -> CellOutcome:
    config = cell.config
    if cell.method == "gmres":
        return CellOutcome(run_semi_implicit(config, cell.n, dt_max=cell.dt))
    if cell.method == "spectral-classical":
        return CellOutcome(run_spectral(config, cell.n, dt_max=cell.dt))
    if cell.method == "qtn":
        policy = TruncationPolicy(chi_max=cell.chi or 16)
        u, telemetry = qtn_run(config, cell.n, policy, dt_max=cell.dt)
        return CellOutcome(
            u,
            entropy_max=max(r.mid_entropy for r in telemetry),
            max_bond_used=max(max(r.bond_dims, default=1) for r in telemetry),
            depth_per_step=qtn_depth_proxy(cell.n),
        )
    if cell.method in ("hse-fd", "hse-spectral"):
        method = "fd" if cell.method == "hse-fd" else "spectral"
        res = hse_run(config, cell.n, method, cell.dt, "trotter", seed=cell.seed)
        return CellOutcome(
            res.field,
            depth_per_step=res.depth_per_step,
            readout_cost=res.readout_cost,
            diverged=res.diverged,
            note=res.message,
        )
    raise ValueError(f"unknown method {cell.method!r}")


def run_cell(cell: Cell) -> BenchmarkRecord:
    """Time ``repetitions`` solves, then score the last one against the cached reference."""
    timings = []
    outcome: CellOutcome | None = None
    for _ in range(cell.repetitions):
        start = time.perf_counter()
        try:
            outcome = _solve_cell(cell)
        except (UnsupportedCaseError, ValueError, FloatingPointError, RuntimeError) as exc:
            log.info("%s N=%d failed: %s", cell.method, cell.n, exc)
            outcome = CellOutcome(diverged=True, note=str(exc))
            timings.append(max(time.perf_counter() - start, 1e-9))
            break
        timings.append(max(time.perf_counter() - start, 1e-9))
    assert outcome is not None
    l2 = None
    if outcome.field is not None:
        ref = reference_solution(_reference_config(cell.method, cell.config), cell.n)
        l2 = relative_l2_error(outcome.field, ref)[0]
    return BenchmarkRecord(
        method=cell.method,
        N=cell.n,
        chi_max=cell.chi,
        dt=cell.dt,
        nu=cell.config.viscosity,
        Re=reynolds_number(cell.config.viscosity),
        l2_error=l2,
        runtime_seconds=statistics.median(timings),
        entropy_max=outcome.entropy_max,
        max_bond_used=outcome.max_bond_used,
        depth_per_step=outcome.depth_per_step,
        readout_cost=outcome.readout_cost,
        diverged=outcome.diverged,
        seed=cell.seed,
    )


def worker_count(spec: SweepSpec) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return max(1, spec.workers)


def run_sweep(spec: SweepSpec) -> list[BenchmarkRecord]:
    """Run every cell; failures become diverged rows and never stop the sweep.

    Output order follows the spec regardless of how many workers are used.
    """
    cells = expand_cells(spec)
    workers = worker_count(spec)
    if workers == 1:
        return [run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, cells))


# --------------------------------------------------------------------------
# serialisation


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _parse(name: str, text):
    if text is None or text == "":
        return None
    if name == "diverged":
        if isinstance(text, bool):
            return text
        return text.strip().lower() == "true"
    if name in _INT_FIELDS:
        return int(text)
    if name in _FLOAT_FIELDS:
        return float(text)
    return text


def _to_json_value(value):
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_csv(records: Iterable[BenchmarkRecord], fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(FIELDS)
    for rec in records:
        writer.writerow([format_value(getattr(rec, name)) for name in FIELDS])


def emit_csv(records: Iterable[BenchmarkRecord], path: str | Path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_csv(records, fh)
    except OSError as exc:
        raise OSError(f"cannot write CSV records to {path}: {exc.strerror or exc}") from exc


def emit_json(records: Iterable[BenchmarkRecord], path: str | Path) -> None:
    rows = [{name: _to_json_value(getattr(r, name)) for name in FIELDS} for r in records]
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1, allow_nan=False)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write JSON records to {path}: {exc.strerror or exc}") from exc


def emit_records(records: Iterable[BenchmarkRecord], path: str | Path) -> None:
    if str(path).endswith(".json"):
        emit_json(records, path)
    else:
        emit_csv(records, path)


def read_records(path: str | Path) -> list[BenchmarkRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read records from {path}: {exc.strerror or exc}") from exc
    if str(path).endswith(".json"):
        rows = json.loads(text)
    else:
        reader = csv.DictReader(text.splitlines())
        if tuple(reader.fieldnames or ()) != FIELDS:
            raise ValueError(f"{path}: header does not match the record schema")
        rows = list(reader)
    return [BenchmarkRecord(**{name: _parse(name, row.get(name)) for name in FIELDS}) for row in rows]


# --------------------------------------------------------------------------
# key=value sweep configuration

_LIST_KEYS = {
    "methods": str,
    "grid_sizes": int,
    "chi_values": int,
    "dt_values": float,
    "reynolds_values": float,
}
_SCALAR_KEYS = {
    "nu": float,
    "total_time": float,
    "ic": str,
    "cfl": float,
    "seed": int,
    "repetitions": int,
    "workers": int,
}
_ALIASES = {"T": "total_time", "viscosity": "nu", "method": "methods", "N": "grid_sizes"}


def parse_config(text: str) -> SweepSpec:
    """Parse flat ``key = value`` lines; lists are comma separated, ``#`` starts a comment."""
    kwargs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _ALIASES.get(key, key)
        try:
            if key in _LIST_KEYS:
                conv = _LIST_KEYS[key]
                kwargs[key] = tuple(conv(v.strip()) for v in value.split(",") if v.strip())
            elif key in _SCALAR_KEYS:
                kwargs[key] = _SCALAR_KEYS[key](value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return SweepSpec(**kwargs)


def load_config(path: str | Path) -> SweepSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config(text)
