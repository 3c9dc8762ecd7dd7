"""Benchmark of classical, tensor-network and Schrödinger-encoded solvers for 1D viscous Burgers."""

from .bench import BenchmarkRecord, SweepSpec, emit_csv, emit_json, read_records, run_sweep
from .classical import (
    ConvergenceError,
    UnsupportedCaseError,
    explicit_rk4_step,
    reference_solution,
    run_explicit,
    run_semi_implicit,
    run_spectral,
    semi_implicit_step,
    spectral_step,
)
from .core import (
    Grid1D,
    SimConfig,
    VelocityField,
    cfl_timestep,
    conservation_diagnostics,
    initial_condition,
    make_grid,
    relative_l2_error,
)
from .hse import NoiseConfig, hse_run, madelung_encode, pauli_decompose, phase_gradient_readout
from .mps import MPO, MPS, TruncationPolicy, mps_from_vector, mps_to_vector
from .qtn import qtn_run

__all__ = [
    "BenchmarkRecord",
    "ConvergenceError",
    "Grid1D",
    "MPO",
    "MPS",
    "NoiseConfig",
    "SimConfig",
    "SweepSpec",
    "TruncationPolicy",
    "UnsupportedCaseError",
    "VelocityField",
    "cfl_timestep",
    "conservation_diagnostics",
    "emit_csv",
    "emit_json",
    "explicit_rk4_step",
    "hse_run",
    "initial_condition",
    "madelung_encode",
    "make_grid",
    "mps_from_vector",
    "mps_to_vector",
    "pauli_decompose",
    "phase_gradient_readout",
    "qtn_run",
    "read_records",
    "reference_solution",
    "relative_l2_error",
    "run_explicit",
    "run_semi_implicit",
    "run_spectral",
    "run_sweep",
    "semi_implicit_step",
    "spectral_step",
]
