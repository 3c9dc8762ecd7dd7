"""Burgers solver that keeps the velocity field as an MPS throughout RK4 stepping."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np

from .classical import FdOperators, clip_to_horizon, problem_grid
from .core import (
    ConservationReport,
    Grid1D,
    SimConfig,
    VelocityField,
    cfl_timestep,
    conservation_diagnostics,
    initial_condition,
    is_power_of_two,
    relative_l2_error,
)
from .mps import (
    MPO,
    MPS,
    TruncationPolicy,
    basis_mps,
    bond_spectra,
    mpo_apply,
    mpo_from_matrix,
    mps_add,
    mps_amplitude,
    mps_from_vector,
    mps_hadamard,
    mps_to_vector,
    mps_truncate,
    von_neumann_entropy,
)

BOND_HARD_CAP = 4096
DEPTH_PER_POINT = 11


class EntanglementOverflowError(RuntimeError):
    pass


@dataclass(frozen=True)
class QtnOperators:
    grid: Grid1D
    gradient: MPO
    laplacian: MPO


@functools.lru_cache(maxsize=32)
def qtn_operators(grid: Grid1D) -> QtnOperators:
    """Derivative MPOs built by TT-SVD of the finite-difference matrices."""
    fd = FdOperators(grid)
    d1 = mpo_from_matrix(fd.gradient_matrix(), tol=1e-12)
    d2 = mpo_from_matrix(fd.diffusion_matrix(), tol=1e-12)
    for name, mpo in (("gradient", d1), ("laplacian", d2)):
        if mpo.max_bond > 5:
            raise AssertionError(f"{name} MPO bond {mpo.max_bond} exceeds 5")
    return QtnOperators(grid, d1, d2)


@dataclass(frozen=True)
class StepTelemetry:
    time: float
    dt: float
    bond_dims: tuple[int, ...]
    mid_entropy: float
    conservation: ConservationReport
    discarded_weight: float


@dataclass(frozen=True)
class QtnState:
    state: MPS
    t: float
    policy: TruncationPolicy
    operators: QtnOperators
    nu: float
    boundary: tuple[float, float] | None = None
    telemetry: tuple[StepTelemetry, ...] = field(default=())

    @property
    def grid(self) -> Grid1D:
        return self.operators.grid

    def field(self) -> VelocityField:
        return VelocityField(self.grid, np.real(mps_to_vector(self.state)))


def _check_bonds(mps: MPS, what: str) -> MPS:
    if mps.max_bond > BOND_HARD_CAP:
        raise EntanglementOverflowError(
            f"{what}: bond dimension {mps.max_bond} exceeds hard cap {BOND_HARD_CAP}; "
            f"bonds={mps.bond_dims}"
        )
    return mps


def qtn_rhs(u: MPS, nu: float, operators: QtnOperators, policy: TruncationPolicy) -> MPS:
    """``-u * (D1 u) + nu * D2 u`` with truncation after every operation."""
    du = mpo_apply(operators.gradient, u, policy)
    raw = _check_bonds(mps_hadamard(u, du), "advection product")
    advect = mps_truncate(raw, policy)
    lap = mpo_apply(operators.laplacian, u, policy)
    return mps_add(advect, lap, -1.0, nu, policy)


def _mid_entropy(mps: MPS) -> float:
    spectra = bond_spectra(mps)
    if not spectra:
        return 0.0
    return von_neumann_entropy(spectra[len(spectra) // 2])


def _telemetry(mps: MPS, grid: Grid1D, t: float, dt: float, dropped: float) -> StepTelemetry:
    values = np.real(mps_to_vector(mps))
    return StepTelemetry(
        time=t,
        dt=dt,
        bond_dims=tuple(mps.bond_dims),
        mid_entropy=_mid_entropy(mps),
        conservation=conservation_diagnostics(VelocityField(grid, values), t),
        discarded_weight=dropped,
    )


def _pin_boundaries(mps: MPS, boundary: tuple[float, float], policy: TruncationPolicy) -> MPS:
    n_sites = mps.n_sites
    last = (1 << n_sites) - 1
    left = boundary[0] - float(np.real(mps_amplitude(mps, 0)))
    right = boundary[1] - float(np.real(mps_amplitude(mps, last)))
    if left == 0 and right == 0:
        return mps
    correction = mps_add(basis_mps(0, n_sites), basis_mps(last, n_sites), left, right)
    return mps_add(mps, correction, 1.0, 1.0, policy)


def qtn_init(
    u0: VelocityField,
    nu: float,
    policy: TruncationPolicy,
    boundary: tuple[float, float] | None = None,
) -> QtnState:
    if not is_power_of_two(u0.grid.n_points):
        raise ValueError(f"N={u0.grid.n_points} is not a power of two")
    ops = qtn_operators(u0.grid)
    mps = mps_from_vector(u0.values, policy)
    first = _telemetry(mps, u0.grid, 0.0, 0.0, mps.discarded_weight)
    return QtnState(mps, 0.0, policy, ops, nu, boundary, (first,))


def qtn_rk4_step(qs: QtnState, dt: float) -> QtnState:
    """Classical RK4 on the MPS with truncation after every stage and the final combination.

    Raises:
        EntanglementOverflowError: an untruncated intermediate exceeded the bond cap.
    """
    u, nu, ops, pol = qs.state, qs.nu, qs.operators, qs.policy
    k1 = qtn_rhs(u, nu, ops, pol)
    k2 = qtn_rhs(mps_add(u, k1, 1.0, 0.5 * dt, pol), nu, ops, pol)
    k3 = qtn_rhs(mps_add(u, k2, 1.0, 0.5 * dt, pol), nu, ops, pol)
    k4 = qtn_rhs(mps_add(u, k3, 1.0, dt, pol), nu, ops, pol)
    incr = mps_add(k1, k2, 1.0, 2.0, pol)
    incr = mps_add(incr, k3, 1.0, 2.0, pol)
    incr = mps_add(incr, k4, 1.0, 1.0, pol)
    new = mps_add(u, incr, 1.0, dt / 6.0, pol)
    dropped = new.discarded_weight
    if qs.boundary is not None:
        new = _pin_boundaries(new, qs.boundary, pol)
        dropped += new.discarded_weight
    if not np.isfinite(new.scale) or not all(np.all(np.isfinite(t)) for t in new.tensors):
        raise FloatingPointError("QTN step produced non-finite tensors")
    t = qs.t + dt
    total = qs.telemetry[-1].discarded_weight + dropped if qs.telemetry else dropped
    record = _telemetry(new, qs.grid, t, dt, total)
    return replace(qs, state=new, t=t, telemetry=(*qs.telemetry, record))


def qtn_run(
    config: SimConfig,
    n: int,
    policy: TruncationPolicy | None = None,
    dt_max: float | None = None,
) -> tuple[VelocityField, tuple[StepTelemetry, ...]]:
    """Integrate to ``config.total_time`` with CFL steps capped at ``dt_max``."""
    policy = policy or TruncationPolicy()
    if not is_power_of_two(n):
        raise ValueError(f"QTN needs a power-of-two grid, got N={n}")
    grid = problem_grid(config, n)
    u0 = initial_condition(config.ic_kind, grid, config)
    boundary = None if grid.periodic else config.boundary_values(grid)
    qs = qtn_init(u0, config.viscosity, policy, boundary)
    T = config.total_time
    current = u0
    while T - qs.t > 1e-14 * max(1.0, T):
        dt = cfl_timestep(current, config.viscosity, config.cfl_coefficient)
        if dt_max is not None:
            dt = min(dt, dt_max)
        dt = clip_to_horizon(dt, T - qs.t)
        qs = qtn_rk4_step(qs, dt)
        current = qs.field()
    return current, qs.telemetry


def qtn_depth_proxy(n: int) -> int:
    """Labelled gate-count estimate ``11 * N``; a linear model, not a compiled circuit."""
    if n < 2:
        raise ValueError(f"N must be >= 2, got {n}")
    return DEPTH_PER_POINT * n


def required_bond_dimension(
    config: SimConfig,
    n: int,
    target: float = 1e-3,
    chi_values: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8),
    dt_max: float | None = None,
) -> int:
    """Smallest ``chi_max`` whose run stays within ``target`` of the untruncated run.

    Returns the largest candidate when none reaches the target.
    """
    exact, _ = qtn_run(config, n, TruncationPolicy(chi_max=1 << 30, eps_cutoff=1e-14), dt_max)
    for chi in chi_values:
        approx, _ = qtn_run(config, n, TruncationPolicy(chi_max=chi, eps_cutoff=1e-14), dt_max)
        if relative_l2_error(approx, exact)[0] <= target:
            return chi
    return chi_values[-1]
