"""Grid, initial conditions, time-step policy and diagnostics shared by all solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

IcKind = Literal["step", "sine", "gaussian"]
IC_KINDS: tuple[str, ...] = ("step", "sine", "gaussian")

GAUSSIAN_WIDTH = 0.1


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on the unit interval.

    The default grid is node-centred with both endpoints included, so
    ``spacing = 1 / (N - 1)``. A periodic grid drops the right endpoint
    (``x_i = i / N``) and is used by the Fourier and periodic solvers.
    """

    n_points: int
    periodic: bool = False

    def __post_init__(self) -> None:
        if self.n_points < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.n_points}")

    @property
    def spacing(self) -> float:
        if self.periodic:
            return 1.0 / self.n_points
        return 1.0 / (self.n_points - 1)

    @property
    def coords(self) -> NDArray[np.float64]:
        return np.arange(self.n_points) * self.spacing

    @property
    def n_qubits(self) -> int:
        if not is_power_of_two(self.n_points):
            raise ValueError(f"N={self.n_points} is not a power of two")
        return self.n_points.bit_length() - 1


@dataclass(frozen=True)
class VelocityField:
    grid: Grid1D
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n_points,):
            raise ValueError(
                f"expected {self.grid.n_points} samples, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("velocity field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: NDArray[np.float64]) -> VelocityField:
        return VelocityField(self.grid, values)


@dataclass(frozen=True)
class SimConfig:
    """Physical and numerical parameters of one Burgers problem.

    ``bc_left``/``bc_right`` default to the initial condition's endpoint
    values, which for the step profile gives the usual ``alpha=u_L``,
    ``beta=u_R``.
    """

    viscosity: float = 0.01
    total_time: float = 0.1
    cfl_coefficient: float = 0.1
    ic_kind: str = "step"
    bc_left: float | None = None
    bc_right: float | None = None
    step_levels: tuple[float, float] = (1.0, 0.0)
    periodic: bool = False

    def __post_init__(self) -> None:
        if not self.viscosity > 0:
            raise ValueError(f"viscosity must be positive, got {self.viscosity}")
        if not self.total_time >= 0:
            raise ValueError(f"total_time must be non-negative, got {self.total_time}")
        if not 0 < self.cfl_coefficient <= 1:
            raise ValueError(f"cfl_coefficient must lie in (0, 1], got {self.cfl_coefficient}")
        if self.ic_kind not in IC_KINDS:
            raise ValueError(f"unknown initial condition {self.ic_kind!r}")

    @property
    def reynolds(self) -> float:
        return reynolds_number(self.viscosity)

    def boundary_values(self, grid: Grid1D) -> tuple[float, float]:
        u0 = initial_condition(self.ic_kind, grid, self).values
        left = u0[0] if self.bc_left is None else self.bc_left
        right = u0[-1] if self.bc_right is None else self.bc_right
        return float(left), float(right)


@dataclass(frozen=True)
class ConservationReport:
    mass: float
    momentum: float
    energy: float
    time: float = field(default=0.0)


def make_grid(n: int, periodic: bool = False) -> Grid1D:
    return Grid1D(int(n), periodic=periodic)


def initial_condition(kind: str, grid: Grid1D, config: SimConfig | None = None) -> VelocityField:
    """Sample an initial profile on ``grid``.

    The step takes ``u_L`` on ``x <= 0.5`` (inclusive) and ``u_R`` beyond.
    """
    x = grid.coords
    if kind == "step":
        u_left, u_right = config.step_levels if config is not None else (1.0, 0.0)
        values = np.where(x <= 0.5, u_left, u_right).astype(np.float64)
    elif kind == "sine":
        values = np.sin(2.0 * np.pi * x)
    elif kind == "gaussian":
        values = np.exp(-((x - 0.5) ** 2) / (2.0 * GAUSSIAN_WIDTH**2))
    else:
        raise ValueError(f"unknown initial condition {kind!r}; expected one of {IC_KINDS}")
    return VelocityField(grid, values)


def cfl_timestep(field: VelocityField, viscosity: float, cfl_coefficient: float = 0.1) -> float:
    """Advective/diffusive CFL step; a zero field leaves only the diffusive bound."""
    dx = field.grid.spacing
    umax = float(np.max(np.abs(field.values)))
    advective = dx / umax if umax > 0 else math.inf
    diffusive = dx * dx / viscosity
    return cfl_coefficient * min(advective, diffusive)


def relative_l2_error(pred: VelocityField, ref: VelocityField) -> tuple[float, bool]:
    """Return ``(error, absolute)``.

    ``absolute`` is True when the reference has zero norm, in which case the
    plain norm of ``pred`` is returned instead of a ratio.
    """
    if pred.grid != ref.grid:
        raise ValueError(f"grid mismatch: {pred.grid} vs {ref.grid}")
    diff = np.linalg.norm(pred.values - ref.values)
    denom = np.linalg.norm(ref.values)
    if denom == 0:
        return float(np.linalg.norm(pred.values)), True
    return float(diff / denom), False


def _integrate(values: NDArray[np.float64], grid: Grid1D) -> float:
    if grid.periodic:
        # trapezoid on a periodic grid reduces to the plain sum
        return float(np.sum(values) * grid.spacing)
    return float(np.trapezoid(values, dx=grid.spacing))


def conservation_diagnostics(field: VelocityField, t: float = 0.0) -> ConservationReport:
    u = field.values
    return ConservationReport(
        mass=_integrate(u, field.grid),
        momentum=_integrate(0.5 * u * u, field.grid),
        energy=_integrate(u * u, field.grid),
        time=float(t),
    )


def reynolds_number(viscosity: float) -> float:
    if not viscosity > 0:
        raise ValueError(f"viscosity must be positive, got {viscosity}")
    return 1.0 / (2.0 * viscosity)


def viscosity_from_reynolds(re: float) -> float:
    if not re > 0:
        raise ValueError(f"Reynolds number must be positive, got {re}")
    return 1.0 / (2.0 * re)
