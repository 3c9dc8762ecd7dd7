"""Classical baselines: semi-implicit GMRES stepping, explicit RK4 and Fourier spectral."""

from __future__ import annotations

import functools
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicSpline

from .core import (
    Grid1D,
    SimConfig,
    VelocityField,
    cfl_timestep,
    initial_condition,
    is_power_of_two,
    make_grid,
)
from .kernels import fft, gmres_solve

N_REF = 2048


class ConvergenceError(RuntimeError):
    """Raised when an implicit solve misses its tolerance.

    The best iterate and its relative residual ride along so callers can
    decide whether to keep going.
    """

    def __init__(self, message: str, residual: float, iterate: NDArray[np.float64]):
        super().__init__(message)
        self.residual = residual
        self.iterate = iterate


class UnsupportedCaseError(ValueError):
    pass


@dataclass(frozen=True)
class FdOperators:
    """Finite-difference diffusion and convection on a uniform grid.

    Non-periodic grids use zero rows for the Laplacian at both endpoints and
    one-sided first differences there; periodic grids wrap around.
    """

    grid: Grid1D
    upwind: bool = False

    @property
    def dx(self) -> float:
        return self.grid.spacing

    def gradient(self, u: NDArray) -> NDArray:
        dx = self.dx
        if self.grid.periodic:
            return (np.roll(u, -1) - np.roll(u, 1)) / (2 * dx)
        ux = np.empty_like(u)
        ux[1:-1] = (u[2:] - u[:-2]) / (2 * dx)
        ux[0] = (u[1] - u[0]) / dx
        ux[-1] = (u[-1] - u[-2]) / dx
        return ux

    def _upwind_gradient(self, u: NDArray) -> NDArray:
        dx = self.dx
        if self.grid.periodic:
            back = (u - np.roll(u, 1)) / dx
            fwd = (np.roll(u, -1) - u) / dx
        else:
            back = np.empty_like(u)
            fwd = np.empty_like(u)
            back[1:] = (u[1:] - u[:-1]) / dx
            back[0] = (u[1] - u[0]) / dx
            fwd[:-1] = (u[1:] - u[:-1]) / dx
            fwd[-1] = (u[-1] - u[-2]) / dx
        return np.where(u >= 0, back, fwd)

    def diffusion(self, u: NDArray) -> NDArray:
        dx2 = self.dx**2
        if self.grid.periodic:
            return (np.roll(u, -1) - 2 * u + np.roll(u, 1)) / dx2
        lap = np.zeros_like(u)
        lap[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx2
        return lap

    def convection(self, u: NDArray) -> NDArray:
        ux = self._upwind_gradient(u) if self.upwind else self.gradient(u)
        return u * ux

    def gradient_matrix(self) -> NDArray[np.float64]:
        n = self.grid.n_points
        return np.column_stack([self.gradient(e) for e in np.eye(n)])

    def diffusion_matrix(self) -> NDArray[np.float64]:
        n = self.grid.n_points
        return np.column_stack([self.diffusion(e) for e in np.eye(n)])


def _pin(values: NDArray, boundary: tuple[float, float] | None) -> NDArray:
    if boundary is not None:
        values[0], values[-1] = boundary
    return values


def semi_implicit_step(
    u: VelocityField,
    dt: float,
    nu: float,
    boundary: tuple[float, float] | None = None,
    *,
    upwind: bool = False,
    convection: bool = True,
    tol: float = 1e-10,
) -> VelocityField:
    """One step of ``(I - nu dt L) u_new = u - dt C(u)`` solved with GMRES.

    Raises:
        ConvergenceError: GMRES did not reach ``tol``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    ops = FdOperators(u.grid, upwind=upwind)
    rhs = u.values.copy()
    if convection:
        rhs -= dt * ops.convection(u.values)

    def apply(v: NDArray) -> NDArray:
        return v - nu * dt * ops.diffusion(v)

    result = gmres_solve(apply, rhs, tol=tol)
    if not result.converged:
        raise ConvergenceError(
            f"GMRES stalled at relative residual {result.residual_norm:.3e}",
            result.residual_norm,
            result.x,
        )
    return u.with_values(_pin(np.real(result.x), boundary))


def burgers_rhs(ops: FdOperators, u: NDArray, nu: float, convection: bool = True) -> NDArray:
    out = nu * ops.diffusion(u)
    if convection:
        out -= ops.convection(u)
    return out


def rk4_update(rhs: Callable[[NDArray], NDArray], u: NDArray, dt: float) -> NDArray:
    k1 = rhs(u)
    k2 = rhs(u + 0.5 * dt * k1)
    k3 = rhs(u + 0.5 * dt * k2)
    k4 = rhs(u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def explicit_rk4_step(
    u: VelocityField,
    dt: float,
    nu: float,
    boundary: tuple[float, float] | None = None,
    *,
    convection: bool = True,
) -> VelocityField:
    ops = FdOperators(u.grid)
    new = rk4_update(lambda v: burgers_rhs(ops, v, nu, convection), u.values, dt)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError("explicit RK4 produced non-finite values")
    return u.with_values(_pin(new, boundary))


def wavenumbers(n: int) -> NDArray[np.float64]:
    """Angular wavenumbers ``2 pi * {0, 1, ..., N/2, -N/2+1, ..., -1}`` on [0, 1)."""
    m = np.fft.fftfreq(n, d=1.0 / n)
    m[n // 2] = n // 2
    return 2 * np.pi * m


def _spectral_rhs(u: NDArray, nu: float, convection: bool) -> NDArray:
    n = u.size
    k = wavenumbers(n)
    u_hat = fft(u)
    out = np.real(fft(-(k**2) * u_hat, inverse=True)) * nu
    if convection:
        ux = np.real(fft(1j * k * u_hat, inverse=True))
        prod_hat = fft(u * ux)
        cutoff = n // 3
        mode = np.abs(np.fft.fftfreq(n, d=1.0 / n))
        prod_hat[mode > cutoff] = 0.0
        out -= np.real(fft(prod_hat, inverse=True))
    return out


def spectral_step(
    u: VelocityField, dt: float, nu: float, *, convection: bool = True
) -> VelocityField:
    """RK4 Fourier pseudo-spectral step on the periodic unit interval.

    The nonlinear product is dealiased with the 2/3 rule.
    """
    if not u.grid.periodic:
        raise UnsupportedCaseError("spectral stepping needs a periodic grid")
    if not is_power_of_two(u.grid.n_points):
        raise ValueError(f"N={u.grid.n_points} is not a power of two")
    new = rk4_update(lambda v: _spectral_rhs(v, nu, convection), u.values, dt)
    if not np.all(np.isfinite(new)):
        raise FloatingPointError("spectral step produced non-finite values")
    return u.with_values(new)


Stepper = Callable[[VelocityField, float], VelocityField]


def clip_to_horizon(dt: float, remaining: float) -> float:
    """Clip ``dt`` to the remaining horizon, absorbing round-off slivers into this step."""
    if remaining - dt <= 1e-9 * dt:
        return remaining
    return dt


def integrate(
    u0: VelocityField,
    config: SimConfig,
    step: Stepper,
    dt_max: float | None = None,
    callback: Callable[[VelocityField, float, float], None] | None = None,
) -> VelocityField:
    """March ``u0`` to ``config.total_time`` with CFL-limited steps.

    ``dt_max`` caps each step; the final step is shortened to land on T.
    """
    u = u0
    t = 0.0
    T = config.total_time
    while T - t > 1e-14 * max(1.0, T):
        dt = cfl_timestep(u, config.viscosity, config.cfl_coefficient)
        if dt_max is not None:
            dt = min(dt, dt_max)
        dt = clip_to_horizon(dt, T - t)
        u = step(u, dt)
        t += dt
        if callback is not None:
            callback(u, t, dt)
    return u


def problem_grid(config: SimConfig, n: int) -> Grid1D:
    return make_grid(n, periodic=config.periodic)


def run_semi_implicit(config: SimConfig, n: int, dt_max: float | None = None) -> VelocityField:
    grid = problem_grid(config, n)
    u0 = initial_condition(config.ic_kind, grid, config)
    bcs = None if grid.periodic else config.boundary_values(grid)
    return integrate(
        u0, config, lambda u, dt: semi_implicit_step(u, dt, config.viscosity, bcs), dt_max
    )


def run_explicit(
    config: SimConfig,
    n: int,
    dt_max: float | None = None,
    callback: Callable[[VelocityField, float, float], None] | None = None,
) -> VelocityField:
    grid = problem_grid(config, n)
    u0 = initial_condition(config.ic_kind, grid, config)
    bcs = None if grid.periodic else config.boundary_values(grid)
    return integrate(
        u0,
        config,
        lambda u, dt: explicit_rk4_step(u, dt, config.viscosity, bcs),
        dt_max,
        callback,
    )


def run_spectral(config: SimConfig, n: int, dt_max: float | None = None) -> VelocityField:
    """Fourier spectral run; always on the periodic grid, smooth ICs only."""
    if config.ic_kind == "step":
        raise UnsupportedCaseError(
            "Fourier spectral solver does not support the discontinuous step profile"
        )
    grid = make_grid(n, periodic=True)
    u0 = initial_condition(config.ic_kind, grid, config)
    return integrate(u0, config, lambda u, dt: spectral_step(u, dt, config.viscosity), dt_max)


@functools.lru_cache(maxsize=16)
def _fine_solution(config: SimConfig, n_ref: int) -> VelocityField:
    return run_explicit(config, n_ref)


def resample(field: VelocityField, grid: Grid1D) -> VelocityField:
    """Move ``field`` onto ``grid``.

    Nested grids are sampled by index stride; otherwise a cubic spline
    (periodic when the grid is) interpolates the fine solution.
    """
    src = field.grid
    if src.periodic != grid.periodic:
        raise ValueError("cannot resample between periodic and bounded grids")
    if src.periodic:
        nested = src.n_points % grid.n_points == 0
        stride = src.n_points // grid.n_points if nested else 0
    else:
        nested = (src.n_points - 1) % (grid.n_points - 1) == 0
        stride = (src.n_points - 1) // (grid.n_points - 1) if nested else 0
    if nested:
        return VelocityField(grid, field.values[::stride].copy())
    if src.periodic:
        x = np.append(src.coords, 1.0)
        y = np.append(field.values, field.values[0])
        spline = CubicSpline(x, y, bc_type="periodic")
    else:
        spline = CubicSpline(src.coords, field.values)
    return VelocityField(grid, spline(grid.coords))


def reference_solution(config: SimConfig, n_target: int, n_ref: int = N_REF) -> VelocityField:
    """High-resolution explicit RK4 solution sampled onto an ``n_target`` grid."""
    fine = _fine_solution(config, n_ref)
    return resample(fine, problem_grid(config, n_target))
