"""Hydrodynamic Schrodinger solver.

The velocity field is carried as the phase of an n-qubit wavefunction
(``psi = sqrt(rho) * exp(i * phi / nu)``, ``u = dphi/dx``), evolved under a
Pauli-decomposed Hamiltonian and read back out through the phase gradient.

Qubit 0 is the most significant bit of the grid index and the leftmost
character of a Pauli string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import hadamard

from .classical import FdOperators, problem_grid
from .core import (
    Grid1D,
    SimConfig,
    VelocityField,
    initial_condition,
    is_power_of_two,
    relative_l2_error,
)
from .kernels import expm_hermitian, fft

CArray = NDArray[np.complex128]

PAULI_QUBIT_LIMIT = 7
EXACT_QUBIT_LIMIT = 10
VARIATIONAL_QUBIT_LIMIT = 6
DENSITY_QUBIT_LIMIT = 6
AMPLITUDE_FLOOR = 1e-12
DIVERGENCE_FACTOR = 10.0

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


# --------------------------------------------------------------------------
# encoding / readout


def madelung_encode(u: VelocityField, nu: float) -> CArray:
    """Uniform-density wavefunction whose phase is ``(1/nu) * int_0^x u``."""
    if not nu > 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    n = u.grid.n_points
    if not is_power_of_two(n):
        raise ValueError(f"N={n} is not a power of two")
    phase = cumulative_trapezoid(u.values, dx=u.grid.spacing, initial=0.0) / nu
    return np.exp(1j * phase) / math.sqrt(n)


def _phase_to_velocity(phase: NDArray[np.float64], nu: float, grid: Grid1D) -> VelocityField:
    return VelocityField(grid, nu * np.gradient(phase, grid.spacing, edge_order=2))


def phase_gradient_readout(
    psi: CArray, nu: float, grid: Grid1D
) -> tuple[VelocityField, bool]:
    """Velocity from the unwrapped phase; returns ``(field, flagged)``.

    Nodes with ``|psi| <= 1e-12`` have no defined phase; their phase is
    linearly interpolated from the neighbours and ``flagged`` is set.
    """
    psi = np.asarray(psi)
    valid = np.abs(psi) > AMPLITUDE_FLOOR
    if valid.all():
        return _phase_to_velocity(np.unwrap(np.angle(psi)), nu, grid), False
    if valid.sum() < 2:
        return VelocityField(grid, np.zeros(grid.n_points)), True
    idx = np.flatnonzero(valid)
    known = np.unwrap(np.angle(psi[idx]))
    phase = np.interp(np.arange(psi.size), idx, known)
    return _phase_to_velocity(phase, nu, grid), True


def density_readout(rho_dm: CArray, nu: float, grid: Grid1D) -> VelocityField:
    """Phase-gradient readout from a density matrix via its first off-diagonal."""
    steps = np.angle(np.diagonal(rho_dm, offset=-1))
    phase = np.concatenate([[0.0], np.cumsum(steps)])
    return _phase_to_velocity(phase, nu, grid)


# --------------------------------------------------------------------------
# Hamiltonians


def quantum_potential(
    rho: NDArray[np.float64], nu: float, grid: Grid1D, scale: float = 1.0
) -> NDArray[np.float64]:
    """``Q = -scale * (nu**2 / 2) * (D2 sqrt(rho)) / sqrt(rho)``.

    ``scale`` selects between constant conventions; 1 is the default.
    """
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho <= 0):
        raise ValueError("quantum potential needs a strictly positive density")
    amp = np.sqrt(rho)
    return -scale * 0.5 * nu**2 * FdOperators(grid).diffusion(amp) / amp


def _tridiagonal_laplacian(grid: Grid1D) -> NDArray[np.float64]:
    n = grid.n_points
    lap = (np.diag(np.full(n - 1, 1.0), 1) + np.diag(np.full(n - 1, 1.0), -1) - 2 * np.eye(n))
    if grid.periodic and n > 2:
        lap[0, -1] = lap[-1, 0] = 1.0
    return lap / grid.spacing**2


def build_hamiltonian_fd(
    grid: Grid1D, nu: float, rho: NDArray[np.float64], potential_scale: float = 1.0
) -> NDArray[np.float64]:
    """Tridiagonal ``-(nu/2) D2`` plus the diagonal ``Q / nu``."""
    h = -0.5 * nu * _tridiagonal_laplacian(grid)
    h += np.diag(quantum_potential(rho, nu, grid, potential_scale) / nu)
    return 0.5 * (h + h.T)


def spectral_wavenumbers(grid: Grid1D) -> NDArray[np.float64]:
    return 2 * np.pi * np.fft.fftfreq(grid.n_points, d=grid.spacing)


def build_hamiltonian_spectral(
    grid: Grid1D, nu: float, rho: NDArray[np.float64], potential_scale: float = 1.0
) -> CArray:
    """Dense Fourier kinetic term ``F^dag diag(nu k^2 / 2) F`` plus ``Q / nu``."""
    n = grid.n_points
    k = spectral_wavenumbers(grid)
    eye = np.eye(n, dtype=complex)
    cols = [fft(0.5 * nu * k**2 * fft(e), inverse=True) for e in eye]
    h = np.column_stack(cols)
    h += np.diag(quantum_potential(rho, nu, grid, potential_scale) / nu)
    return 0.5 * (h + h.conj().T)


# --------------------------------------------------------------------------
# Pauli strings


def _masks(string: str) -> tuple[int, int]:
    n = len(string)
    x = z = 0
    for j, ch in enumerate(string):
        bit = 1 << (n - 1 - j)
        if ch in "XY":
            x |= bit
        if ch in "ZY":
            z |= bit
        if ch not in "IXYZ":
            raise ValueError(f"bad Pauli character {ch!r} in {string!r}")
    return x, z


def _string(x: int, z: int, n: int) -> str:
    chars = []
    for j in range(n):
        bit = 1 << (n - 1 - j)
        chars.append("IZXY"[(1 if z & bit else 0) + (2 if x & bit else 0)])
    return "".join(chars)


def pauli_matrix(string: str) -> CArray:
    out = np.ones((1, 1), dtype=complex)
    for ch in string:
        out = np.kron(out, _PAULI[ch])
    return out


def apply_pauli(string_or_masks: str | tuple[int, int], psi: CArray) -> CArray:
    """``P @ psi`` by bit manipulation: ``(P psi)[c ^ x] = i^|Y| (-1)^{c.z} psi[c]``."""
    if isinstance(string_or_masks, str):
        x, z = _masks(string_or_masks)
    else:
        x, z = string_or_masks
    idx = np.arange(psi.shape[0])
    phase = (1j) ** int(np.bitwise_count(x & z)) * (-1.0) ** np.bitwise_count(idx & z)
    out = np.empty_like(psi, dtype=complex)
    out[idx ^ x] = (phase * psi.T).T
    return out


@dataclass(frozen=True)
class PauliTermSum:
    """Real-weighted Pauli strings ordered by descending ``|c|``."""

    n_qubits: int
    terms: tuple[tuple[float, str], ...]

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def coefficients(self) -> NDArray[np.float64]:
        return np.array([c for c, _ in self.terms])

    @cached_property
    def _compiled(self) -> tuple[NDArray[np.intp], CArray]:
        n = 1 << self.n_qubits
        idx = np.arange(n)
        perms = np.empty((len(self.terms), n), dtype=np.intp)
        phases = np.empty((len(self.terms), n), dtype=complex)
        for t, (_, s) in enumerate(self.terms):
            x, z = _masks(s)
            # gather form: (P psi)[r] = phase[r] * psi[r ^ x]
            src = idx ^ x
            perms[t] = src
            phases[t] = (1j) ** int(np.bitwise_count(x & z)) * (-1.0) ** np.bitwise_count(src & z)
        return perms, phases

    def to_matrix(self) -> CArray:
        n = 1 << self.n_qubits
        out = np.zeros((n, n), dtype=complex)
        for c, s in self.terms:
            out += c * pauli_matrix(s)
        return out


def pauli_decompose(h: NDArray, prune: float = 1e-12) -> PauliTermSum:
    """Coefficients ``Tr(P h) / 2^n`` over all ``4^n`` strings.

    For each X-mask the diagonal band ``h[r, r ^ x]`` is Walsh-Hadamard
    transformed, which yields every Z-mask at once. Terms with
    ``|c| <= prune * max|c|`` are dropped.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or not is_power_of_two(h.shape[0]):
        raise ValueError(f"expected a 2^n x 2^n matrix, got shape {h.shape}")
    dim = h.shape[0]
    n = dim.bit_length() - 1
    if n > PAULI_QUBIT_LIMIT:
        raise ValueError(f"Pauli decomposition limited to {PAULI_QUBIT_LIMIT} qubits, got {n}")
    if np.linalg.norm(h - h.conj().T) > 1e-10 * max(1.0, float(np.linalg.norm(h))):
        raise ValueError("Pauli decomposition needs a Hermitian matrix")
    r = np.arange(dim)
    bands = h[r[:, None], r[:, None] ^ r[None, :]]  # bands[r, x] = h[r, r ^ x]
    walsh = hadamard(dim) @ bands / dim  # walsh[z, x]
    zz, xx = np.meshgrid(r, r, indexing="ij")
    coeffs = walsh * (1j) ** np.bitwise_count(xx & zz)
    if np.max(np.abs(coeffs.imag), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(coeffs))):
        raise ValueError("Pauli coefficients are not real; input is not Hermitian")
    coeffs = coeffs.real
    cmax = np.max(np.abs(coeffs))
    keep = np.argwhere(np.abs(coeffs) > prune * cmax) if cmax > 0 else np.empty((0, 2), int)
    terms = [(float(coeffs[z, x]), _string(int(x), int(z), n)) for z, x in keep]
    terms.sort(key=lambda t: (-abs(t[0]), t[1]))
    return PauliTermSum(n, tuple(terms))


# --------------------------------------------------------------------------
# time evolution


def pauli_rotations(psi: CArray, terms: PauliTermSum, angles: NDArray[np.float64]) -> CArray:
    """Apply ``prod_j exp(-i angles[j] P_j)`` in term order (first term acts first)."""
    perms, phases = terms._compiled
    out = np.asarray(psi, dtype=complex)
    for perm, phase, theta in zip(perms, phases, angles):
        out = math.cos(theta) * out - 1j * math.sin(theta) * (phase * out[perm])
    return out


def trotter_step(psi: CArray, terms: PauliTermSum, dt: float) -> CArray:
    """First-order Trotter product over the terms in their fixed order."""
    return pauli_rotations(psi, terms, terms.coefficients * dt)


def trotter_unitary(terms: PauliTermSum, dt: float) -> CArray:
    eye = np.eye(1 << terms.n_qubits, dtype=complex)
    return np.column_stack([trotter_step(e, terms, dt) for e in eye])


def exact_step(psi: CArray, h: NDArray, dt: float) -> CArray:
    n = np.asarray(h).shape[0].bit_length() - 1
    if n > EXACT_QUBIT_LIMIT:
        raise ValueError(f"exact evolution limited to {EXACT_QUBIT_LIMIT} qubits, got {n}")
    return expm_hermitian(h, dt) @ psi


@dataclass
class VariationalFit:
    theta: NDArray[np.float64]
    losses: list[float]
    stagnated: bool


def variational_trotter_fit(
    psi0: CArray,
    h: NDArray,
    dt: float,
    layers: int = 1,
    iters: int = 200,
    lr: float = 0.05,
    *,
    seed: int = 0,
    perturbation: float = 1e-3,
    fd_step: float = 1e-5,
    terms: PauliTermSum | None = None,
) -> VariationalFit:
    """Fit per-layer Pauli rotation angles to ``exp(-i h dt) psi0`` with Adam.

    Angles start at ``c_j dt / layers`` plus a uniform perturbation in
    ``[-perturbation, perturbation]``; gradients are central differences.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    n = psi0.size.bit_length() - 1
    if n > VARIATIONAL_QUBIT_LIMIT:
        raise ValueError(f"variational fit limited to {VARIATIONAL_QUBIT_LIMIT} qubits, got {n}")
    if layers < 1:
        raise ValueError(f"layers must be >= 1, got {layers}")
    terms = terms or pauli_decompose(h)
    target = exact_step(psi0, h, dt)
    rng = np.random.default_rng(seed)
    base = np.tile(terms.coefficients * dt / layers, (layers, 1))
    theta = base + rng.uniform(-perturbation, perturbation, size=base.shape)

    def loss(params: NDArray[np.float64]) -> float:
        psi = psi0
        for row in params:
            psi = pauli_rotations(psi, terms, row)
        return float(np.sum(np.abs(psi - target) ** 2))

    losses = [loss(theta)]
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    for step in range(1, iters + 1):
        grad = np.zeros_like(theta)
        for idx in np.ndindex(theta.shape):
            shift = np.zeros_like(theta)
            shift[idx] = fd_step
            grad[idx] = (loss(theta + shift) - loss(theta - shift)) / (2 * fd_step)
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad**2
        m_hat = m / (1 - beta1**step)
        v_hat = v / (1 - beta2**step)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
        losses.append(loss(theta))
    stagnated = iters > 0 and not losses[-1] < losses[0]
    return VariationalFit(theta, losses, stagnated)


def variational_step(psi: CArray, terms: PauliTermSum, theta: NDArray[np.float64]) -> CArray:
    for row in theta:
        psi = pauli_rotations(psi, terms, row)
    return psi


# --------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseConfig:
    p_depol: float = 0.001
    gamma_ad: float = 0.001

    def __post_init__(self) -> None:
        for name in ("p_depol", "gamma_ad"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def _apply_channel(rho: CArray, kraus: list[CArray], qubit: int, n: int) -> CArray:
    dim = 1 << n
    t = rho.reshape((2,) * (2 * n))
    out = np.zeros_like(t)
    row_ax, col_ax = qubit, n + qubit
    for k in kraus:
        a = np.moveaxis(np.tensordot(k, t, axes=(1, row_ax)), 0, row_ax)
        a = np.moveaxis(np.tensordot(a, k.conj(), axes=(col_ax, 1)), -1, col_ax)
        out += a
    return out.reshape(dim, dim)


def depolarizing_kraus(p: float) -> list[CArray]:
    return [
        math.sqrt(1 - 3 * p / 4) * _PAULI["I"],
        math.sqrt(p / 4) * _PAULI["X"],
        math.sqrt(p / 4) * _PAULI["Y"],
        math.sqrt(p / 4) * _PAULI["Z"],
    ]


def amplitude_damping_kraus(gamma: float) -> list[CArray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def apply_noise(rho: CArray, noise: NoiseConfig) -> CArray:
    n = rho.shape[0].bit_length() - 1
    for q in range(n):
        if noise.p_depol > 0:
            rho = _apply_channel(rho, depolarizing_kraus(noise.p_depol), q, n)
        if noise.gamma_ad > 0:
            rho = _apply_channel(rho, amplitude_damping_kraus(noise.gamma_ad), q, n)
    return rho


def noisy_evolution(
    rho: CArray, terms: PauliTermSum, dt: float, steps: int, noise: NoiseConfig
) -> CArray:
    """Trotter-step conjugation followed by per-qubit depolarizing and damping Kraus maps."""
    n = rho.shape[0].bit_length() - 1
    if n > DENSITY_QUBIT_LIMIT:
        raise ValueError(f"density-matrix evolution limited to {DENSITY_QUBIT_LIMIT} qubits")
    u = trotter_unitary(terms, dt)
    for _ in range(steps):
        rho = u @ rho @ u.conj().T
        rho = apply_noise(rho, noise)
    return rho


# --------------------------------------------------------------------------
# depth accounting


def circuit_depth_estimate(
    terms: PauliTermSum, steps: int, mode: Literal["trotter", "variational"] = "trotter", layers: int = 1
) -> tuple[int, int]:
    """``(per_step, total)`` Pauli-rotation counts; one rotation counts as one gate."""
    if mode == "trotter":
        per_step = len(terms)
    elif mode == "variational":
        per_step = layers * len(terms)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return per_step, per_step * steps


# --------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class HseStep:
    time: float
    n_terms: int
    depth: int
    readout_cost: int
    l2_vs_exact: float | None


@dataclass
class HseResult:
    field: VelocityField
    diverged: bool
    depth_per_step: int
    readout_cost: int
    telemetry: list[HseStep] = field(default_factory=list)
    message: str = ""


def _hamiltonian(method: str, grid: Grid1D, nu: float, rho, potential_scale: float):
    if method == "fd":
        return build_hamiltonian_fd(grid, nu, rho, potential_scale)
    if method == "spectral":
        return build_hamiltonian_spectral(grid, nu, rho, potential_scale)
    raise ValueError(f"unknown HSE method {method!r}")


def hse_run(
    config: SimConfig,
    n: int,
    method: Literal["fd", "spectral"] = "fd",
    dt: float = 0.005,
    evolution: Literal["trotter", "variational", "exact"] = "trotter",
    *,
    noise: NoiseConfig | None = None,
    layers: int = 2,
    iters: int = 50,
    seed: int = 0,
    potential_scale: float = 1.0,
    shadow_exact: bool = False,
) -> HseResult:
    """Encode, then per step: rebuild H from ``|psi|^2``, decompose, evolve, read out.

    ``dt`` is shrunk to ``T / ceil(T / dt)`` so an integer number of steps
    lands on T. With ``shadow_exact`` an exactly-evolved companion runs in
    lockstep and each step logs the readout distance to it. A readout
    exceeding ``10 * max|u0|`` (or going non-finite) stops the run and marks
    it diverged.
    """
    if not is_power_of_two(n):
        raise ValueError(f"HSE needs a power-of-two grid, got N={n}")
    grid = problem_grid(config, n)
    if grid.n_qubits > PAULI_QUBIT_LIMIT:
        raise ValueError(f"HSE limited to {PAULI_QUBIT_LIMIT} qubits, got N={n}")
    if noise is not None and grid.n_qubits > DENSITY_QUBIT_LIMIT:
        raise ValueError(f"noisy HSE limited to {DENSITY_QUBIT_LIMIT} qubits")
    nu = config.viscosity
    u0 = initial_condition(config.ic_kind, grid, config)
    umax0 = max(float(np.max(np.abs(u0.values))), 1e-300)
    psi = madelung_encode(u0, nu)
    shadow = psi.copy() if shadow_exact else None
    rho_dm = np.outer(psi, psi.conj()) if noise is not None else None

    T = config.total_time
    steps = math.ceil(T / dt - 1e-9) if T > 0 else 0
    step_dt = T / steps if steps else 0.0

    result = HseResult(u0, False, 0, 0)
    cost = 0
    current = u0
    for s in range(steps):
        try:
            density = np.real(np.diagonal(rho_dm)) if rho_dm is not None else np.abs(psi) ** 2
            h = _hamiltonian(method, grid, nu, density, potential_scale)
            terms = pauli_decompose(h)
            if evolution == "trotter":
                per_step, _ = circuit_depth_estimate(terms, 1)
                if rho_dm is not None:
                    rho_dm = noisy_evolution(rho_dm, terms, step_dt, 1, noise)
                else:
                    psi = trotter_step(psi, terms, step_dt)
            elif evolution == "variational":
                per_step, _ = circuit_depth_estimate(terms, 1, "variational", layers)
                fit = variational_trotter_fit(
                    psi, h, step_dt, layers, iters, seed=seed + s, terms=terms
                )
                psi = variational_step(psi, terms, fit.theta)
            elif evolution == "exact":
                per_step = len(terms)
                psi = exact_step(psi, h, step_dt)
            else:
                raise ValueError(f"unknown evolution {evolution!r}")
            if rho_dm is not None:
                current = density_readout(rho_dm, nu, grid)
            else:
                current, _ = phase_gradient_readout(psi, nu, grid)
            l2 = None
            if shadow is not None:
                sh = _hamiltonian(method, grid, nu, np.abs(shadow) ** 2, potential_scale)
                shadow = exact_step(shadow, sh, step_dt)
                ref, _ = phase_gradient_readout(shadow, nu, grid)
                l2 = relative_l2_error(current, ref)[0]
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            result.diverged = True
            result.message = f"step {s}: {exc}"
            break
        cost += n
        if s == 0:
            result.depth_per_step = per_step
        result.telemetry.append(HseStep((s + 1) * step_dt, len(terms), per_step, cost, l2))
        if np.max(np.abs(current.values)) > DIVERGENCE_FACTOR * umax0:
            result.diverged = True
            result.message = f"step {s}: readout exceeded {DIVERGENCE_FACTOR} x max|u0|"
            break
    result.field = current
    result.readout_cost = cost
    return result
