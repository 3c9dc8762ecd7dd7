"""Quick oracle-equivalence checks that a build is numerically sound."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .classical import FdOperators, run_explicit
from .core import SimConfig, make_grid, relative_l2_error
from .hse import (
    build_hamiltonian_fd,
    build_hamiltonian_spectral,
    exact_step,
    pauli_decompose,
    trotter_step,
)
from .kernels import fft, gmres_solve
from .mps import (
    TruncationPolicy,
    mpo_apply,
    mpo_from_matrix,
    mps_add,
    mps_from_vector,
    mps_hadamard,
    mps_to_vector,
)
from .qtn import qtn_run


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _check_mps_roundtrip(rng: np.random.Generator) -> str:
    worst = 0.0
    for n in (8, 32, 128):
        v = rng.standard_normal(n)
        worst = max(worst, _rel(mps_to_vector(mps_from_vector(v, TruncationPolicy.exact())), v))
    assert worst <= 1e-10, worst
    return f"max rel err {worst:.1e}"


def _check_mps_algebra(rng: np.random.Generator) -> str:
    exact = TruncationPolicy.exact()
    a, b = rng.standard_normal(32), rng.standard_normal(32)
    op = FdOperators(make_grid(32)).diffusion_matrix()
    ma, mb = mps_from_vector(a, exact), mps_from_vector(b, exact)
    errs = [
        _rel(mps_to_vector(mps_hadamard(ma, mb)), a * b),
        _rel(mps_to_vector(mps_add(ma, mb, 2.0, -0.5)), 2 * a - 0.5 * b),
        _rel(mps_to_vector(mpo_apply(mpo_from_matrix(op), ma)), op @ a),
    ]
    assert max(errs) <= 1e-10, errs
    return f"max rel err {max(errs):.1e}"


def _check_gmres(rng: np.random.Generator) -> str:
    n = 64
    a = rng.standard_normal((n, n)) + 2 * n * np.eye(n)
    b = rng.standard_normal(n)
    res = gmres_solve(lambda x: a @ x, b, tol=1e-12)
    err = _rel(res.x, np.linalg.solve(a, b))
    assert res.converged and err <= 1e-8, err
    return f"{res.iterations} iterations, rel err {err:.1e}"


def _check_fft(rng: np.random.Generator) -> str:
    n = 16
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    k = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
    err = _rel(fft(v), dft @ v)
    assert err <= 1e-12, err
    return f"rel err vs DFT {err:.1e}"


def _check_qtn_dense() -> str:
    config = SimConfig(total_time=0.02)
    dense = run_explicit(config, 16)
    mps_field, _ = qtn_run(config, 16, TruncationPolicy.exact())
    err = relative_l2_error(mps_field, dense)[0]
    assert err <= 1e-8, err
    return f"rel err vs dense RK4 {err:.1e}"


def _check_pauli() -> str:
    grid = make_grid(16)
    rho = np.full(16, 1 / 16)
    worst = 0.0
    for h in (build_hamiltonian_fd(grid, 0.01, rho), build_hamiltonian_spectral(grid, 0.01, rho)):
        worst = max(worst, float(np.linalg.norm(pauli_decompose(h).to_matrix() - h)))
    assert worst <= 1e-10, worst
    return f"reconstruction err {worst:.1e}"


def _check_unitarity() -> str:
    grid = make_grid(8)
    h = build_hamiltonian_fd(grid, 0.01, np.full(8, 1 / 8))
    terms = pauli_decompose(h)
    psi = np.full(8, 1 / np.sqrt(8), dtype=complex)
    phi = psi.copy()
    for _ in range(50):
        psi = trotter_step(psi, terms, 0.01)
        phi = exact_step(phi, h, 0.01)
    drift = max(abs(np.linalg.norm(psi) - 1), abs(np.linalg.norm(phi) - 1))
    assert drift <= 1e-10, drift
    return f"norm drift {drift:.1e}"


def run_selftest(seed: int = 1234) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    checks: list[tuple[str, Callable[[], str]]] = [
        ("mps roundtrip", lambda: _check_mps_roundtrip(rng)),
        ("mps algebra vs dense", lambda: _check_mps_algebra(rng)),
        ("gmres vs direct solve", lambda: _check_gmres(rng)),
        ("fft vs naive DFT", lambda: _check_fft(rng)),
        ("qtn vs dense RK4", _check_qtn_dense),
        ("pauli reconstruction", _check_pauli),
        ("norm preservation", _check_unitarity),
    ]
    results = []
    for name, fn in checks:
        try:
            results.append(CheckResult(name, True, fn()))
        except AssertionError as exc:
            results.append(CheckResult(name, False, f"tolerance exceeded: {exc}"))
    return results
