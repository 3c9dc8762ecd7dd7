"""Dense linear-algebra and transform kernels used by every solver."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .core import is_power_of_two

Array = NDArray[np.floating] | NDArray[np.complexfloating]


@dataclass(frozen=True)
class SvdResult:
    u: Array
    singular_values: NDArray[np.float64]
    vh: Array
    discarded_weight: float

    @property
    def rank(self) -> int:
        return self.singular_values.size


def truncated_svd(a: Array, chi_max: int, eps_cutoff: float = 0.0) -> SvdResult:
    """Keep the leading singular triplets of ``a``.

    Retains ``min(chi_max, #{s_i > eps_cutoff * s_0})`` triplets and never
    fewer than one. ``discarded_weight`` is the sum of the squared dropped
    singular values, i.e. the squared Frobenius norm of the residual.
    """
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("truncated_svd: input contains non-finite entries")
    if chi_max < 1:
        raise ValueError(f"chi_max must be >= 1, got {chi_max}")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    keep = s.size
    if s.size and s[0] > 0:
        keep = int(np.count_nonzero(s > eps_cutoff * s[0]))
    else:
        keep = 1
    keep = max(1, min(keep, chi_max, s.size))
    discarded = float(np.sum(s[keep:] ** 2))
    return SvdResult(u[:, :keep], s[:keep], vh[:keep, :], discarded)


@dataclass
class GmresResult:
    x: Array
    residual_norm: float
    iterations: int
    converged: bool
    breakdown: bool = False
    history: list[float] = field(default_factory=list)


def _givens(a: complex, b: complex) -> tuple[float, complex, complex]:
    """Rotation (c, s) with ``[c, s; -conj(s), c] @ [a, b] = [r, 0]``."""
    if b == 0:
        return 1.0, 0.0, a
    if a == 0:
        return 0.0, 1.0, b
    d = np.hypot(abs(a), abs(b))
    c = abs(a) / d
    phase = a / abs(a)
    s = phase * np.conj(b) / d
    return c, s, phase * d


def gmres_solve(
    apply: Callable[[Array], Array],
    b: Array,
    tol: float = 1e-10,
    restart: int | None = None,
    max_iter: int = 500,
    x0: Array | None = None,
) -> GmresResult:
    """Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations.

    Stops once ``||apply(x) - b|| / ||b|| <= tol`` or after ``max_iter``
    inner iterations. ``history`` holds the relative residual estimate after
    each inner iteration and never increases within a restart cycle.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    b = np.asarray(b)
    n = b.size
    dtype = np.result_type(b.dtype, np.float64)
    m = min(30, n) if restart is None else max(1, min(restart, n))
    x = np.zeros(n, dtype=dtype) if x0 is None else np.array(x0, dtype=dtype)

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0:
        return GmresResult(np.zeros(n, dtype=dtype), 0.0, 0, True)

    history: list[float] = []
    total = 0
    breakdown = False
    r = b - apply(x)
    beta = float(np.linalg.norm(r))
    while beta / bnorm > tol and total < max_iter and not breakdown:
        basis = np.zeros((m + 1, n), dtype=dtype)
        hess = np.zeros((m + 1, m), dtype=dtype)
        cs = np.zeros(m)
        sn = np.zeros(m, dtype=dtype)
        g = np.zeros(m + 1, dtype=dtype)
        g[0] = beta
        basis[0] = r / beta
        k = 0
        for j in range(m):
            w = np.asarray(apply(basis[j]), dtype=dtype)
            for i in range(j + 1):
                hess[i, j] = np.vdot(basis[i], w)
                w = w - hess[i, j] * basis[i]
            hnext = float(np.linalg.norm(w))
            hess[j + 1, j] = hnext
            for i in range(j):
                h0, h1 = hess[i, j], hess[i + 1, j]
                hess[i, j] = cs[i] * h0 + sn[i] * h1
                hess[i + 1, j] = -np.conj(sn[i]) * h0 + cs[i] * h1
            cs[j], sn[j], hess[j, j] = _givens(hess[j, j], hess[j + 1, j])
            hess[j + 1, j] = 0.0
            g[j + 1] = -np.conj(sn[j]) * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            k = j + 1
            history.append(abs(g[j + 1]) / bnorm)
            if hnext <= 1e-14 * max(1.0, abs(hess[j, j])):
                breakdown = True
                break
            if history[-1] <= tol or total >= max_iter:
                break
            basis[j + 1] = w / hnext
        y = np.zeros(k, dtype=dtype)
        for i in range(k - 1, -1, -1):
            y[i] = (g[i] - hess[i, i + 1 : k] @ y[i + 1 : k]) / hess[i, i]
        x = x + basis[:k].T @ y
        r = b - apply(x)
        beta = float(np.linalg.norm(r))
    rel = beta / bnorm
    return GmresResult(x, rel, total, rel <= tol, breakdown and rel > tol, history)


def fft(v: Array, inverse: bool = False) -> NDArray[np.complex128]:
    """Unitary DFT (``1/sqrt(N)`` both ways) for power-of-two lengths."""
    v = np.asarray(v, dtype=np.complex128)
    if not is_power_of_two(v.size):
        raise ValueError(f"fft length must be a power of two, got {v.size}")
    if inverse:
        return np.fft.ifft(v, norm="ortho")
    return np.fft.fft(v, norm="ortho")


def _check_hermitian(h: Array) -> None:
    scale = max(float(np.linalg.norm(h)), 1.0)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if np.linalg.norm(h - h.conj().T) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")


def hermitian_eigh(h: Array) -> tuple[NDArray[np.float64], Array]:
    h = np.asarray(h)
    _check_hermitian(h)
    return np.linalg.eigh(h)


def expm_hermitian(h: Array, t: float) -> NDArray[np.complex128]:
    """``exp(-i H t)`` through the eigendecomposition of ``H``."""
    evals, evecs = hermitian_eigh(h)
    phases = np.exp(-1j * evals * t)
    return (evecs * phases) @ evecs.conj().T


def kron(a: Array, b: Array) -> Array:
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))
