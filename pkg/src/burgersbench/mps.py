"""Matrix product states and operators over binary (qubit) sites.

Site 0 carries the most significant bit of the grid index, so a length
``2**L`` vector ``v`` maps to tensors ``A[k]`` of shape ``(chi_left, 2, chi_right)``
with ``v[i_0 i_1 ... i_{L-1}] = scale * A[0][:, i_0, :] @ ... @ A[L-1][:, i_{L-1}, :]``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .core import is_power_of_two
from .kernels import truncated_svd

DENSE_SITE_LIMIT = 20
MPO_SITE_LIMIT = 10
Tensor = NDArray[np.floating] | NDArray[np.complexfloating]


@dataclass(frozen=True)
class TruncationPolicy:
    chi_max: int = 16
    eps_cutoff: float = 1e-10

    def __post_init__(self) -> None:
        if self.chi_max < 1:
            raise ValueError(f"chi_max must be >= 1, got {self.chi_max}")
        if not 0 <= self.eps_cutoff < 1:
            raise ValueError(f"eps_cutoff must lie in [0, 1), got {self.eps_cutoff}")

    @classmethod
    def exact(cls) -> TruncationPolicy:
        return cls(chi_max=1 << 30, eps_cutoff=0.0)


@dataclass(frozen=True)
class MPS:
    """Tensor train with an explicit scalar prefactor.

    ``discarded_weight`` is the squared norm dropped by the operation that
    produced this state, in the same units as the encoded vector.
    """

    tensors: tuple[Tensor, ...]
    scale: float = 1.0
    discarded_weight: float = field(default=0.0, compare=False)

    def __post_init__(self) -> None:
        tensors = tuple(np.asarray(t) for t in self.tensors)
        if not tensors:
            raise ValueError("MPS needs at least one site")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        for left, right in zip(tensors[:-1], tensors[1:]):
            if left.shape[2] != right.shape[0]:
                raise ValueError(f"bond mismatch {left.shape} | {right.shape}")
        object.__setattr__(self, "tensors", tensors)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    @property
    def dtype(self) -> np.dtype:
        return np.result_type(*self.tensors)

    def scaled(self, factor: float) -> MPS:
        """Multiply the encoded vector by a scalar (absorbed into site 0 when negative/complex)."""
        if np.isrealobj(factor) and factor >= 0:
            return MPS(self.tensors, self.scale * float(factor))
        first = self.tensors[0] * factor
        return MPS((first, *self.tensors[1:]), self.scale)


@dataclass(frozen=True)
class MPO:
    """Operator tensor train with cores of shape ``(w_left, 2_out, 2_in, w_right)``."""

    tensors: tuple[Tensor, ...]

    def __post_init__(self) -> None:
        tensors = tuple(np.asarray(t) for t in self.tensors)
        if tensors[0].shape[0] != 1 or tensors[-1].shape[3] != 1:
            raise ValueError("boundary operator bonds must be 1")
        for left, right in zip(tensors[:-1], tensors[1:]):
            if left.shape[3] != right.shape[0]:
                raise ValueError(f"operator bond mismatch {left.shape} | {right.shape}")
        object.__setattr__(self, "tensors", tensors)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)


def _n_sites_for(length: int) -> int:
    if length < 2 or not is_power_of_two(length):
        raise ValueError(f"length must be a power of two >= 2, got {length}")
    return length.bit_length() - 1


def mps_from_vector(v: Tensor, policy: TruncationPolicy | None = None) -> MPS:
    """Left-to-right sequential SVD of a length ``2**L`` vector."""
    policy = policy or TruncationPolicy.exact()
    v = np.asarray(v)
    n_sites = _n_sites_for(v.size)
    rest = v.reshape(1, -1)
    rank = 1
    tensors = []
    dropped = 0.0
    for _ in range(n_sites - 1):
        svd = truncated_svd(rest.reshape(rank * 2, -1), policy.chi_max, policy.eps_cutoff)
        chi = svd.rank
        tensors.append(svd.u.reshape(rank, 2, chi))
        rest = svd.singular_values[:, None] * svd.vh
        dropped += svd.discarded_weight
        rank = chi
    last = rest.reshape(rank, 2, 1)
    scale = float(np.linalg.norm(last))
    if scale > 0:
        last = last / scale
    tensors.append(last)
    return MPS(tuple(tensors), scale, dropped)


def mps_to_vector(mps: MPS) -> Tensor:
    if mps.n_sites > DENSE_SITE_LIMIT:
        raise ValueError(f"refusing to materialise {mps.n_sites} sites (limit {DENSE_SITE_LIMIT})")
    psi = mps.tensors[0].reshape(2, -1)
    for t in mps.tensors[1:]:
        chi_l, _, chi_r = t.shape
        psi = (psi @ t.reshape(chi_l, 2 * chi_r)).reshape(-1, chi_r)
    return mps.scale * psi.reshape(-1)


def mps_amplitude(mps: MPS, index: int) -> complex | float:
    """Single vector entry without materialising the whole vector."""
    n = mps.n_sites
    env = np.ones((1,), dtype=mps.dtype)
    for k, t in enumerate(mps.tensors):
        bit = (index >> (n - 1 - k)) & 1
        env = env @ t[:, bit, :]
    return mps.scale * env[0]


def product_mps(local: list[Tensor], scale: float = 1.0) -> MPS:
    """Bond-1 state from per-site length-2 vectors."""
    return MPS(tuple(np.asarray(v).reshape(1, 2, 1) for v in local), scale)


def basis_mps(index: int, n_sites: int, dtype=np.float64) -> MPS:
    local = []
    for k in range(n_sites):
        bit = (index >> (n_sites - 1 - k)) & 1
        e = np.zeros(2, dtype=dtype)
        e[bit] = 1.0
        local.append(e)
    return product_mps(local)


def _left_orthogonalize(tensors: list[Tensor]) -> list[Tensor]:
    """QR sweep leaving sites 0..L-2 left-orthonormal; the last site holds the norm."""
    out = list(tensors)
    for k in range(len(out) - 1):
        chi_l, d, chi_r = out[k].shape
        q, r = np.linalg.qr(out[k].reshape(chi_l * d, chi_r))
        out[k] = q.reshape(chi_l, d, q.shape[1])
        out[k + 1] = np.tensordot(r, out[k + 1], axes=(1, 0))
    return out


def _right_sweep(
    tensors: list[Tensor], policy: TruncationPolicy
) -> tuple[list[Tensor], float, float, list[NDArray[np.float64]]]:
    """Right-to-left SVD sweep on a left-orthonormal train.

    Returns right-orthonormal tensors, the leftover norm, the total discarded
    weight (relative to the unscaled train) and the kept singular values at
    each cut, ordered left to right.
    """
    out = list(tensors)
    dropped = 0.0
    spectra: list[NDArray[np.float64]] = []
    for k in range(len(out) - 1, 0, -1):
        chi_l, d, chi_r = out[k].shape
        svd = truncated_svd(out[k].reshape(chi_l, d * chi_r), policy.chi_max, policy.eps_cutoff)
        out[k] = svd.vh.reshape(svd.rank, d, chi_r)
        out[k - 1] = np.tensordot(out[k - 1], svd.u * svd.singular_values, axes=(2, 0))
        dropped += svd.discarded_weight
        spectra.append(svd.singular_values)
    norm = float(np.linalg.norm(out[0]))
    if norm > 0:
        out[0] = out[0] / norm
    spectra.reverse()
    return out, norm, dropped, spectra


def mps_truncate(mps: MPS, policy: TruncationPolicy) -> MPS:
    """Canonicalise left-to-right, then truncate right-to-left.

    ``discarded_weight`` on the result is the sum of dropped squared singular
    values over all cuts, scaled to the encoded vector.
    """
    if mps.n_sites == 1:
        t = mps.tensors[0]
        norm = float(np.linalg.norm(t))
        return MPS((t / norm if norm > 0 else t,), mps.scale * norm)
    tensors = _left_orthogonalize(list(mps.tensors))
    tensors, norm, dropped, _ = _right_sweep(tensors, policy)
    return MPS(tuple(tensors), mps.scale * norm, dropped * mps.scale**2)


def _maybe_truncate(mps: MPS, policy: TruncationPolicy | None) -> MPS:
    return mps if policy is None else mps_truncate(mps, policy)


def mps_hadamard(a: MPS, b: MPS, policy: TruncationPolicy | None = None) -> MPS:
    """Element-wise product via per-site Kronecker products of the bond matrices.

    With ``policy=None`` the raw product (bond ``chi_a * chi_b``) is returned.
    """
    if a.n_sites != b.n_sites:
        raise ValueError(f"site count mismatch: {a.n_sites} vs {b.n_sites}")
    tensors = []
    for ta, tb in zip(a.tensors, b.tensors):
        la, _, ra = ta.shape
        lb, _, rb = tb.shape
        t = np.einsum("aib,cid->acibd", ta, tb).reshape(la * lb, 2, ra * rb)
        tensors.append(t)
    return _maybe_truncate(MPS(tuple(tensors), a.scale * b.scale), policy)


def mps_add(
    a: MPS, b: MPS, ca: float = 1.0, cb: float = 1.0, policy: TruncationPolicy | None = None
) -> MPS:
    """``ca * a + cb * b`` by direct-sum of the site tensors."""
    if a.n_sites != b.n_sites:
        raise ValueError(f"site count mismatch: {a.n_sites} vs {b.n_sites}")
    wa = ca * a.scale
    wb = cb * b.scale
    dtype = np.result_type(a.dtype, b.dtype, np.asarray(wa).dtype, np.asarray(wb).dtype)
    n = a.n_sites
    if n == 1:
        return _maybe_truncate(MPS((wa * a.tensors[0] + wb * b.tensors[0],)), policy)
    tensors = []
    for k, (ta, tb) in enumerate(zip(a.tensors, b.tensors)):
        la, _, ra = ta.shape
        lb, _, rb = tb.shape
        if k == 0:
            t = np.concatenate([wa * ta, wb * tb], axis=2).astype(dtype, copy=False)
        elif k == n - 1:
            t = np.concatenate([ta, tb], axis=0).astype(dtype, copy=False)
        else:
            t = np.zeros((la + lb, 2, ra + rb), dtype=dtype)
            t[:la, :, :ra] = ta
            t[la:, :, ra:] = tb
        tensors.append(t)
    return _maybe_truncate(MPS(tuple(tensors)), policy)


def mpo_from_matrix(op: Tensor, tol: float = 1e-12) -> MPO:
    """TT-SVD of a ``2**L x 2**L`` matrix, grouping (row bit, column bit) per site.

    Singular values below ``tol`` relative to the largest at each cut are dropped.
    """
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {op.shape}")
    n_sites = _n_sites_for(op.shape[0])
    if n_sites > MPO_SITE_LIMIT:
        raise ValueError(f"refusing dense MPO ingestion for {n_sites} sites (limit {MPO_SITE_LIMIT})")
    t = op.reshape([2] * (2 * n_sites))
    order = [ax for k in range(n_sites) for ax in (k, n_sites + k)]
    rest = t.transpose(order).reshape(1, -1)
    rank = 1
    cores = []
    for _ in range(n_sites - 1):
        svd = truncated_svd(rest.reshape(rank * 4, -1), chi_max=1 << 30, eps_cutoff=tol)
        cores.append(svd.u.reshape(rank, 2, 2, svd.rank))
        rest = svd.singular_values[:, None] * svd.vh
        rank = svd.rank
    cores.append(rest.reshape(rank, 2, 2, 1))
    return MPO(tuple(cores))


def mpo_to_matrix(mpo: MPO) -> Tensor:
    if mpo.n_sites > MPO_SITE_LIMIT:
        raise ValueError(f"refusing to materialise {mpo.n_sites}-site operator")
    acc = mpo.tensors[0][0]  # (out, in, w)
    for core in mpo.tensors[1:]:
        acc = np.einsum("xyw,wabv->xaybv", acc, core)
        o, a, i, b, w = acc.shape
        acc = acc.reshape(o * a, i * b, w)
    return acc[:, :, 0]


def identity_mpo(n_sites: int) -> MPO:
    eye = np.eye(2).reshape(1, 2, 2, 1)
    return MPO(tuple(eye for _ in range(n_sites)))


def mpo_apply(mpo: MPO, mps: MPS, policy: TruncationPolicy | None = None) -> MPS:
    if mpo.n_sites != mps.n_sites:
        raise ValueError(f"site count mismatch: {mpo.n_sites} vs {mps.n_sites}")
    tensors = []
    for w, a in zip(mpo.tensors, mps.tensors):
        wl, _, _, wr = w.shape
        al, _, ar = a.shape
        t = np.einsum("aijb,cjd->acibd", w, a).reshape(wl * al, 2, wr * ar)
        tensors.append(t)
    return _maybe_truncate(MPS(tuple(tensors), mps.scale), policy)


def bond_spectra(mps: MPS) -> list[NDArray[np.float64]]:
    """Schmidt coefficients at every cut ``1..L-1`` (unnormalised)."""
    if mps.n_sites == 1:
        return []
    tensors = _left_orthogonalize(list(mps.tensors))
    _, _, _, spectra = _right_sweep(tensors, TruncationPolicy.exact())
    return [s * abs(mps.scale) for s in spectra]


def von_neumann_entropy(s: NDArray[np.float64]) -> float:
    """Entropy of the normalised squared Schmidt coefficients ``s``."""
    p = s**2
    total = p.sum()
    if total == 0:
        return 0.0
    p = p[p > 0] / total
    # clamp rounding below zero (a single unit coefficient gives -0.0)
    return max(0.0, float(-np.sum(p * np.log(p))))


def entanglement_entropy(mps: MPS, cut: int) -> float:
    """Von Neumann entropy across the bond between sites ``cut-1`` and ``cut``."""
    if not 1 <= cut <= mps.n_sites - 1:
        raise ValueError(f"cut must lie in [1, {mps.n_sites - 1}], got {cut}")
    return von_neumann_entropy(bond_spectra(mps)[cut - 1])


def entropy_profile(mps: MPS) -> list[float]:
    return [von_neumann_entropy(s) for s in bond_spectra(mps)]


_DUMP_MAGIC = b"MPS1"


def dump_mps(mps: MPS, path: str | Path) -> None:
    """Debug dump: per-site int64 shape header then little-endian complex128 entries."""
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC)
        fh.write(struct.pack("<qd", mps.n_sites, mps.scale))
        for t in mps.tensors:
            fh.write(struct.pack("<qqq", *t.shape))
            fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())


def load_mps(path: str | Path) -> MPS:
    data = Path(path).read_bytes()
    if data[:4] != _DUMP_MAGIC:
        raise ValueError(f"{path}: not an MPS dump")
    n_sites, scale = struct.unpack_from("<qd", data, 4)
    offset = 4 + 16
    tensors = []
    for _ in range(n_sites):
        shape = struct.unpack_from("<qqq", data, offset)
        offset += 24
        count = int(np.prod(shape))
        t = np.frombuffer(data, dtype="<c16", count=count, offset=offset).reshape(shape)
        offset += 16 * count
        tensors.append(t if np.any(t.imag) else t.real.copy())
    return MPS(tuple(tensors), scale)
