"""Dense statevectors, Pauli-sum Hamiltonians and exact diagonalization.

Qubit ``q`` is bit ``q`` of the computational-basis index (little endian).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from numba import njit

from ..exceptions import ConvergenceError, SamplingError
from .pauli import PauliString

__all__ = [
    "Statevector",
    "apply_pauli",
    "pauli_sum_matrix",
    "lowest_eigenpair",
    "MAX_QUBITS",
    "DENSE_MAX_QUBITS",
]

logger = logging.getLogger(__name__)

MAX_QUBITS = 20
DENSE_MAX_QUBITS = 10
KRYLOV_TOL = 1e-10
KRYLOV_MAXITER = 5000
DEGENERACY_TOL = 1e-8
RESIDUAL_TOL = 1e-8


@dataclass
class Statevector:
    n: int
    amplitudes: np.ndarray
    energy: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        amp = np.ascontiguousarray(self.amplitudes, dtype=complex)
        if amp.shape != (2**self.n,):
            raise ValueError(f"expected {2**self.n} amplitudes, got {amp.shape}")
        if abs(np.linalg.norm(amp) - 1.0) > 1e-10:
            raise ValueError("statevector is not normalized")
        self.amplitudes = amp

    def expectation(self, pauli: PauliString) -> float:
        pauli.check_sites(self.n)
        val = np.vdot(self.amplitudes, apply_pauli(self.amplitudes, pauli, self.n))
        return float(val.real)


def _parity(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values).astype(np.int64) & 1


def apply_pauli(psi: np.ndarray, pauli: PauliString, n: int) -> np.ndarray:
    """``P |psi>`` by direct index manipulation."""
    xmask, zmask, ny = pauli.masks()
    idx = np.arange(2**n, dtype=np.int64)
    src = idx ^ xmask
    phase = (1j) ** ny * pauli.sign
    signs = 1 - 2 * _parity(src & zmask)
    return phase * signs * psi[src]


def pauli_sum_matrix(terms: list, n: int) -> scipy.sparse.csr_matrix:
    """Sparse matrix of ``sum_k c_k P_k`` with terms grouped by their X mask."""
    dim = 2**n
    idx = np.arange(dim, dtype=np.int64)
    groups: dict = {}
    for coef, pauli in terms:
        pauli.check_sites(n)
        xmask, zmask, ny = pauli.masks()
        diag = groups.setdefault(xmask, np.zeros(dim, dtype=complex))
        diag += coef * pauli.sign * (1j) ** ny * (1 - 2 * _parity(idx & zmask))
    rows, cols, vals = [], [], []
    for xmask, diag in groups.items():
        # entry (k ^ xmask, k) carries the phase evaluated on the input index k
        rows.append(idx ^ xmask)
        cols.append(idx)
        vals.append(diag)
    data = np.concatenate(vals)
    if np.max(np.abs(data.imag), initial=0.0) < 1e-14:
        data = data.real
    mat = scipy.sparse.csr_matrix((data, (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    mat.eliminate_zeros()
    return mat


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec) > np.abs(vec).max() * (1 - 1e-9)))
    return vec * (abs(vec[k]) / vec[k])


def lowest_eigenpair(ham: scipy.sparse.csr_matrix, n: int, n_levels: int = 4):
    """Lowest eigenvalue/eigenvector plus the next few eigenvalues.

    Dense diagonalization up to ``DENSE_MAX_QUBITS``, ARPACK Lanczos above.
    """
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the exact-diagonalization limit of {MAX_QUBITS}")
    dim = 2**n
    k = min(n_levels, dim - 1) if dim > 1 else 1
    if n <= DENSE_MAX_QUBITS:
        dense = ham.toarray()
        evals, evecs = scipy.linalg.eigh(dense, subset_by_index=[0, min(k, dim - 1)])
    else:
        v0 = np.random.default_rng(12345).standard_normal(dim)
        if np.iscomplexobj(ham.data):
            v0 = v0.astype(complex)
        try:
            evals, evecs = scipy.sparse.linalg.eigsh(
                ham, k=k, which="SA", tol=KRYLOV_TOL, maxiter=KRYLOV_MAXITER, v0=v0
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"Lanczos did not converge after {KRYLOV_MAXITER} iterations"
            ) from exc
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
    vec = evecs[:, 0].astype(complex)
    vec /= np.linalg.norm(vec)
    vec = _fix_phase(vec)
    energy = float(evals[0])
    residual = float(np.linalg.norm(ham @ vec - energy * vec))
    if residual > RESIDUAL_TOL:
        raise ConvergenceError(f"ground-state residual {residual:.2e} exceeds {RESIDUAL_TOL:g}")
    if len(evals) > 1 and evals[1] - evals[0] < DEGENERACY_TOL:
        warnings.warn(
            f"ground space degenerate within {DEGENERACY_TOL:g} (gap {evals[1] - evals[0]:.2e}); "
            "returned vector is an arbitrary member",
            RuntimeWarning,
            stacklevel=2,
        )
    return energy, vec, np.asarray(evals, dtype=float), residual


@njit(cache=True)
def _rotate_to_z(psi, a, basis):
    # X: apply H; Y: apply S^dagger then H
    step = 1 << a
    dim = psi.shape[0]
    inv = 1.0 / np.sqrt(2.0)
    for k in range(dim):
        if k & step:
            continue
        u = psi[k]
        w = psi[k | step]
        if basis == 1:
            w = -1j * w
        psi[k] = (u + w) * inv
        psi[k | step] = (u - w) * inv


@njit(cache=True, nogil=True)
def _sample_statevector_block(psi0, n, bases, uniforms, out):
    """Sequential collapse sampling; returns -1 on success or the failing shot index."""
    shots = bases.shape[0]
    dim = psi0.shape[0]
    psi = np.empty_like(psi0)
    for s in range(shots):
        psi[:] = psi0
        for a in range(n):
            b = bases[s, a]
            if b != 2:
                _rotate_to_z(psi, a, b)
            step = 1 << a
            p0 = 0.0
            tot = 0.0
            for k in range(dim):
                w = psi[k].real ** 2 + psi[k].imag ** 2
                tot += w
                if not (k & step):
                    p0 += w
            p0 /= tot
            bit = 0 if uniforms[s, a] < p0 else 1
            pb = p0 if bit == 0 else 1.0 - p0
            if pb < 1e-14:
                return s
            scale = 1.0 / np.sqrt(pb * tot)
            for k in range(dim):
                if ((k & step) != 0) == (bit == 1):
                    psi[k] *= scale
                else:
                    psi[k] = 0.0
            out[s, a] = 2 * b + bit
    return -1


def sample_statevector_block(psi: np.ndarray, n: int, bases: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    out = np.empty(bases.shape, dtype=np.int8)
    status = _sample_statevector_block(psi, n, bases.astype(np.int64), uniforms, out)
    if status >= 0:
        raise SamplingError(
            f"shot {status}: sampled a branch with probability < 1e-14 (numerical inconsistency)"
        )
    return out
