"""Stabilizer tableaux with destabilizers and single-qubit Pauli measurement.

Rows ``0..N-1`` hold destabilizers, rows ``N..2N-1`` stabilizers and row
``2N`` is scratch space. A row ``(x, z, r)`` denotes ``(-1)^r prod_j P_j``
where ``(x_j, z_j) = (1, 0), (1, 1), (0, 1)`` stands for ``X, Y, Z``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .pauli import PauliString

__all__ = ["StabilizerTableau", "tableau_from_stabilizers", "measure_pauli"]

# (x bit, z bit) of the measured single-qubit Pauli per basis x=0, y=1, z=2
BASIS_BITS = np.array([[1, 0], [1, 1], [0, 1]], dtype=np.uint8)
_OPS = {(1, 0): "X", (1, 1): "Y", (0, 1): "Z"}


@njit(cache=True)
def _g(x1, z1, x2, z2):
    if x1 == 0 and z1 == 0:
        return 0
    if x1 == 1 and z1 == 1:
        return z2 - x2
    if x1 == 1:
        return z2 * (2 * x2 - 1)
    return x2 * (1 - 2 * z2)


@njit(cache=True)
def _rowsum(x, z, r, h, i):
    # row h <- row i * row h
    n = x.shape[1]
    s = 2 * np.int64(r[h]) + 2 * np.int64(r[i])
    for j in range(n):
        s += _g(np.int64(x[i, j]), np.int64(z[i, j]), np.int64(x[h, j]), np.int64(z[h, j]))
    r[h] = 0 if s % 4 == 0 else 1
    for j in range(n):
        x[h, j] ^= x[i, j]
        z[h, j] ^= z[i, j]


@njit(cache=True)
def _measure(x, z, r, a, px, pz, coin):
    """Measure the Pauli ``(px, pz)`` on qubit ``a``; returns the outcome bit.

    ``coin`` is the outcome used when the result is random. Returns bit + 2
    when the outcome was random so callers can tell the cases apart.
    """
    n = x.shape[1]
    p = -1
    for k in range(n, 2 * n):
        if (x[k, a] & pz) ^ (z[k, a] & px):
            p = k
            break
    if p >= 0:
        for k in range(2 * n):
            if k != p and ((x[k, a] & pz) ^ (z[k, a] & px)):
                _rowsum(x, z, r, k, p)
        for j in range(n):
            x[p - n, j] = x[p, j]
            z[p - n, j] = z[p, j]
            x[p, j] = 0
            z[p, j] = 0
        r[p - n] = r[p]
        x[p, a] = px
        z[p, a] = pz
        r[p] = coin
        return coin + 2
    s = 2 * n
    for j in range(n):
        x[s, j] = 0
        z[s, j] = 0
    r[s] = 0
    for i in range(n):
        if (x[i, a] & pz) ^ (z[i, a] & px):
            _rowsum(x, z, r, s, i + n)
    return r[s]


@njit(cache=True, nogil=True)
def _sample_block(x0, z0, r0, bases, coins, basis_bits, out):
    shots, n = bases.shape
    x = np.empty_like(x0)
    z = np.empty_like(z0)
    r = np.empty_like(r0)
    for s in range(shots):
        x[:] = x0
        z[:] = z0
        r[:] = r0
        for a in range(n):
            b = bases[s, a]
            bit = _measure(x, z, r, a, basis_bits[b, 0], basis_bits[b, 1], coins[s, a])
            out[s, a] = 2 * b + (bit & 1)


def _gf2_rank(m: np.ndarray) -> int:
    a = m.copy() % 2
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        piv = np.nonzero(a[rank:, c])[0]
        if piv.size == 0:
            continue
        p = rank + piv[0]
        a[[rank, p]] = a[[p, rank]]
        mask = a[:, c].astype(bool)
        mask[rank] = False
        a[mask] ^= a[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _gf2_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """One solution ``X`` of ``a @ X = b`` over GF(2) for full-row-rank ``a``."""
    m, n = a.shape
    aug = np.concatenate([a % 2, b % 2], axis=1).astype(np.uint8)
    pivots = []
    row = 0
    for c in range(n):
        piv = np.nonzero(aug[row:, c])[0]
        if piv.size == 0:
            continue
        p = row + piv[0]
        aug[[row, p]] = aug[[p, row]]
        mask = aug[:, c].astype(bool)
        mask[row] = False
        aug[mask] ^= aug[row]
        pivots.append(c)
        row += 1
        if row == m:
            break
    if row < m:
        raise ValueError("system is rank deficient over GF(2)")
    sol = np.zeros((n, b.shape[1]), dtype=np.uint8)
    for i, c in enumerate(pivots):
        sol[c] = aug[i, n:]
    return sol


def _symplectic(a_x, a_z, b_x, b_z) -> np.ndarray:
    return (a_x.astype(np.int64) @ b_z.T.astype(np.int64) + a_z.astype(np.int64) @ b_x.T.astype(np.int64)) % 2


class StabilizerTableau:
    """Pure stabilizer state on ``n`` qubits, stored with destabilizers."""

    def __init__(self, x: np.ndarray, z: np.ndarray, r: np.ndarray):
        self.x = np.ascontiguousarray(x, dtype=np.uint8)
        self.z = np.ascontiguousarray(z, dtype=np.uint8)
        self.r = np.ascontiguousarray(r, dtype=np.uint8)
        self.n = self.x.shape[1]
        if self.x.shape != (2 * self.n + 1, self.n) or self.z.shape != self.x.shape:
            raise ValueError("tableau arrays must have shape (2n + 1, n)")

    @classmethod
    def zero_state(cls, n: int) -> "StabilizerTableau":
        x = np.zeros((2 * n + 1, n), dtype=np.uint8)
        z = np.zeros_like(x)
        x[np.arange(n), np.arange(n)] = 1
        z[n + np.arange(n), np.arange(n)] = 1
        return cls(x, z, np.zeros(2 * n + 1, dtype=np.uint8))

    def copy(self) -> "StabilizerTableau":
        return StabilizerTableau(self.x.copy(), self.z.copy(), self.r.copy())

    @property
    def stabilizer_rows(self):
        n = self.n
        return self.x[n : 2 * n], self.z[n : 2 * n], self.r[n : 2 * n]

    def stabilizers(self) -> list:
        xs, zs, rs = self.stabilizer_rows
        out = []
        for xr, zr, rr in zip(xs, zs, rs):
            ops = {q: _OPS[(int(xr[q]), int(zr[q]))] for q in range(self.n) if xr[q] or zr[q]}
            out.append(PauliString.from_ops(ops, -1 if rr else 1))
        return out

    def is_valid(self) -> bool:
        """Stabilizers commute, destabilizers commute, and pair up symplectically."""
        n = self.n
        x, z = self.x[: 2 * n], self.z[: 2 * n]
        gram = _symplectic(x, z, x, z)
        expected = np.zeros((2 * n, 2 * n), dtype=np.int64)
        expected[np.arange(n), n + np.arange(n)] = 1
        expected[n + np.arange(n), np.arange(n)] = 1
        if not np.array_equal(gram, expected):
            return False
        return _gf2_rank(np.concatenate([x[n:], z[n:]], axis=1)) == n

    def expectation(self, pauli: PauliString) -> int:
        """Exact expectation value: +1, -1 or 0."""
        px, pz = pauli.bits(self.n)
        n = self.n
        xs, zs, _ = self.stabilizer_rows
        if np.any(_symplectic(px[None], pz[None], xs, zs)):
            return 0
        work = self.copy()
        s = 2 * n
        work.x[s] = 0
        work.z[s] = 0
        work.r[s] = 0
        anti = _symplectic(px[None], pz[None], self.x[:n], self.z[:n])[0]
        for i in np.nonzero(anti)[0]:
            _rowsum(work.x, work.z, work.r, s, n + int(i))
        if not (np.array_equal(work.x[s], px) and np.array_equal(work.z[s], pz)):
            raise RuntimeError("stabilizer decomposition failed; tableau is inconsistent")
        return pauli.sign * (-1 if work.r[s] else 1)

    def measure(self, qubit: int, basis: int, coin: int = 0) -> tuple:
        """Measure ``X``, ``Y`` or ``Z`` (``basis`` 0, 1, 2) on ``qubit`` in place.

        Returns ``(bit, random)`` where ``bit = 0`` is the +1 outcome.
        """
        if not 0 <= qubit < self.n:
            raise IndexError("qubit out of range")
        px, pz = BASIS_BITS[basis]
        res = int(_measure(self.x, self.z, self.r, qubit, px, pz, np.uint8(coin)))
        return res & 1, res >= 2

    def sample_block(self, bases: np.ndarray, coins: np.ndarray) -> np.ndarray:
        out = np.empty(bases.shape, dtype=np.int8)
        _sample_block(self.x, self.z, self.r, bases.astype(np.int64), coins.astype(np.uint8), BASIS_BITS, out)
        return out


def tableau_from_stabilizers(generators: list, n: int) -> StabilizerTableau:
    """Build a tableau from ``n`` independent commuting Hermitian Pauli strings.

    Destabilizers are found by solving the symplectic pairing conditions over
    GF(2) and then made mutually commuting by adding stabilizers.
    """
    if len(generators) != n:
        raise ValueError(f"need exactly {n} generators, got {len(generators)}")
    sx = np.zeros((n, n), dtype=np.uint8)
    sz = np.zeros((n, n), dtype=np.uint8)
    sr = np.zeros(n, dtype=np.uint8)
    for k, g in enumerate(generators):
        sx[k], sz[k] = g.bits(n)
        sr[k] = g.sign < 0
    if np.any(_symplectic(sx, sz, sx, sz)):
        raise ValueError("stabilizer generators do not commute")
    if _gf2_rank(np.concatenate([sx, sz], axis=1)) != n:
        raise ValueError("stabilizer generators are not independent")
    # d . (z_j, x_j) = delta_ij; unknown d = (dx, dz)
    a = np.concatenate([sz, sx], axis=1)
    d = _gf2_solve(a, np.eye(n, dtype=np.uint8)).T
    dx, dz = d[:, :n].copy(), d[:, n:].copy()
    for i in range(n):
        for k in range(i):
            if _symplectic(dx[i : i + 1], dz[i : i + 1], dx[k : k + 1], dz[k : k + 1])[0, 0]:
                dx[i] ^= sx[k]
                dz[i] ^= sz[k]
    x = np.zeros((2 * n + 1, n), dtype=np.uint8)
    z = np.zeros_like(x)
    r = np.zeros(2 * n + 1, dtype=np.uint8)
    x[:n], z[:n] = dx, dz
    x[n : 2 * n], z[n : 2 * n], r[n : 2 * n] = sx, sz, sr
    tab = StabilizerTableau(x, z, r)
    if not tab.is_valid():
        raise RuntimeError("failed to complete the stabilizer tableau")
    return tab


def measure_pauli(tab: StabilizerTableau, qubit: int, basis: int, rng: np.random.Generator) -> int:
    """Projective single-qubit measurement with a fair coin for random outcomes."""
    bit, _ = tab.measure(qubit, basis, int(rng.integers(2)))
    return bit
