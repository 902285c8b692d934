"""Cluster-chain and toric-code models: stabilizer preparation and ED ground states.

Cluster chain (open, ``L`` sites)::

    H = -sum_{i=1}^{L-2} Z_{i-1} X_i Z_{i+1} - h1 sum_i X_i - h2 sum_i X_i X_{i+1}

Toric code on the square link lattice (periodic)::

    H = -sum_v A_v - sum_p B_p - hx sum_i X_i - hz sum_i Z_i,
    A_v = prod_{i in v} Z_i,  B_p = prod_{i in p} X_i

Degenerate ground spaces are resolved by pinning: the ED Hamiltonian gets an
extra ``-PINNING_FIELD * sum(pins)`` where the pins are the two chain-end
stabilizers ``X_0 Z_1`` and ``Z_{L-2} X_{L-1}`` (cluster chain) or the two
logical Z loops (toric code). The stabilizer preparations fix the same
operators to +1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import Lattice, chain, square_link
from .pauli import PauliString
from .statevector import MAX_QUBITS, Statevector, lowest_eigenpair, pauli_sum_matrix
from .tableau import StabilizerTableau, tableau_from_stabilizers

__all__ = [
    "HamiltonianSpec",
    "cluster_stabilizer",
    "cluster_generators",
    "prepare_cluster_state",
    "cluster_statevector",
    "vertex_operator",
    "plaquette_operator",
    "toric_logicals",
    "prepare_toric_code",
    "hamiltonian_terms",
    "pinning_terms",
    "ground_state",
    "product_statevector",
    "odd_string",
    "dense_string",
    "PINNING_FIELD",
]

PINNING_FIELD = 1e-6
MODELS = ("cluster-chain", "toric-code")


@dataclass(frozen=True)
class HamiltonianSpec:
    model: str
    couplings: tuple
    lattice: Lattice
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        c = tuple(float(v) for v in self.couplings)
        if len(c) != 2:
            raise ValueError("couplings must be a pair: (h1, h2) or (hx, hz)")
        object.__setattr__(self, "couplings", c)
        if self.model == "cluster-chain":
            if self.lattice.kind != "chain" or self.lattice.periodic:
                raise ValueError("the cluster model lives on an open chain")
            if self.lattice.site_count < 3:
                raise ValueError("cluster chain needs L >= 3")
            if c[0] < 0:
                raise ValueError("h1 must be non-negative")
        else:
            if self.lattice.kind != "square-link" or not self.lattice.periodic:
                raise ValueError("the toric code lives on a periodic square link lattice")
            if min(c) < 0:
                raise ValueError("hx and hz must be non-negative")

    @classmethod
    def cluster(cls, L: int, h1: float = 0.0, h2: float = 0.0) -> "HamiltonianSpec":
        return cls("cluster-chain", (h1, h2), chain(L, "open"))

    @classmethod
    def toric(cls, Lx: int, Ly: int, hx: float = 0.0, hz: float = 0.0) -> "HamiltonianSpec":
        return cls("toric-code", (hx, hz), square_link(Lx, Ly, "periodic"))

    def params(self) -> dict:
        names = ("h1", "h2") if self.model == "cluster-chain" else ("hx", "hz")
        return dict(zip(names, self.couplings))


def cluster_stabilizer(k: int) -> PauliString:
    """Bulk generator ``Z_{k-1} X_k Z_{k+1}`` (0-based ``k``)."""
    return PauliString(((k - 1, "Z"), (k, "X"), (k + 1, "Z")))


def cluster_generators(L: int, periodic: bool = False) -> list:
    if L < 3:
        raise ValueError("cluster state needs L >= 3")
    if periodic:
        return [PauliString.from_ops({(k - 1) % L: "Z", k: "X", (k + 1) % L: "Z"}) for k in range(L)]
    gens = [PauliString(((0, "X"), (1, "Z")))]
    gens += [cluster_stabilizer(k) for k in range(1, L - 1)]
    gens.append(PauliString(((L - 2, "Z"), (L - 1, "X"))))
    return gens


def prepare_cluster_state(L: int, periodic: bool = False) -> StabilizerTableau:
    """Cluster state, i.e. CZ on all bonds applied to ``|+>^L``; ``periodic`` closes the ring."""
    return tableau_from_stabilizers(cluster_generators(L, periodic), L)


def cluster_statevector(L: int) -> Statevector:
    """Dense cluster state from the circuit: amplitude ``2^{-L/2} (-1)^{sum_i b_i b_{i+1}}``."""
    if L > MAX_QUBITS:
        raise ValueError("too many qubits for a dense statevector")
    idx = np.arange(2**L, dtype=np.int64)
    bonds = np.bitwise_count(idx & (idx >> 1)).astype(np.int64)
    amp = (1 - 2 * (bonds & 1)) / 2 ** (L / 2)
    return Statevector(L, amp.astype(complex))


def product_statevector(blochs) -> Statevector:
    """Pure product state with the given unit Bloch vectors."""
    b = np.atleast_2d(np.asarray(blochs, dtype=float))
    psi = np.ones(1, dtype=complex)
    for bx, by, bz in b:
        if abs(bx * bx + by * by + bz * bz - 1) > 1e-9:
            raise ValueError("product states need unit Bloch vectors")
        theta = np.arccos(np.clip(bz, -1, 1))
        phi = np.arctan2(by, bx)
        single = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
        # qubit q is bit q, so later qubits are more significant
        psi = np.kron(single, psi)
    return Statevector(b.shape[0], psi)


def vertex_operator(lat: Lattice, x: int, y: int) -> PauliString:
    return PauliString(tuple((q, "Z") for q in lat.vertex_bonds(x, y)))


def plaquette_operator(lat: Lattice, x: int, y: int) -> PauliString:
    return PauliString(tuple((q, "X") for q in lat.plaquette_bonds(x, y)))


def toric_logicals(lat: Lattice) -> tuple:
    """Two Z-type non-contractible loops on the dual lattice."""
    lx, ly = lat.extents
    zl1 = PauliString(tuple((lat.v(x, 0), "Z") for x in range(lx)))
    zl2 = PauliString(tuple((lat.h(0, y), "Z") for y in range(ly)))
    return zl1, zl2


def prepare_toric_code(Lx: int, Ly: int) -> StabilizerTableau:
    """Toric-code ground state in the sector where both logical Z loops are +1."""
    if Lx < 2 or Ly < 2:
        raise ValueError("toric code needs Lx, Ly >= 2")
    lat = square_link(Lx, Ly)
    verts = lat.vertices()
    # one A_v and one B_p are dependent on a closed surface
    gens = [vertex_operator(lat, x, y) for x, y in verts[:-1]]
    gens += [plaquette_operator(lat, x, y) for x, y in verts[:-1]]
    gens += list(toric_logicals(lat))
    return tableau_from_stabilizers(gens, lat.site_count)


def hamiltonian_terms(spec: HamiltonianSpec) -> list:
    lat = spec.lattice
    n = lat.site_count
    terms = []
    if spec.model == "cluster-chain":
        h1, h2 = spec.couplings
        terms += [(-1.0, cluster_stabilizer(k)) for k in range(1, n - 1)]
        if h1:
            terms += [(-h1, PauliString(((i, "X"),))) for i in range(n)]
        if h2:
            terms += [(-h2, PauliString(((i, "X"), (i + 1, "X")))) for i in range(n - 1)]
    else:
        hx, hz = spec.couplings
        for x, y in lat.vertices():
            terms.append((-1.0, vertex_operator(lat, x, y)))
            terms.append((-1.0, plaquette_operator(lat, x, y)))
        if hx:
            terms += [(-hx, PauliString(((i, "X"),))) for i in range(n)]
        if hz:
            terms += [(-hz, PauliString(((i, "Z"),))) for i in range(n)]
    return terms


def pinning_terms(spec: HamiltonianSpec, field: float = PINNING_FIELD) -> list:
    n = spec.lattice.site_count
    if spec.model == "cluster-chain":
        pins = [cluster_generators(n)[0], cluster_generators(n)[-1]]
    else:
        pins = list(toric_logicals(spec.lattice))
    return [(-field, p) for p in pins]


def ground_state(spec: HamiltonianSpec, pinning: float = PINNING_FIELD) -> Statevector:
    n = spec.lattice.site_count
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the exact-diagonalization limit of {MAX_QUBITS}")
    terms = hamiltonian_terms(spec) + (pinning_terms(spec, pinning) if pinning else [])
    ham = pauli_sum_matrix(terms, n)
    energy, vec, levels, residual = lowest_eigenpair(ham, n)
    meta = {"model": spec.model, **spec.params(), "levels": levels.tolist(), "residual": residual,
            "pinning": pinning}
    return Statevector(n, vec, energy=energy, meta=meta)


def odd_string(n: int, start: int = 0) -> PauliString:
    """``Z_1 (prod_k X_{2k}) Z_n`` over ``n`` consecutive sites (odd ``n``)."""
    if n < 3 or n % 2 == 0:
        raise ValueError("odd string order parameter needs odd n >= 3")
    ops = {start: "Z", start + n - 1: "Z"}
    ops.update({start + 2 * k - 1: "X" for k in range(1, (n - 1) // 2 + 1)})
    return PauliString.from_ops(ops)


def dense_string(n: int, start: int = 0) -> PauliString:
    """Product ``prod_{k=2}^{n-1} B_k`` over ``n`` consecutive sites, sign from the Pauli algebra."""
    if n < 3:
        raise ValueError("dense string needs n >= 3")
    prod = cluster_stabilizer(start + 1)
    for k in range(start + 2, start + n - 1):
        prod = prod * cluster_stabilizer(k)
    return prod
