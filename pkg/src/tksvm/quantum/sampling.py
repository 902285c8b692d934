"""Pauli-6 snapshot sampling, seeded stream splitting and the snapshot file format.

Reproducibility contract: shots are grouped into consecutive blocks of
``BLOCK_SHOTS``. Block ``k`` draws all of its randomness (basis choices and
outcome coins) from child ``k`` of ``numpy.random.SeedSequence(seed)``, so the
output does not depend on how blocks are scheduled across workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..povm import outcome_probabilities, pauli6
from .lattice import Lattice
from .pauli import PauliString
from .statevector import MAX_QUBITS, Statevector, sample_statevector_block
from .tableau import StabilizerTableau

__all__ = [
    "Snapshots",
    "BLOCK_SHOTS",
    "block_generators",
    "sample_pauli6_tableau",
    "sample_pauli6_statevector",
    "sample_product",
    "random_snapshots",
    "expectation_pauli_string",
    "pauli_estimator",
    "write_snapshots",
    "read_snapshots",
    "FORMAT_TAG",
]

BLOCK_SHOTS = 1024
FORMAT_TAG = "#tksvm v1"


@dataclass
class Snapshots:
    """A batch of single-shot Pauli-6 outcomes, one row per shot."""

    lattice: Lattice
    outcomes: np.ndarray
    seed: int | None = None
    povm: str = "pauli6"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        out = np.asarray(self.outcomes)
        if out.ndim != 2 or out.shape[1] != self.lattice.site_count:
            raise ValueError(
                f"outcomes must have shape (shots, {self.lattice.site_count}), got {out.shape}"
            )
        if out.size and (out.min() < 0 or out.max() > 5):
            raise ValueError("Pauli-6 outcome indices must lie in 0..5")
        self.outcomes = out.astype(np.int8, copy=False)

    def __len__(self):
        return self.outcomes.shape[0]

    def __iter__(self):
        return iter(self.outcomes)

    def __getitem__(self, item):
        if isinstance(item, (int, np.integer)):
            return self.outcomes[item]
        return Snapshots(self.lattice, self.outcomes[item], self.seed, self.povm, dict(self.params))

    @staticmethod
    def concatenate(parts: list) -> "Snapshots":
        if not parts:
            raise ValueError("nothing to concatenate")
        lat = parts[0].lattice
        if any(p.lattice != lat for p in parts):
            raise ValueError("cannot pool snapshots from different lattices")
        return Snapshots(lat, np.concatenate([p.outcomes for p in parts]), None, parts[0].povm)


def block_generators(seed, shots: int):
    """Yield ``(start, stop, Generator)`` for each block of shots."""
    n_blocks = -(-shots // BLOCK_SHOTS)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    for k, child in enumerate(children):
        start = k * BLOCK_SHOTS
        yield start, min(shots, start + BLOCK_SHOTS), np.random.Generator(np.random.PCG64(child))


def _run_blocks(fn, seed, shots, n_sites, threads):
    out = np.empty((shots, n_sites), dtype=np.int8)
    blocks = list(block_generators(seed, shots))

    def work(block):
        start, stop, rng = block
        out[start:stop] = fn(stop - start, rng)

    if threads and threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, blocks))
    else:
        for b in blocks:
            work(b)
    return out


def _default_threads():
    return int(os.environ.get("TKSVM_THREADS", "1"))


def sample_pauli6_tableau(state: StabilizerTableau, shots: int, rng_seed, lattice: Lattice | None = None,
                          threads: int | None = None) -> Snapshots:
    """Random-basis single-qubit measurements of a stabilizer state.

    Every shot measures all qubits in ascending order on a private copy of the
    tableau; the input tableau is left untouched.
    """
    n = state.n
    lattice = lattice if lattice is not None else Lattice("chain", (n,), "open")
    if lattice.site_count != n:
        raise ValueError("lattice size does not match the tableau")

    def fn(count, rng):
        bases = rng.integers(0, 3, size=(count, n))
        coins = rng.integers(0, 2, size=(count, n), dtype=np.uint8)
        return state.sample_block(bases, coins)

    out = _run_blocks(fn, rng_seed, shots, n, threads or _default_threads())
    return Snapshots(lattice, out, rng_seed)


def sample_pauli6_statevector(state: Statevector, shots: int, rng_seed, lattice: Lattice | None = None,
                              threads: int | None = None) -> Snapshots:
    """Sequential-collapse sampling of a dense statevector (sites ascending)."""
    n = state.n
    if n > MAX_QUBITS:
        raise ValueError("too many qubits for statevector sampling")
    lattice = lattice if lattice is not None else Lattice("chain", (n,), "open")
    if lattice.site_count != n:
        raise ValueError("lattice size does not match the statevector")
    psi = state.amplitudes

    def fn(count, rng):
        bases = rng.integers(0, 3, size=(count, n))
        uniforms = rng.random(size=(count, n))
        return sample_statevector_block(psi, n, bases, uniforms)

    out = _run_blocks(fn, rng_seed, shots, n, threads or _default_threads())
    return Snapshots(lattice, out, rng_seed)


def sample_product(blochs, shots: int, rng_seed, lattice: Lattice | None = None) -> Snapshots:
    """Independent per-site sampling of a product state given its Bloch vectors."""
    b = np.atleast_2d(np.asarray(blochs, dtype=float))
    probs = outcome_probabilities(b, pauli6())
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    n = b.shape[0]
    lattice = lattice if lattice is not None else Lattice("chain", (n,), "open")
    if lattice.site_count != n:
        raise ValueError("lattice size does not match the number of Bloch vectors")

    def fn(count, rng):
        u = rng.random(size=(count, n))
        return (u[:, :, None] >= cdf[None, :, :]).sum(axis=2).astype(np.int8)

    out = _run_blocks(fn, rng_seed, shots, n, 1)
    return Snapshots(lattice, out, rng_seed)


def random_snapshots(lattice: Lattice, shots: int, rng_seed) -> Snapshots:
    """Uniform outcomes on every site: the featureless reference class."""
    n = lattice.site_count

    def fn(count, rng):
        return rng.integers(0, 6, size=(count, n), dtype=np.int8)

    out = _run_blocks(fn, rng_seed, shots, n, 1)
    return Snapshots(lattice, out, rng_seed)


def expectation_pauli_string(state, pauli: PauliString) -> float:
    """Exact ``<P>`` on a statevector or stabilizer tableau (the test oracle)."""
    if isinstance(state, StabilizerTableau):
        pauli.check_sites(state.n)
        return float(state.expectation(pauli))
    if isinstance(state, Statevector):
        return state.expectation(pauli)
    raise TypeError(f"unsupported state type {type(state).__name__}")


_BASIS = {"X": 0, "Y": 1, "Z": 2}


def pauli_estimator(snaps: Snapshots, pauli: PauliString) -> np.ndarray:
    """Per-shot product of mapped Bloch components; its mean estimates ``3^-r <P>``."""
    pauli.check_sites(snaps.lattice.site_count)
    vals = np.ones(len(snaps))
    for site, op in pauli.support:
        o = snaps.outcomes[:, site].astype(np.int64)
        hit = (o // 2) == _BASIS[op]
        vals *= np.where(hit, 1 - 2 * (o % 2), 0)
    return pauli.sign * vals


def write_snapshots(path, snaps: Snapshots, extra: dict | None = None):
    lat = snaps.lattice
    header = (
        f"{FORMAT_TAG} povm={snaps.povm} lattice={lat.kind} L={lat.extent_label()} "
        f"boundary={lat.boundary} seed={snaps.seed if snaps.seed is not None else 'none'}"
    )
    extra = {**snaps.params, **(extra or {})}
    for k, v in extra.items():
        header += f" {k}={v}"
    path = Path(path)
    with path.open("w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for row in snaps.outcomes:
            fh.write(" ".join(map(str, row.tolist())) + "\n")


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_snapshots(path) -> Snapshots:
    path = Path(path)
    with path.open("r", encoding="ascii") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(FORMAT_TAG + " "):
            raise ValueError(f"{path}: not a tksvm v1 snapshot file")
        fields = dict(tok.split("=", 1) for tok in header[len(FORMAT_TAG) + 1 :].split())
        for key in ("povm", "lattice", "L", "boundary", "seed"):
            if key not in fields:
                raise ValueError(f"{path}: header lacks {key}=")
        if fields["povm"] != "pauli6":
            raise ValueError(f"{path}: unsupported POVM {fields['povm']!r}")
        lat = Lattice.from_label(fields["lattice"], fields["L"], fields["boundary"])
        data = np.loadtxt(fh, dtype=np.int8, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, lat.site_count), dtype=np.int8)
    seed = None if fields["seed"] == "none" else _parse_value(fields["seed"])
    params = {k: _parse_value(v) for k, v in fields.items()
              if k not in ("povm", "lattice", "L", "boundary", "seed")}
    return Snapshots(lat, data, seed, fields["povm"], params)
