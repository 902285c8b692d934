"""Single-qubit informationally complete POVMs and their classical map.

Every outcome ``i`` of a qubit POVM is written as
``M_i = (w_i / 2) (I + S_i . sigma)`` with a weight ``w_i`` and a unit Bloch
vector ``S_i``. The classical image of outcome ``i`` is ``S_i`` itself.

Outcome order for Pauli-6 is fixed as ``(up-x, down-x, up-y, down-y, up-z,
down-z)``, i.e. ``index = 2 * basis + bit`` with ``basis`` in ``x=0, y=1, z=2``
and ``bit = 0`` for the +1 eigenvalue. Snapshot files rely on this order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Povm",
    "pauli6",
    "tetra",
    "outcome_probabilities",
    "is_informationally_complete",
    "map_to_bloch",
    "reconstruct_bloch",
    "PAULI6_LABELS",
]

COMPLETENESS_TOL = 1e-12

PAULI6_LABELS = ("up-x", "down-x", "up-y", "down-y", "up-z", "down-z")


@dataclass(frozen=True)
class Povm:
    """Immutable qubit POVM given by outcome weights and Bloch vectors.

    Construction checks completeness and that every Bloch vector has unit
    norm. Informational completeness is a separate query
    (:func:`is_informationally_complete`) so that non-IC measurements can still
    be represented and rejected explicitly by callers that need IC.
    """

    name: str
    weights: np.ndarray
    blochs: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        blochs = np.asarray(self.blochs, dtype=float)
        if blochs.ndim != 2 or blochs.shape[1] != 3 or blochs.shape[0] != weights.size:
            raise ValueError(
                f"expected {weights.size} Bloch vectors of length 3, got shape {blochs.shape}"
            )
        if np.any(weights <= 0):
            raise ValueError("POVM weights must be positive")
        norms = np.linalg.norm(blochs, axis=1)
        if np.any(np.abs(norms - 1.0) > COMPLETENESS_TOL):
            raise ValueError("POVM Bloch vectors must have unit norm")
        if abs(weights.sum() - 2.0) > COMPLETENESS_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, completeness needs 2")
        if np.linalg.norm(weights @ blochs) > COMPLETENESS_TOL:
            raise ValueError("weighted Bloch vectors do not cancel; POVM is incomplete")
        weights.setflags(write=False)
        blochs = blochs.copy()
        blochs.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "blochs", blochs)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(weights.size)))

    @property
    def n_outcomes(self) -> int:
        return int(self.weights.size)

    def operators(self) -> np.ndarray:
        """Outcome operators as an array of shape ``(k, 2, 2)``."""
        sigma = np.array(
            [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
        )
        eye = np.eye(2, dtype=complex)
        return np.array(
            [w / 2 * (eye + np.tensordot(s, sigma, axes=1)) for w, s in zip(self.weights, self.blochs)]
        )


def pauli6() -> Povm:
    """Random-Pauli-basis measurement: six outcomes of weight 1/3."""
    blochs = np.array(
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float
    )
    return Povm("pauli6", np.full(6, 1 / 3), blochs, PAULI6_LABELS)


def tetra() -> Povm:
    """Minimal symmetric (SIC) POVM whose Bloch vectors span a tetrahedron."""
    s2 = np.sqrt(2.0)
    blochs = np.array(
        [
            [0.0, 0.0, 1.0],
            [2 * s2 / 3, 0.0, -1 / 3],
            [-s2 / 3, -np.sqrt(2 / 3), -1 / 3],
            [-s2 / 3, np.sqrt(2 / 3), -1 / 3],
        ]
    )
    # renormalize away the last ulp so that the unit-norm check is exact
    blochs /= np.linalg.norm(blochs, axis=1, keepdims=True)
    return Povm("tetra", np.full(4, 0.5), blochs, ("t0", "t1", "t2", "t3"))


def _check_bloch(bloch_state) -> np.ndarray:
    b = np.asarray(bloch_state, dtype=float)
    if b.shape[-1] != 3:
        raise ValueError("Bloch vectors must have three components")
    if np.any(np.linalg.norm(b, axis=-1) > 1 + 1e-9):
        raise ValueError("Bloch vector norm exceeds 1; not a valid qubit state")
    return b


def outcome_probabilities(bloch_state, povm: Povm) -> np.ndarray:
    """Born probabilities ``p_i = (w_i / 2)(1 + S_i . b)``.

    ``bloch_state`` may be a single 3-vector or a stack ``(..., 3)``; the
    outcome axis is appended last.
    """
    b = _check_bloch(bloch_state)
    p = 0.5 * povm.weights * (1.0 + b @ povm.blochs.T)
    # clip the -1e-17 that 1 + (-1) can leave behind
    return np.clip(p, 0.0, None)


def outcome_matrix(povm: Povm) -> np.ndarray:
    """The ``4 x k`` matrix with columns ``(w_i, w_i S_i)``."""
    return np.vstack([povm.weights, (povm.weights[:, None] * povm.blochs).T])


def is_informationally_complete(povm: Povm) -> bool:
    return int(np.linalg.matrix_rank(outcome_matrix(povm), tol=1e-10)) == 4


def map_to_bloch(outcome, povm: Povm) -> np.ndarray:
    """Classical image of one outcome index (or an integer array of them)."""
    idx = np.asarray(outcome)
    if not np.issubdtype(idx.dtype, np.integer):
        raise TypeError("outcome indices must be integers")
    if np.any(idx < 0) or np.any(idx >= povm.n_outcomes):
        raise IndexError(f"outcome index out of range for {povm.n_outcomes}-outcome POVM")
    return povm.blochs[idx]


def reconstruct_bloch(probabilities, povm: Povm) -> np.ndarray:
    """Least-squares tomography of a Bloch vector from outcome probabilities."""
    p = np.asarray(probabilities, dtype=float)
    design = 0.5 * povm.weights[:, None] * povm.blochs
    rhs = p - 0.5 * povm.weights
    sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return sol
