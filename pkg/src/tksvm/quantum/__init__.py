"""Quantum data: lattices, stabilizer and statevector states, Pauli-6 samplers."""

from .lattice import Lattice, chain, square_link
from .models import (
    HamiltonianSpec,
    cluster_generators,
    cluster_stabilizer,
    cluster_statevector,
    dense_string,
    ground_state,
    odd_string,
    plaquette_operator,
    prepare_cluster_state,
    prepare_toric_code,
    product_statevector,
    toric_logicals,
    vertex_operator,
)
from .pauli import PauliString
from .sampling import (
    Snapshots,
    expectation_pauli_string,
    pauli_estimator,
    random_snapshots,
    read_snapshots,
    sample_pauli6_statevector,
    sample_pauli6_tableau,
    sample_product,
    write_snapshots,
)
from .statevector import Statevector
from .tableau import StabilizerTableau, tableau_from_stabilizers

__all__ = [
    "Lattice", "chain", "square_link", "HamiltonianSpec", "PauliString", "Snapshots",
    "Statevector", "StabilizerTableau", "tableau_from_stabilizers",
    "cluster_generators", "cluster_stabilizer", "cluster_statevector", "dense_string",
    "ground_state", "odd_string", "plaquette_operator", "prepare_cluster_state",
    "prepare_toric_code", "product_statevector", "toric_logicals", "vertex_operator",
    "expectation_pauli_string", "pauli_estimator", "random_snapshots", "read_snapshots",
    "sample_pauli6_statevector", "sample_pauli6_tableau", "sample_product", "write_snapshots",
]
