"""
量子側の基盤(パウリ和・状態ベクトルシミュレータ・アンザッツ)
"""

from .ansatz import AnsatzKind, AnsatzSpec, Entanglement, build_circuit, param_count, prepare_state
from .pauli import (
    PauliString,
    RfimSpec,
    WeightedPauliSum,
    abs_coefficient_sum,
    generate_rfim,
    hamiltonian_hash,
    load_bundled,
    parse_pauli_sum,
    serialize_pauli_sum,
)
from .statevector import Gate, GateKind, StateVector, apply_gate, cached_ground_energy, exact_ground_energy, expectation

__all__ = [
    "AnsatzKind",
    "AnsatzSpec",
    "Entanglement",
    "Gate",
    "GateKind",
    "PauliString",
    "RfimSpec",
    "StateVector",
    "WeightedPauliSum",
    "abs_coefficient_sum",
    "apply_gate",
    "build_circuit",
    "cached_ground_energy",
    "exact_ground_energy",
    "expectation",
    "generate_rfim",
    "hamiltonian_hash",
    "load_bundled",
    "param_count",
    "parse_pauli_sum",
    "prepare_state",
    "serialize_pauli_sum",
]
