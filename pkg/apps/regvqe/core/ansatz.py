"""
アンザッツ(パラメータ付き回路)
TwoLocal (Ry/Rz 回転層 + CX もつれ層) と単層 Ry の回路生成・状態準備
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
from functools import lru_cache

import numpy as np

from ..errors import GateError
from .statevector import Gate, GateKind, StateVector, apply_gate


class AnsatzKind(StrEnum):
    TWO_LOCAL = "TwoLocal"
    RY_LAYER = "RyLayer"


class Entanglement(StrEnum):
    LINEAR = "Linear"
    FULL = "Full"


@dataclass(frozen=True)
class AnsatzSpec:
    """回路テンプレート(種類・量子ビット数・もつれ層の繰り返し数・もつれ方)"""

    kind: AnsatzKind
    n_qubits: int
    reps: int = 0
    entanglement: Entanglement = Entanglement.LINEAR

    def __post_init__(self):
        object.__setattr__(self, "kind", AnsatzKind(self.kind))
        object.__setattr__(self, "entanglement", Entanglement(self.entanglement))
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {self.n_qubits}")
        if self.reps < 0:
            raise ValueError(f"reps must be non-negative, got {self.reps}")
        if self.kind == AnsatzKind.RY_LAYER and self.reps != 0:
            raise ValueError(f"RyLayer has no entangling layers (reps=0), got reps={self.reps}")

    @classmethod
    def two_local(cls, n_qubits: int, reps: int, entanglement: Entanglement = Entanglement.LINEAR) -> AnsatzSpec:
        return cls(AnsatzKind.TWO_LOCAL, n_qubits, reps, entanglement)

    @classmethod
    def ry_layer(cls, n_qubits: int) -> AnsatzSpec:
        return cls(AnsatzKind.RY_LAYER, n_qubits, 0)


def param_count(spec: AnsatzSpec) -> int:
    """P: TwoLocal は 2·n·(reps+1)、RyLayer は n"""
    if spec.kind == AnsatzKind.RY_LAYER:
        return spec.n_qubits
    return 2 * spec.n_qubits * (spec.reps + 1)


def _entangling_pairs(spec: AnsatzSpec) -> list[tuple[int, int]]:
    n = spec.n_qubits
    if spec.entanglement == Entanglement.FULL:
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    return [(q, q + 1) for q in range(n - 1)]


@lru_cache(maxsize=32)
def _template(spec: AnsatzSpec) -> tuple[tuple[GateKind, tuple[int, ...], int | None], ...]:
    """(ゲート種, 量子ビット, パラメータ番号) の並び"""
    n = spec.n_qubits
    if spec.kind == AnsatzKind.RY_LAYER:
        return tuple((GateKind.RY, (q,), q) for q in range(n))

    slots: list[tuple[GateKind, tuple[int, ...], int | None]] = []
    pairs = _entangling_pairs(spec)
    index = 0
    for layer in range(spec.reps + 1):
        for kind in (GateKind.RY, GateKind.RZ):
            for q in range(n):
                slots.append((kind, (q,), index))
                index += 1
        if layer < spec.reps:
            slots.extend((GateKind.CX, pair, None) for pair in pairs)
    return tuple(slots)


def as_parameter_vector(spec: AnsatzSpec, theta) -> np.ndarray:
    """θ を検証して float64 配列にする"""
    values = np.asarray(theta, dtype=float).reshape(-1)
    expected = param_count(spec)
    if values.size != expected:
        raise GateError(f"{spec.kind} with {spec.n_qubits} qubits needs {expected} parameters, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise GateError("parameter vector contains non-finite values")
    return values


def build_circuit(spec: AnsatzSpec, theta) -> list[Gate]:
    values = as_parameter_vector(spec, theta)
    return [
        Gate(kind, qubits, float(values[index]), index) if index is not None else Gate(kind, qubits)
        for kind, qubits, index in _template(spec)
    ]


def gate_count(spec: AnsatzSpec) -> int:
    return len(_template(spec))


def prepare_state(spec: AnsatzSpec, theta) -> StateVector:
    """|ψ(θ)⟩ = U(θ)|0…0⟩"""
    state = StateVector.zero(spec.n_qubits)
    for gate in build_circuit(spec, theta):
        apply_gate(state, gate)
    return state
