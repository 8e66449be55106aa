"""
状態ベクトルシミュレータ
ゲート適用・パウリ和の期待値(行列を作らない)・厳密基底エネルギー

qubit 0 は振幅インデックスの最下位ビット。倍精度複素数のみを扱う。
"""

from __future__ import annotations

import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from ..errors import GateError, GroundEnergyError, NonHermitianError, QubitMismatchError
from .pauli import WeightedPauliSum, hamiltonian_hash

logger = logging.getLogger(__name__)

IMAG_TOLERANCE = 1e-10
MAX_QUBITS = 16
DENSE_MAX_QUBITS = 10
LANCZOS_TOLERANCE = 1e-10
LANCZOS_MAX_ITERATIONS = 20_000
DIAGONAL_CHUNK = 1 << 12


class GateKind(StrEnum):
    RY = "RY"
    RZ = "RZ"
    CX = "CX"


@dataclass(frozen=True)
class Gate:
    """
    回路ゲート

    RY/RZ は qubits=(q,) と角度、CX は qubits=(control, target)。
    param_index は角度を供給したパラメータの位置(パラメータシフト用)。
    """

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float = 0.0
    param_index: int | None = None

    def __post_init__(self):
        expected = 2 if self.kind == GateKind.CX else 1
        if len(self.qubits) != expected:
            raise GateError(f"{self.kind} acts on {expected} qubit(s), got {self.qubits}")
        if self.kind == GateKind.CX and self.qubits[0] == self.qubits[1]:
            raise GateError(f"CX control and target must differ, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise GateError(f"negative qubit index in {self.qubits}")

    @classmethod
    def ry(cls, qubit: int, angle: float, param_index: int | None = None) -> Gate:
        return cls(GateKind.RY, (qubit,), float(angle), param_index)

    @classmethod
    def rz(cls, qubit: int, angle: float, param_index: int | None = None) -> Gate:
        return cls(GateKind.RZ, (qubit,), float(angle), param_index)

    @classmethod
    def cx(cls, control: int, target: int) -> Gate:
        return cls(GateKind.CX, (control, target))


@dataclass
class StateVector:
    """長さ 2^n の複素振幅ベクトル(1 回の最適化実行が専有する)"""

    amplitudes: np.ndarray
    n_qubits: int = field(default=0)

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1:
            raise QubitMismatchError(f"amplitudes must be 1-D, got shape {amps.shape}")
        n = int(round(math.log2(amps.size))) if amps.size else -1
        if n < 0 or (1 << n) != amps.size:
            raise QubitMismatchError(f"amplitude count {amps.size} is not a power of two")
        if self.n_qubits and self.n_qubits != n:
            raise QubitMismatchError(f"{amps.size} amplitudes do not describe {self.n_qubits} qubits")
        self.amplitudes = amps
        self.n_qubits = n

    @classmethod
    def zero(cls, n_qubits: int) -> StateVector:
        """|0…0⟩"""
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes.copy(), self.n_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """ゲートを状態に(その場で)適用して同じ状態を返す"""
    n = state.n_qubits
    if any(q >= n for q in gate.qubits):
        raise GateError(f"{gate.kind} on qubits {gate.qubits} is out of range for {n} qubits")

    amps = state.amplitudes
    if gate.kind == GateKind.CX:
        _apply_cx(amps, *gate.qubits)
        return state

    q = gate.qubits[0]
    v = amps.reshape(-1, 2, 1 << q)
    half = 0.5 * gate.angle
    if gate.kind == GateKind.RY:
        c, s = math.cos(half), math.sin(half)
        a0 = v[:, 0, :].copy()
        a1 = v[:, 1, :]
        v[:, 0, :] = c * a0 - s * a1
        v[:, 1, :] = s * a0 + c * a1
    elif gate.kind == GateKind.RZ:
        phase = complex(math.cos(half), math.sin(half))
        v[:, 0, :] *= phase.conjugate()
        v[:, 1, :] *= phase
    else:
        raise GateError(f"unsupported gate kind {gate.kind}")
    return state


def _apply_cx(amps: np.ndarray, control: int, target: int) -> None:
    hi, lo = max(control, target), min(control, target)
    # 軸 1 = ビット hi, 軸 3 = ビット lo
    v = amps.reshape(-1, 2, 1 << (hi - lo - 1), 2, 1 << lo)
    if control == hi:
        sub = v[:, 1, :, :, :]
        sub[:, :, [0, 1], :] = sub[:, :, [1, 0], :]
    else:
        sub = v[:, :, :, 1, :]
        sub[:, [0, 1], :, :] = sub[:, [1, 0], :, :]


def run_circuit(gates: list[Gate], n_qubits: int, state: StateVector | None = None) -> StateVector:
    state = StateVector.zero(n_qubits) if state is None else state
    for gate in gates:
        apply_gate(state, gate)
    return state


# === パウリ和の行列フリー評価 ===


@dataclass(frozen=True)
class _PauliKernel:
    """x_mask ごとに項をまとめた評価用テーブル"""

    n_qubits: int
    diagonal: np.ndarray | None
    flips: tuple[tuple[np.ndarray, np.ndarray], ...]  # (idx ^ x_mask, 重み)


def _phase_vector(indices: np.ndarray, z_mask: int, y_count: int) -> np.ndarray:
    signs = 1.0 - 2.0 * (np.bitwise_count(indices & z_mask) & 1)
    return (1j**y_count) * signs


@lru_cache(maxsize=64)
def _compile(h: WeightedPauliSum) -> _PauliKernel:
    indices = np.arange(1 << h.n_qubits, dtype=np.int64)
    diagonal = None
    grouped: dict[int, np.ndarray] = {}
    for coeff, pauli in h.terms:
        weights = coeff * _phase_vector(indices, pauli.z_mask, pauli.y_count)
        if pauli.x_mask == 0:
            diagonal = weights.real if diagonal is None else diagonal + weights.real
        else:
            grouped[pauli.x_mask] = grouped.get(pauli.x_mask, 0) + weights
    flips = tuple((indices ^ x_mask, weights) for x_mask, weights in sorted(grouped.items()))
    return _PauliKernel(h.n_qubits, diagonal, flips)


def expectation(state: StateVector, h: WeightedPauliSum) -> float:
    """⟨ψ|H|ψ⟩ = Σ_i c_i ⟨ψ|P_i|ψ⟩"""
    if state.n_qubits != h.n_qubits:
        raise QubitMismatchError(f"state has {state.n_qubits} qubits, Hamiltonian has {h.n_qubits}")
    kernel = _compile(h)
    psi = state.amplitudes

    total = 0j
    if kernel.diagonal is not None:
        total += float(np.dot(kernel.diagonal, psi.real**2 + psi.imag**2))
    for flipped, weights in kernel.flips:
        # P|b⟩ = w(b) |b ^ x_mask⟩
        total += complex(np.vdot(psi[flipped], weights * psi))

    if abs(total.imag) > IMAG_TOLERANCE:
        raise NonHermitianError(f"expectation has imaginary part {total.imag:.3e}")
    return float(total.real)


def apply_hamiltonian(h: WeightedPauliSum, vector: np.ndarray) -> np.ndarray:
    """H v (Lanczos の matvec)"""
    kernel = _compile(h)
    vector = np.asarray(vector, dtype=np.complex128).reshape(-1)
    out = np.zeros_like(vector)
    if kernel.diagonal is not None:
        out += kernel.diagonal * vector
    for flipped, weights in kernel.flips:
        out += (weights * vector)[flipped]
    return out


def to_sparse_matrix(h: WeightedPauliSum) -> scipy.sparse.csr_matrix:
    dim = 1 << h.n_qubits
    indices = np.arange(dim, dtype=np.int64)
    matrix = scipy.sparse.csr_matrix((dim, dim), dtype=np.complex128)
    for coeff, pauli in h.terms:
        data = coeff * _phase_vector(indices, pauli.z_mask, pauli.y_count)
        matrix = matrix + scipy.sparse.csr_matrix((data, (indices ^ pauli.x_mask, indices)), shape=(dim, dim))
    return matrix


# === 厳密基底エネルギー ===


def exact_ground_energy(h: WeightedPauliSum, max_iterations: int = LANCZOS_MAX_ITERATIONS) -> float:
    """
    最小固有値

    対角(Z/I のみ)ならば対角成分をチャンクごとに走査、
    n ≤ 10 は密行列の対角化、n ≤ 16 は行列フリー Lanczos (eigsh)。
    """
    n = h.n_qubits
    if n > MAX_QUBITS:
        raise GroundEnergyError(f"{n} qubits exceeds the exact-solver limit of {MAX_QUBITS}")
    if not h.terms:
        return 0.0

    if h.is_diagonal:
        return _diagonal_minimum(h)
    if n <= DENSE_MAX_QUBITS:
        return _dense_minimum(h)
    return _lanczos_minimum(h, max_iterations)


def _diagonal_minimum(h: WeightedPauliSum) -> float:
    dim = 1 << h.n_qubits
    best = math.inf
    for start in range(0, dim, DIAGONAL_CHUNK):
        indices = np.arange(start, min(start + DIAGONAL_CHUNK, dim), dtype=np.int64)
        values = np.zeros(indices.size)
        for coeff, pauli in h.terms:
            values += coeff * (1.0 - 2.0 * (np.bitwise_count(indices & pauli.z_mask) & 1))
        best = min(best, float(values.min()))
    return best


def _dense_minimum(h: WeightedPauliSum) -> float:
    matrix = to_sparse_matrix(h).toarray()
    values = scipy.linalg.eigh(matrix, eigvals_only=True, subset_by_index=[0, 0])
    return float(values[0])


def _lanczos_minimum(h: WeightedPauliSum, max_iterations: int) -> float:
    dim = 1 << h.n_qubits
    operator = LinearOperator((dim, dim), matvec=lambda v: apply_hamiltonian(h, v), dtype=np.complex128)
    try:
        values = eigsh(
            operator, k=1, which="SA", tol=LANCZOS_TOLERANCE, maxiter=max_iterations, return_eigenvectors=False
        )
    except ArpackNoConvergence as e:
        raise GroundEnergyError(f"Lanczos did not converge within {max_iterations} iterations") from e
    return float(np.min(values.real))


def cached_ground_energy(h: WeightedPauliSum, cache_dir: str | Path) -> float:
    """
    ハッシュをキーにしたファイルキャッシュ付きの厳密基底エネルギー

    キャッシュファイル <sha256>.gse は 10 進数 1 行のみ。
    """
    cache_dir = Path(cache_dir)
    path = cache_dir / f"{hamiltonian_hash(h)}.gse"
    if path.exists():
        try:
            value = float(path.read_text(encoding="utf-8").strip())
            logger.debug(f"Ground-energy cache hit: {path.name}")
            return value
        except ValueError:
            logger.warning(f"Ignoring corrupt ground-energy cache file {path}")

    logger.info(f"Computing exact ground energy for {h.n_qubits} qubits, {len(h)} terms")
    value = exact_ground_energy(h)
    cache_dir.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as f:
        f.write(f"{value:.17g}\n")
    os.replace(tmp, path)
    return value
