import functools
import os

import numpy as np
import pytest

from apps.regvqe.core.pauli import WeightedPauliSum

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# 同梱 H2 (STO-3G, 0.735 Å) の厳密基底エネルギー。電子部分 -1.857275030202 に恒等項のずらし分を足した値
H2_GROUND_ENERGY = -2.0309339004474013


def pytest_collection_modifyitems(config, items):
    if os.getenv("REGVQE_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set REGVQE_RUN_SLOW=1 to run desk-scale experiments")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path_factory, monkeypatch):
    """環境変数と .env の影響を受けないようにする"""
    monkeypatch.setenv("REGVQE_CACHE_DIR", str(tmp_path_factory.mktemp("cache")))
    monkeypatch.delenv("REGVQE_WORKERS", raising=False)
    monkeypatch.delenv("REGVQE_LOG_LEVEL", raising=False)
    monkeypatch.delenv("REGVQE_DEBUG", raising=False)


def pauli_matrix(label: str) -> np.ndarray:
    """ラベル左端が qubit 0 (最下位ビット) なので、クロネッカー積は右端から"""
    return functools.reduce(np.kron, [PAULI_MATRICES[c] for c in reversed(label)])


def dense_matrix(h: WeightedPauliSum) -> np.ndarray:
    dim = 1 << h.n_qubits
    matrix = np.zeros((dim, dim), dtype=complex)
    for coeff, pauli in h.terms:
        matrix += coeff * pauli_matrix(pauli.label)
    return matrix


def random_pauli_sum(rng: np.random.Generator, n_qubits: int, n_terms: int) -> WeightedPauliSum:
    pairs = []
    for _ in range(n_terms):
        label = "".join(rng.choice(list("IXYZ"), size=n_qubits))
        pairs.append((float(rng.normal()), label))
    return WeightedPauliSum.from_pairs(pairs, n_qubits)


def random_amplitudes(rng: np.random.Generator, n_qubits: int) -> np.ndarray:
    amps = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return amps / np.linalg.norm(amps)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def z1():
    """H = Z (1 qubit)"""
    return WeightedPauliSum.from_pairs([(1.0, "Z")])


@pytest.fixture
def toy_zz():
    """H = ZI + IZ: E(θ) = cos θ0 + cos θ1 under a Ry layer"""
    return WeightedPauliSum.from_pairs([(1.0, "ZI"), (1.0, "IZ")])
