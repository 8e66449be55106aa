import functools
import math

import numpy as np
import pytest
from conftest import random_pauli_sum

from apps.regvqe.core.ansatz import (
    AnsatzKind,
    AnsatzSpec,
    Entanglement,
    build_circuit,
    gate_count,
    param_count,
    prepare_state,
)
from apps.regvqe.core.statevector import Gate, GateKind, expectation
from apps.regvqe.errors import GateError


def _gate_matrix(gate: Gate, n: int) -> np.ndarray:
    """全系のユニタリ(qubit 0 が最下位ビット)"""
    if gate.kind == GateKind.CX:
        control, target = gate.qubits
        dim = 1 << n
        matrix = np.zeros((dim, dim))
        for b in range(dim):
            matrix[b ^ (1 << target) if b >> control & 1 else b, b] = 1.0
        return matrix
    half = gate.angle / 2
    if gate.kind == GateKind.RY:
        single = np.array([[math.cos(half), -math.sin(half)], [math.sin(half), math.cos(half)]], dtype=complex)
    else:
        single = np.diag([np.exp(-1j * half), np.exp(1j * half)])
    factors = [single if q == gate.qubits[0] else np.eye(2) for q in reversed(range(n))]
    return functools.reduce(np.kron, factors)


class TestParamCount:
    @pytest.mark.parametrize(
        ("spec", "expected"),
        [
            (AnsatzSpec.two_local(4, 4), 40),
            (AnsatzSpec.two_local(8, 4), 80),
            (AnsatzSpec.ry_layer(12), 12),
        ],
    )
    def test_counts(self, spec, expected):
        assert param_count(spec) == expected

    def test_ry_layer_rejects_reps(self):
        with pytest.raises(ValueError):
            AnsatzSpec(AnsatzKind.RY_LAYER, 3, reps=1)


class TestBuildCircuit:
    def test_ry_layer(self):
        gates = build_circuit(AnsatzSpec.ry_layer(2), [math.pi, 0.0])
        assert [(g.kind, g.qubits, g.angle) for g in gates] == [
            (GateKind.RY, (0,), math.pi),
            (GateKind.RY, (1,), 0.0),
        ]
        assert np.argmax(prepare_state(AnsatzSpec.ry_layer(2), [math.pi, 0.0]).probabilities()) == 0b01

    def test_two_local_gate_count(self):
        spec = AnsatzSpec.two_local(2, 1)
        assert gate_count(spec) == 9
        assert len(build_circuit(spec, np.zeros(8))) == 9

    def test_full_entanglement(self):
        spec = AnsatzSpec.two_local(4, 2, Entanglement.FULL)
        cx = [g.qubits for g in build_circuit(spec, np.zeros(param_count(spec))) if g.kind == GateKind.CX]
        assert cx == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] * 2

    def test_parameter_order_is_layer_major(self):
        spec = AnsatzSpec.two_local(3, 1)
        theta = np.arange(param_count(spec), dtype=float)
        rotations = [g for g in build_circuit(spec, theta) if g.param_index is not None]
        for g in rotations:
            layer, rest = divmod(g.param_index, 6)
            block, q = divmod(rest, 3)
            assert g.kind == (GateKind.RY if block == 0 else GateKind.RZ)
            assert g.qubits == (q,)
            assert g.angle == float(g.param_index)
            assert layer in (0, 1)

    def test_length_mismatch(self):
        with pytest.raises(GateError):
            build_circuit(AnsatzSpec.two_local(2, 1), np.zeros(7))

    def test_non_finite_angle(self):
        with pytest.raises(GateError):
            build_circuit(AnsatzSpec.ry_layer(2), [0.0, math.nan])

    def test_gate_count_depends_only_on_spec(self, rng):
        spec = AnsatzSpec.two_local(3, 2)
        counts = {len(build_circuit(spec, rng.uniform(-3, 3, param_count(spec)))) for _ in range(5)}
        assert counts == {gate_count(spec)}


class TestPrepareState:
    def test_single_rotation(self):
        state = prepare_state(AnsatzSpec.ry_layer(1), [math.pi / 2])
        np.testing.assert_allclose(state.amplitudes, [math.cos(math.pi / 4), math.sin(math.pi / 4)], atol=1e-15)

    @pytest.mark.parametrize("spec", [AnsatzSpec.ry_layer(3), AnsatzSpec.two_local(2, 1), AnsatzSpec.two_local(3, 2)])
    def test_zero_parameters_give_zero_state(self, spec):
        state = prepare_state(spec, np.zeros(param_count(spec)))
        expected = np.zeros(1 << spec.n_qubits)
        expected[0] = 1.0
        np.testing.assert_allclose(np.abs(state.amplitudes), expected, atol=1e-15)

    def test_matches_dense_gate_product(self, rng):
        spec = AnsatzSpec.two_local(3, 2)
        theta = rng.uniform(-math.pi, math.pi, param_count(spec))
        psi = np.zeros(8, dtype=complex)
        psi[0] = 1.0
        for gate in build_circuit(spec, theta):
            psi = _gate_matrix(gate, 3) @ psi
        np.testing.assert_allclose(prepare_state(spec, theta).amplitudes, psi, atol=1e-10)

    def test_periodic_in_each_parameter(self, rng):
        spec = AnsatzSpec.two_local(3, 1)
        h = random_pauli_sum(rng, 3, 6)
        theta = rng.uniform(-math.pi, math.pi, param_count(spec))
        base = expectation(prepare_state(spec, theta), h)
        for k in rng.choice(param_count(spec), size=5, replace=False):
            shifted = theta.copy()
            shifted[k] += 2 * math.pi
            assert abs(expectation(prepare_state(spec, shifted), h) - base) <= 1e-10

    def test_norm(self, rng):
        spec = AnsatzSpec.two_local(4, 4)
        state = prepare_state(spec, rng.uniform(-math.pi, math.pi, param_count(spec)))
        assert abs(state.norm() - 1.0) <= 1e-10
