import math

import numpy as np
import pytest
from conftest import H2_GROUND_ENERGY, dense_matrix, random_amplitudes, random_pauli_sum

from apps.regvqe.core.pauli import RfimSpec, WeightedPauliSum, generate_rfim, hamiltonian_hash, load_bundled
from apps.regvqe.core.statevector import (
    Gate,
    StateVector,
    _dense_minimum,
    _diagonal_minimum,
    _lanczos_minimum,
    apply_gate,
    apply_hamiltonian,
    cached_ground_energy,
    exact_ground_energy,
    expectation,
    run_circuit,
)
from apps.regvqe.errors import GateError, GroundEnergyError, QubitMismatchError


def _random_gate(rng, n):
    kind = rng.integers(3)
    if kind == 2 and n > 1:
        control, target = rng.choice(n, size=2, replace=False)
        return Gate.cx(int(control), int(target))
    q = int(rng.integers(n))
    angle = float(rng.uniform(-math.pi, math.pi))
    return Gate.ry(q, angle) if kind == 0 else Gate.rz(q, angle)


class TestGates:
    def test_ry_pi_flips_zero(self):
        state = apply_gate(StateVector.zero(1), Gate.ry(0, math.pi))
        np.testing.assert_allclose(state.amplitudes, [0.0, 1.0], atol=1e-15)

    def test_rz_changes_only_phase(self):
        state = apply_gate(StateVector.zero(1), Gate.rz(0, 0.7))
        np.testing.assert_allclose(state.probabilities(), [1.0, 0.0])
        assert state.amplitudes[0] == pytest.approx(complex(math.cos(0.35), -math.sin(0.35)))

    def test_qubit_zero_is_least_significant_bit(self):
        state = apply_gate(StateVector.zero(3), Gate.ry(0, math.pi))
        assert np.argmax(state.probabilities()) == 0b001

    def test_cx_control_on_low_qubit(self):
        state = run_circuit([Gate.ry(0, math.pi), Gate.cx(0, 1)], 2)
        assert np.argmax(state.probabilities()) == 0b11

    def test_cx_control_on_high_qubit(self):
        state = run_circuit([Gate.ry(1, math.pi), Gate.cx(1, 0)], 2)
        assert np.argmax(state.probabilities()) == 0b11

    def test_cx_idle_when_control_is_zero(self):
        state = run_circuit([Gate.ry(1, math.pi), Gate.cx(0, 1)], 2)
        assert np.argmax(state.probabilities()) == 0b10

    def test_cx_on_distant_qubits_matches_dense(self, rng):
        amps = random_amplitudes(rng, 4)
        state = apply_gate(StateVector(amps.copy()), Gate.cx(3, 1))
        expected = amps.copy()
        for b in range(16):
            if b >> 3 & 1:
                expected[b] = amps[b ^ 0b0010]
        np.testing.assert_allclose(state.amplitudes, expected, atol=1e-15)

    def test_out_of_range(self):
        with pytest.raises(GateError):
            apply_gate(StateVector.zero(2), Gate.ry(2, 0.1))

    def test_invalid_cx(self):
        with pytest.raises(GateError):
            Gate.cx(1, 1)

    def test_norm_is_preserved(self, rng):
        state = StateVector.zero(5)
        for _ in range(1000):
            before = state.norm()
            apply_gate(state, _random_gate(rng, 5))
            assert abs(state.norm() - before) <= 1e-12
        assert abs(state.norm() - 1.0) <= 1e-10

    def test_amplitude_count_must_be_power_of_two(self):
        with pytest.raises(QubitMismatchError):
            StateVector(np.ones(3))


class TestExpectation:
    def test_z_eigenstate(self, z1):
        assert expectation(StateVector.zero(1), z1) == 1.0

    def test_equator_state(self, z1):
        state = apply_gate(StateVector.zero(1), Gate.ry(0, math.pi / 2))
        assert abs(expectation(state, z1)) <= 1e-12

    def test_matches_dense_oracle(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 7))
            h = random_pauli_sum(rng, n, int(rng.integers(1, 8)))
            amps = random_amplitudes(rng, n)
            oracle = float(np.real(np.vdot(amps, dense_matrix(h) @ amps)))
            assert abs(expectation(StateVector(amps), h) - oracle) <= 1e-10

    def test_linear_in_hamiltonian(self, rng):
        h1 = random_pauli_sum(rng, 3, 5)
        h2 = random_pauli_sum(rng, 3, 5)
        a, b = 0.7, -1.3
        combined = WeightedPauliSum(
            tuple((a * c, p) for c, p in h1.terms) + tuple((b * c, p) for c, p in h2.terms), 3
        )
        state = StateVector(random_amplitudes(rng, 3))
        expected = a * expectation(state, h1) + b * expectation(state, h2)
        assert abs(expectation(state, combined) - expected) <= 1e-10

    def test_variational_bound(self, rng):
        h = random_pauli_sum(rng, 4, 8)
        ground = exact_ground_energy(h)
        for _ in range(50):
            assert expectation(StateVector(random_amplitudes(rng, 4)), h) >= ground - 1e-9

    def test_qubit_mismatch(self, z1):
        with pytest.raises(QubitMismatchError):
            expectation(StateVector.zero(2), z1)

    def test_apply_hamiltonian_matches_dense(self, rng):
        h = random_pauli_sum(rng, 4, 10)
        v = random_amplitudes(rng, 4)
        np.testing.assert_allclose(apply_hamiltonian(h, v), dense_matrix(h) @ v, atol=1e-12)

    def test_run_circuit_starts_from_zero_state(self):
        state = run_circuit([Gate.ry(1, math.pi)], 2)
        assert np.argmax(state.probabilities()) == 0b10


class TestGroundEnergy:
    def test_single_z(self, z1):
        assert exact_ground_energy(z1) == -1.0

    def test_degenerate_zz(self):
        assert exact_ground_energy(WeightedPauliSum.from_pairs([(-1.0, "ZZ")])) == -1.0

    def test_bundled_h2_ground_energy(self):
        h = load_bundled("h2")
        oracle = float(np.linalg.eigvalsh(dense_matrix(h))[0])
        assert abs(exact_ground_energy(h) - oracle) <= 1e-10
        assert abs(exact_ground_energy(h) - H2_GROUND_ENERGY) <= 1e-9

    def test_diagonal_and_dense_paths_agree(self, rng):
        for n in (2, 5, 8):
            h = generate_rfim(RfimSpec(n_qubits=n, rng_seed=int(rng.integers(1000))))
            assert abs(_diagonal_minimum(h) - _dense_minimum(h)) <= 1e-10

    def test_lanczos_matches_dense(self, rng):
        h = random_pauli_sum(rng, 6, 12)
        assert abs(_lanczos_minimum(h, 20_000) - _dense_minimum(h)) <= 1e-8

    def test_too_many_qubits(self):
        with pytest.raises(GroundEnergyError):
            exact_ground_energy(WeightedPauliSum.from_pairs([(1.0, "X" * 17)]))

    def test_rfim_twelve_qubits_uses_diagonal_path(self):
        h = generate_rfim(RfimSpec())
        assert exact_ground_energy(h) == _diagonal_minimum(h)

    def test_cache_round_trip(self, tmp_path, z1):
        assert cached_ground_energy(z1, tmp_path) == -1.0
        path = tmp_path / f"{hamiltonian_hash(z1)}.gse"
        assert path.read_text(encoding="utf-8").strip() == "-1"
        path.write_text("-3.5\n", encoding="utf-8")
        assert cached_ground_energy(z1, tmp_path) == -3.5

    def test_corrupt_cache_is_recomputed(self, tmp_path, z1):
        (tmp_path / f"{hamiltonian_hash(z1)}.gse").write_text("garbage", encoding="utf-8")
        assert cached_ground_energy(z1, tmp_path) == -1.0
