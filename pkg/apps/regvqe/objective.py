"""
目的関数
エネルギー E(θ)、正則化目的関数 Ẽ(θ) = E(θ) + λ‖θ‖²、
コサイン減衰スケジュール λ(t)、パラメータシフト勾配と差分勾配
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from .core.ansatz import AnsatzSpec, as_parameter_vector, build_circuit, param_count, prepare_state
from .core.pauli import WeightedPauliSum
from .core.statevector import GateKind, expectation
from .errors import BudgetExhaustedError, GateError, NonFiniteError

logger = logging.getLogger(__name__)

SHIFT = math.pi / 2


class ScheduleKind(StrEnum):
    COSINE = "cosine"
    CONSTANT = "constant"
    OFF = "off"


class GradientMethod(StrEnum):
    PARAMETER_SHIFT = "parameter_shift"
    FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class Schedule:
    """Stage A の λ(t): λ0 から 0 まで t_a 反復で減衰"""

    lambda0: float
    t_a: int
    kind: ScheduleKind = ScheduleKind.COSINE

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not (self.lambda0 >= 0 and math.isfinite(self.lambda0)):
            raise ValueError(f"lambda0 must be a finite non-negative number, got {self.lambda0}")
        if self.t_a < 1:
            raise ValueError(f"t_a must be positive, got {self.t_a}")


def lambda_at(sched: Schedule, t: int) -> float:
    """λ(t) = (λ0/2)[1 + cos(πt/T_A)]、t > T_A では 0"""
    if t < 0:
        raise ValueError(f"iteration index must be non-negative, got {t}")
    if sched.kind == ScheduleKind.OFF or t > sched.t_a:
        return 0.0
    if sched.kind == ScheduleKind.CONSTANT:
        return sched.lambda0
    value = 0.5 * sched.lambda0 * (1.0 + math.cos(math.pi * t / sched.t_a))
    return min(sched.lambda0, max(0.0, value))


def central_difference(f: Callable[[np.ndarray], float], theta: np.ndarray, step: float) -> np.ndarray:
    """中心差分 [f(θ + h e_k) − f(θ − h e_k)] / 2h"""
    if step <= 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for k in range(theta.size):
        shifted = theta.copy()
        shifted[k] = theta[k] + step
        forward = f(shifted)
        shifted[k] = theta[k] - step
        backward = f(shifted)
        grad[k] = (forward - backward) / (2.0 * step)
    return grad


class Objective:
    """
    1 回の最適化実行が専有する目的関数

    eval_counter はエネルギー評価のたびに 1 増える。eval_limit に達すると
    BudgetExhaustedError を送出する。energy_fn を渡すと回路シミュレーションの
    代わりにその関数をエネルギーとして使う(検証用のスタブ)。
    """

    def __init__(
        self,
        hamiltonian: WeightedPauliSum | None,
        spec: AnsatzSpec | None,
        lambda_current: float = 0.0,
        *,
        gradient_method: GradientMethod = GradientMethod.PARAMETER_SHIFT,
        fd_step: float = 1e-5,
        eval_limit: int | None = None,
        energy_fn: Callable[[np.ndarray], float] | None = None,
    ):
        if energy_fn is None and (hamiltonian is None or spec is None):
            raise ValueError("either a Hamiltonian with an ansatz or an energy_fn is required")
        if hamiltonian is not None and spec is not None and hamiltonian.n_qubits != spec.n_qubits:
            raise GateError(f"ansatz acts on {spec.n_qubits} qubits, Hamiltonian on {hamiltonian.n_qubits}")
        self.hamiltonian = hamiltonian
        self.spec = spec
        self.gradient_method = GradientMethod(gradient_method)
        self.fd_step = fd_step
        self.eval_limit = eval_limit
        self.eval_counter = 0
        self._energy_fn = energy_fn
        self._lambda = 0.0
        self.lambda_current = lambda_current

        if spec is not None and self.gradient_method == GradientMethod.PARAMETER_SHIFT:
            for gate in build_circuit(spec, np.zeros(param_count(spec))):
                if gate.param_index is not None and gate.kind not in (GateKind.RY, GateKind.RZ):
                    raise GateError(f"parameter-shift rule does not support {gate.kind}")

    @property
    def lambda_current(self) -> float:
        return self._lambda

    @lambda_current.setter
    def lambda_current(self, value: float) -> None:
        if not (value >= 0 and math.isfinite(value)):
            raise ValueError(f"lambda must be a finite non-negative number, got {value}")
        self._lambda = float(value)

    def _check_theta(self, theta) -> np.ndarray:
        if self.spec is not None:
            return as_parameter_vector(self.spec, theta)
        return np.asarray(theta, dtype=float).reshape(-1)

    def energy(self, theta) -> float:
        """E(θ) = ⟨ψ(θ)|H|ψ(θ)⟩"""
        theta = self._check_theta(theta)
        if self.eval_limit is not None and self.eval_counter >= self.eval_limit:
            raise BudgetExhaustedError(f"evaluation budget of {self.eval_limit} exhausted")
        self.eval_counter += 1
        if self._energy_fn is not None:
            value = float(self._energy_fn(theta))
        else:
            value = expectation(prepare_state(self.spec, theta), self.hamiltonian)
        if not math.isfinite(value):
            raise NonFiniteError(f"energy evaluated to {value}")
        return value

    def penalty(self, theta) -> float:
        """λ‖θ‖²"""
        theta = np.asarray(theta, dtype=float)
        return self._lambda * float(np.dot(theta, theta))

    def regularized_objective(self, theta) -> float:
        """Ẽ(θ) = E(θ) + λ‖θ‖²"""
        return self.energy(theta) + self.penalty(theta)

    def parameter_shift_gradient(self, theta) -> np.ndarray:
        """∂E/∂θ_k = [E(θ + π/2 e_k) − E(θ − π/2 e_k)] / 2 (2P 回評価)"""
        theta = self._check_theta(theta)
        grad = np.empty_like(theta)
        for k in range(theta.size):
            shifted = theta.copy()
            shifted[k] = theta[k] + SHIFT
            forward = self.energy(shifted)
            shifted[k] = theta[k] - SHIFT
            backward = self.energy(shifted)
            grad[k] = 0.5 * (forward - backward)
        return grad

    def finite_difference_gradient(self, theta, step: float | None = None) -> np.ndarray:
        return central_difference(self.energy, self._check_theta(theta), self.fd_step if step is None else step)

    def energy_gradient(self, theta) -> np.ndarray:
        if self.gradient_method == GradientMethod.FINITE_DIFFERENCE:
            return self.finite_difference_gradient(theta)
        return self.parameter_shift_gradient(theta)

    def penalty_gradient(self, theta) -> np.ndarray:
        """∇(λ‖θ‖²) = 2λθ"""
        return 2.0 * self._lambda * np.asarray(theta, dtype=float)

    def gradient(self, theta) -> np.ndarray:
        """∇Ẽ(θ) = ∇E(θ) + 2λθ"""
        grad = self.energy_gradient(theta) + self.penalty_gradient(theta)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError("gradient contains non-finite values")
        return grad
