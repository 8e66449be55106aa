import math
from collections import deque

import numpy as np
import pytest
from scipy.optimize import rosen, rosen_der

from apps.regvqe.core.ansatz import AnsatzSpec
from apps.regvqe.errors import BudgetExhaustedError
from apps.regvqe.objective import Objective
from apps.regvqe.optim.base import OptimizerConfig, OptimizerMethod, StopReason, check_gradient
from apps.regvqe.optim.cg import minimize_cg
from apps.regvqe.optim.lbfgs import minimize_lbfgs, two_loop_direction

MINIMIZERS = [(minimize_cg, OptimizerMethod.CG), (minimize_lbfgs, OptimizerMethod.LBFGS)]


def _bowl(theta):
    return float(np.dot(theta, theta))


def _bowl_grad(theta):
    return 2.0 * np.asarray(theta, dtype=float)


class TestConfig:
    def test_wolfe_defaults(self):
        assert OptimizerConfig(OptimizerMethod.CG).wolfe_c2 == 0.4
        assert OptimizerConfig(OptimizerMethod.LBFGS).wolfe_c2 == 0.9

    @pytest.mark.parametrize(
        "kwargs",
        [{"max_iters": 0}, {"grad_tolerance": 0.0}, {"lbfgs_memory": 0}, {"wolfe_c1": 0.5, "wolfe_c2": 0.4}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            OptimizerConfig(**kwargs)


class TestCG:
    def test_quadratic_bowl(self):
        result = minimize_cg(_bowl, _bowl_grad, [3.0, 4.0], OptimizerConfig(max_iters=5, grad_tolerance=1e-8))
        np.testing.assert_allclose(result.best_theta, [0.0, 0.0], atol=1e-6)
        assert result.iterations_used <= 5

    def test_rosenbrock_2d(self):
        cfg = OptimizerConfig(OptimizerMethod.CG, max_iters=200, grad_tolerance=1e-8)
        result = minimize_cg(rosen, rosen_der, [-1.2, 1.0], cfg)
        assert result.best_value < 1e-4

    def test_returns_best_iterate(self):
        result = minimize_cg(rosen, rosen_der, [-1.2, 1.0], OptimizerConfig(max_iters=30, grad_tolerance=1e-8))
        assert result.best_value == min(p.energy for p in result.trajectory)
        assert rosen(result.best_theta) == result.best_value

    def test_stops_on_gradient_tolerance(self):
        result = minimize_cg(_bowl, _bowl_grad, [1e-4, 0.0], OptimizerConfig(grad_tolerance=1e-2))
        assert result.stop_reason == StopReason.CONVERGED
        assert result.iterations_used == 0
        assert len(result.trajectory) == 1

    def test_non_finite_objective_aborts(self):
        obj = Objective(None, None, energy_fn=lambda theta: math.nan if theta[0] < 0.5 else float(theta[0]))
        result = minimize_cg(obj.energy, lambda theta: np.ones(1), [1.0], OptimizerConfig())
        assert result.stop_reason == StopReason.NON_FINITE
        assert result.failed

    def test_budget_exhaustion_truncates(self):
        calls = {"n": 0}

        def f(theta):
            calls["n"] += 1
            if calls["n"] > 3:
                raise BudgetExhaustedError("limit")
            return rosen(theta)

        result = minimize_cg(f, rosen_der, [-1.2, 1.0], OptimizerConfig(max_iters=50, grad_tolerance=1e-8))
        assert result.truncated
        assert result.trajectory

    def test_debug_mode_checks_gradient(self):
        cfg = OptimizerConfig(max_iters=5, grad_tolerance=1e-8)
        with pytest.raises(AssertionError, match="gradient check"):
            minimize_cg(_bowl, lambda theta: 3.0 * np.asarray(theta), [3.0, 4.0], cfg, debug=True)
        result = minimize_cg(_bowl, _bowl_grad, [3.0, 4.0], cfg, debug=True)
        assert result.best_value < 1e-10


class TestLBFGS:
    def test_shifted_bowl(self, rng):
        c = np.array([1.0, -2.0, 0.5])

        def f(theta):
            return float(np.sum((theta - c) ** 2))

        def grad(theta):
            return 2.0 * (theta - c)

        cfg = OptimizerConfig(OptimizerMethod.LBFGS, max_iters=3, grad_tolerance=1e-10)
        result = minimize_lbfgs(f, grad, rng.uniform(-5, 5, 3), cfg)
        np.testing.assert_allclose(result.best_theta, c, atol=1e-8)

    def test_rosenbrock_10d(self):
        cfg = OptimizerConfig(OptimizerMethod.LBFGS, max_iters=300, grad_tolerance=1e-8)
        result = minimize_lbfgs(rosen, rosen_der, np.zeros(10), cfg)
        assert result.best_value < 1e-6

    def test_two_loop_without_memory_is_steepest_descent(self):
        g = np.array([1.0, -2.0])
        np.testing.assert_array_equal(two_loop_direction(g, deque()), -g)

    def test_two_loop_recovers_quadratic_inverse_hessian(self):
        hessian = np.diag([2.0, 8.0])
        pairs = deque(maxlen=10)
        for s in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
            y = hessian @ s
            pairs.append((s, y, 1.0 / float(y @ s)))
        g = np.array([4.0, 4.0])
        np.testing.assert_allclose(two_loop_direction(g, pairs), -np.linalg.solve(hessian, g), atol=1e-12)

    def test_skipped_pairs_are_counted(self):
        # 原点近くの浅い放物線では単位ステップで yᵀs ≈ 1e-11
        cfg = OptimizerConfig(OptimizerMethod.LBFGS, max_iters=2, grad_tolerance=1e-20)
        result = minimize_lbfgs(lambda x: 0.25 * float(x[0] ** 2), lambda x: 0.5 * np.asarray(x), [1e-5], cfg)
        assert result.iterations_used >= 1
        assert result.skipped_pairs == result.iterations_used


@pytest.mark.parametrize(("minimize", "method"), MINIMIZERS)
def test_cosine_landscape(minimize, method, z1):
    obj = Objective(z1, AnsatzSpec.ry_layer(1))
    cfg = OptimizerConfig(method, max_iters=50, grad_tolerance=1e-8)
    result = minimize(obj.energy, obj.gradient, [0.1], cfg)
    assert abs(result.best_value + 1.0) <= 1e-6


@pytest.mark.parametrize(("minimize", "method"), MINIMIZERS)
def test_deterministic(minimize, method):
    cfg = OptimizerConfig(method, max_iters=20, grad_tolerance=1e-8)
    a = minimize(rosen, rosen_der, [-1.2, 1.0, 0.3], cfg)
    b = minimize(rosen, rosen_der, [-1.2, 1.0, 0.3], cfg)
    assert a.trajectory == b.trajectory
    np.testing.assert_array_equal(a.best_theta, b.best_theta)


@pytest.mark.parametrize(("minimize", "method"), MINIMIZERS)
def test_best_so_far_is_monotone(minimize, method):
    result = minimize(rosen, rosen_der, [-1.2, 1.0], OptimizerConfig(method, max_iters=40, grad_tolerance=1e-8))
    running = np.minimum.accumulate([p.energy for p in result.trajectory])
    assert np.all(np.diff(running) <= 0)
    assert running[-1] == result.best_value


@pytest.mark.parametrize(("minimize", "method"), MINIMIZERS)
def test_debug_wolfe_assertions_hold(minimize, method):
    cfg = OptimizerConfig(method, max_iters=30, grad_tolerance=1e-8)
    result = minimize(rosen, rosen_der, [-1.2, 1.0], cfg, debug=True)
    assert result.best_value < rosen(np.array([-1.2, 1.0]))


def test_check_gradient():
    assert check_gradient(_bowl, _bowl_grad, np.array([0.3, -0.7])) <= 1e-8
    assert check_gradient(_bowl, lambda x: np.zeros(2), np.array([0.3, -0.7])) > 0.5
