"""
最適化器の共通部品
設定・結果レコード・反復ごとの記録と最良点の追跡・直線探索の呼び出し
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import OrderedDict
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from scipy.optimize import line_search

from ..errors import BudgetExhaustedError, NonFiniteError

logger = logging.getLogger(__name__)

VectorFn = Callable[[np.ndarray], np.ndarray]
ScalarFn = Callable[[np.ndarray], float]


class OptimizerMethod(StrEnum):
    CG = "CG"
    LBFGS = "LBFGS"


class StopReason(StrEnum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    BUDGET = "budget"
    LINE_SEARCH = "line_search"
    NON_FINITE = "non_finite"


@dataclass(frozen=True)
class OptimizerConfig:
    """
    最適化器の設定

    wolfe_c2 を省略すると CG は 0.4、L-BFGS は 0.9。
    grad_tolerance は勾配の ∞ ノルムに対する停止判定。
    """

    method: OptimizerMethod = OptimizerMethod.CG
    max_iters: int = 15
    grad_tolerance: float = 1e-2
    lbfgs_memory: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", OptimizerMethod(self.method))
        if self.wolfe_c2 is None:
            object.__setattr__(self, "wolfe_c2", 0.4 if self.method == OptimizerMethod.CG else 0.9)
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be positive, got {self.max_iters}")
        if not self.grad_tolerance > 0:
            raise ValueError(f"grad_tolerance must be positive, got {self.grad_tolerance}")
        if self.lbfgs_memory < 1:
            raise ValueError(f"lbfgs_memory must be positive, got {self.lbfgs_memory}")
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ValueError(f"Wolfe constants must satisfy 0 < c1 < c2 < 1, got {self.wolfe_c1}, {self.wolfe_c2}")


@dataclass(frozen=True)
class TrajectoryPoint:
    iteration: int
    energy: float
    objective: float
    norm: float
    lam: float = 0.0


@dataclass
class StageResult:
    """1 ステージの結果。best_* は軌跡上でエネルギー最小の反復点"""

    best_theta: np.ndarray
    best_value: float
    iterations_used: int
    evals_used: int
    trajectory: list[TrajectoryPoint] = field(default_factory=list)
    stop_reason: StopReason = StopReason.MAX_ITERS
    skipped_pairs: int = 0

    @property
    def truncated(self) -> bool:
        return self.stop_reason == StopReason.BUDGET

    @property
    def failed(self) -> bool:
        return self.stop_reason == StopReason.NON_FINITE

    @property
    def final_norm(self) -> float:
        return float(np.linalg.norm(self.best_theta))


def check_gradient(f: ScalarFn, grad_f: VectorFn, theta: np.ndarray, step: float = 1e-6) -> float:
    """中心差分との最大絶対誤差"""
    theta = np.asarray(theta, dtype=float)
    analytic = np.asarray(grad_f(theta), dtype=float)
    numeric = np.empty_like(theta)
    for k in range(theta.size):
        shifted = theta.copy()
        shifted[k] = theta[k] + step
        forward = f(shifted)
        shifted[k] = theta[k] - step
        numeric[k] = (forward - f(shifted)) / (2.0 * step)
    return float(np.max(np.abs(analytic - numeric))) if theta.size else 0.0


class _Memo:
    """直近の評価点をキャッシュする関数ラッパ(同一点の再評価を避ける)"""

    def __init__(self, fn: Callable, size: int = 8):
        self.fn = fn
        self.size = size
        self.calls = 0
        self._cache: OrderedDict[bytes, object] = OrderedDict()

    def __call__(self, x: np.ndarray):
        key = np.asarray(x, dtype=float).tobytes()
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        self.calls += 1
        value = self.fn(np.array(x, dtype=float))
        self._cache[key] = value
        if len(self._cache) > self.size:
            self._cache.popitem(last=False)
        return value

    def clear(self) -> None:
        self._cache.clear()


class StageDriver:
    """
    反復ループの共通処理

    f・勾配・エネルギー関数の呼び出し、軌跡の記録、エネルギー最小点の追跡、
    予算切れと非有限値の扱いをまとめる。方向の更新は各最適化器が持つ。
    """

    def __init__(
        self,
        f: ScalarFn,
        grad_f: VectorFn,
        theta0,
        cfg: OptimizerConfig,
        *,
        energy_fn: ScalarFn | None = None,
        on_iteration: Callable[[int], bool] | None = None,
        eval_count: Callable[[], int] | None = None,
        lambda_fn: Callable[[], float] | None = None,
        debug: bool = False,
    ):
        self.cfg = cfg
        self.f = _Memo(f)
        self.grad_f = _Memo(grad_f)
        self.energy_fn = self.f if energy_fn is None else energy_fn
        self.on_iteration = on_iteration
        self._eval_count = eval_count
        self._lambda_fn = lambda_fn
        self.debug = debug

        self.x = np.array(theta0, dtype=float).reshape(-1)
        self.fx = math.nan
        self.g = np.zeros_like(self.x)
        self.old_fx: float | None = None
        self.iterations = 0
        self.trajectory: list[TrajectoryPoint] = []
        self.best_theta = self.x.copy()
        self.best_value = math.inf
        self.skipped_pairs = 0
        self.fallback_used = False

    # --- 評価 ---

    def evaluate(self) -> None:
        """現在点で f と勾配を評価する"""
        self.fx = float(self.f(self.x))
        self.g = np.asarray(self.grad_f(self.x), dtype=float)
        if not math.isfinite(self.fx) or not np.all(np.isfinite(self.g)):
            raise NonFiniteError(f"non-finite objective or gradient at iteration {self.iterations}")

    def record(self) -> None:
        energy = float(self.energy_fn(self.x))
        lam = self._lambda_fn() if self._lambda_fn is not None else 0.0
        self.trajectory.append(
            TrajectoryPoint(self.iterations, energy, self.fx, float(np.linalg.norm(self.x)), lam)
        )
        if energy < self.best_value:
            self.best_value = energy
            self.best_theta = self.x.copy()

    def start_iteration(self, t: int) -> None:
        """反復開始時のフック(目的関数が変わったら現在点を再評価)"""
        if self.on_iteration is not None and self.on_iteration(t):
            self.f.clear()
            self.grad_f.clear()
            self.evaluate()
            self.reset_step_guess()

    def reset_step_guess(self) -> None:
        """初回ステップ長の目安を |Δx| ~ 1 にする"""
        self.old_fx = self.fx + float(np.linalg.norm(self.g)) / 2

    def converged(self) -> bool:
        return float(np.max(np.abs(self.g))) <= self.cfg.grad_tolerance if self.g.size else True

    # --- 直線探索 ---

    def search(self, direction: np.ndarray, use_previous: bool = True):
        """
        強 Wolfe 条件の直線探索(3 次補間)

        戻り値は (alpha, f_new)。反復上限までに条件を満たす点が見つからなければ None。
        """
        old_old = self.old_fx if use_previous else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            alpha, _, _, f_new, _, slope = line_search(
                self.f,
                self.grad_f,
                self.x,
                direction,
                gfk=self.g,
                old_fval=self.fx,
                old_old_fval=old_old,
                c1=self.cfg.wolfe_c1,
                c2=self.cfg.wolfe_c2,
            )
        if alpha is None or slope is None or f_new is None or not math.isfinite(f_new):
            return None
        return float(alpha), float(f_new)

    def accept(self, direction: np.ndarray, alpha: float, f_new: float) -> np.ndarray:
        """ステップを受理して新しい勾配を返す"""
        x_new = self.x + alpha * direction
        g_new = np.asarray(self.grad_f(x_new), dtype=float)
        if not np.all(np.isfinite(g_new)):
            raise NonFiniteError(f"non-finite gradient at iteration {self.iterations + 1}")
        if self.debug:
            slope0 = float(np.dot(self.g, direction))
            slope1 = float(np.dot(g_new, direction))
            tol = 1e-12 * max(1.0, abs(self.fx))
            assert f_new <= self.fx + self.cfg.wolfe_c1 * alpha * slope0 + tol, "sufficient decrease violated"
            assert abs(slope1) <= self.cfg.wolfe_c2 * abs(slope0) + tol, "curvature condition violated"
        self.old_fx = self.fx
        self.x = x_new
        self.fx = f_new
        g_old = self.g
        self.g = g_new
        self.iterations += 1
        return g_old

    def evals_used(self) -> int:
        if self._eval_count is not None:
            return self._eval_count()
        return self.f.calls + self.grad_f.calls

    def debug_check(self) -> None:
        if not self.debug:
            return
        deviation = check_gradient(self.f.fn, self.grad_f.fn, self.x)
        scale = 1.0 + float(np.max(np.abs(self.g))) if self.g.size else 1.0
        assert deviation <= 1e-4 * scale, f"gradient check failed: max deviation {deviation:.3e}"

    def result(self, reason: StopReason) -> StageResult:
        if not self.trajectory:
            # 初期点の評価にも失敗した
            return StageResult(self.x.copy(), math.nan, 0, self.evals_used(), [], reason, self.skipped_pairs)
        return StageResult(
            best_theta=self.best_theta,
            best_value=self.best_value,
            iterations_used=self.iterations,
            evals_used=self.evals_used(),
            trajectory=self.trajectory,
            stop_reason=reason,
            skipped_pairs=self.skipped_pairs,
        )

    def run(self, step: Callable[[], StopReason | None]) -> StageResult:
        """
        共通の反復ループ

        step() は 1 反復を実行し、停止すべきときは理由を返す。
        """
        try:
            if self.on_iteration is not None:
                self.on_iteration(0)
            self.evaluate()
            self.debug_check()
            self.record()
            self.reset_step_guess()
            while self.iterations < self.cfg.max_iters:
                if self.iterations > 0:
                    self.start_iteration(self.iterations)
                if self.converged():
                    return self.result(StopReason.CONVERGED)
                reason = step()
                if reason is not None:
                    return self.result(reason)
                self.record()
            return self.result(StopReason.CONVERGED if self.converged() else StopReason.MAX_ITERS)
        except BudgetExhaustedError:
            logger.debug(f"Evaluation budget exhausted after {self.iterations} iterations")
            return self.result(StopReason.BUDGET)
        except NonFiniteError as e:
            logger.warning(f"Run aborted: {e}")
            return self.result(StopReason.NON_FINITE)
