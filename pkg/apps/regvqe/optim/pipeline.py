"""
2 段階最適化パイプライン
Stage A: コサイン減衰の λ(t) で正則化した Ẽ を最小化
Stage B: Stage A のエネルギー最小点から λ=0 で E を最小化
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, replace

import numpy as np

from ..objective import Objective, Schedule, lambda_at
from .base import OptimizerConfig, OptimizerMethod, StageResult, StopReason
from .cg import minimize_cg
from .lbfgs import minimize_lbfgs

logger = logging.getLogger(__name__)

MINIMIZERS = {
    OptimizerMethod.CG: minimize_cg,
    OptimizerMethod.LBFGS: minimize_lbfgs,
}


@dataclass(frozen=True)
class PipelineConfig:
    """Stage A/B の最適化設定・λ スケジュール・評価予算"""

    stage_a: OptimizerConfig
    stage_b: OptimizerConfig
    schedule: Schedule
    eval_budget: int = 10_000

    def __post_init__(self):
        if self.schedule.t_a != self.stage_a.max_iters:
            raise ValueError(
                f"schedule horizon t_a={self.schedule.t_a} must equal Stage A max_iters={self.stage_a.max_iters}"
            )
        if self.eval_budget < 1:
            raise ValueError(f"eval_budget must be positive, got {self.eval_budget}")

    @property
    def stage_a_budget(self) -> int:
        """⌊budget·a/(a+b)⌋。Stage B は残り全部を使える"""
        a, b = self.stage_a.max_iters, self.stage_b.max_iters
        return self.eval_budget * a // (a + b)


class _MemoizedObjective:
    """
    θ ごとに E と ∇E を覚えておく

    λ が変わっても E・∇E は再計算せずに Ẽ と ∇Ẽ を組み立て直せる。
    軌跡に記録するエネルギーも追加の評価なしで得られる。
    """

    def __init__(self, obj: Objective, size: int = 32):
        self.obj = obj
        self.size = size
        self._energy: OrderedDict[bytes, float] = OrderedDict()
        self._grad: OrderedDict[bytes, np.ndarray] = OrderedDict()

    def _lookup(self, cache: OrderedDict, theta: np.ndarray, compute):
        key = np.asarray(theta, dtype=float).tobytes()
        if key in cache:
            cache.move_to_end(key)
            return cache[key]
        value = compute(theta)
        cache[key] = value
        if len(cache) > self.size:
            cache.popitem(last=False)
        return value

    def energy(self, theta: np.ndarray) -> float:
        return self._lookup(self._energy, theta, self.obj.energy)

    def energy_gradient(self, theta: np.ndarray) -> np.ndarray:
        return self._lookup(self._grad, theta, self.obj.energy_gradient)

    def objective(self, theta: np.ndarray) -> float:
        return self.energy(theta) + self.obj.penalty(theta)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return self.energy_gradient(theta) + self.obj.penalty_gradient(theta)


def _run_stage(
    cfg: OptimizerConfig,
    memo: _MemoizedObjective,
    theta0: np.ndarray,
    limit: int,
    *,
    on_iteration=None,
    debug: bool = False,
) -> StageResult:
    obj = memo.obj
    start = obj.eval_counter
    obj.eval_limit = start + limit
    try:
        return MINIMIZERS[cfg.method](
            memo.objective,
            memo.gradient,
            theta0,
            cfg,
            energy_fn=memo.energy,
            on_iteration=on_iteration,
            eval_count=lambda: obj.eval_counter - start,
            lambda_fn=lambda: obj.lambda_current,
            debug=debug,
        )
    finally:
        obj.eval_limit = None


def run_two_stage(
    pipeline: PipelineConfig, obj: Objective, theta0, *, debug: bool = False
) -> tuple[StageResult, StageResult]:
    """
    Stage A → Stage B を実行して両方の結果を返す

    Stage A は各反復の開始時に λ(t) を読み直す。2 ステージ合計の評価回数は
    eval_budget を超えない。
    """
    memo = _MemoizedObjective(obj)
    theta0 = np.array(theta0, dtype=float).reshape(-1)

    def on_iteration(t: int) -> bool:
        lam = lambda_at(pipeline.schedule, t)
        changed = lam != obj.lambda_current
        obj.lambda_current = lam
        return changed

    result_a = _run_stage(
        pipeline.stage_a, memo, theta0, pipeline.stage_a_budget, on_iteration=on_iteration, debug=debug
    )
    logger.debug(
        f"Stage A: {result_a.iterations_used} iterations, {result_a.evals_used} evals, "
        f"stop={result_a.stop_reason}, best E={result_a.best_value:.10g}"
    )

    obj.lambda_current = 0.0
    if result_a.failed or not math.isfinite(result_a.best_value):
        reason = StopReason.NON_FINITE if result_a.failed else StopReason.BUDGET
        return result_a, StageResult(result_a.best_theta.copy(), math.nan, 0, 0, [], reason)

    remaining = pipeline.eval_budget - result_a.evals_used
    result_b = _run_stage(pipeline.stage_b, memo, result_a.best_theta, remaining, debug=debug)
    if not result_b.trajectory and result_b.truncated:
        # 初期点を評価する予算すら残っていない
        result_b = replace(result_b, best_theta=result_a.best_theta.copy(), best_value=result_a.best_value)
    logger.debug(
        f"Stage B: {result_b.iterations_used} iterations, {result_b.evals_used} evals, "
        f"stop={result_b.stop_reason}, best E={result_b.best_value:.10g}"
    )
    return result_a, result_b
