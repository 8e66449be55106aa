"""
非線形共役勾配法 (Polak–Ribière+、強 Wolfe 直線探索)
"""

import logging

import numpy as np

from .base import OptimizerConfig, ScalarFn, StageDriver, StageResult, StopReason, VectorFn

logger = logging.getLogger(__name__)

# 十分降下条件 p·g ≤ -σ g·g
SIGMA_DESCENT = 0.01


def minimize_cg(f: ScalarFn, grad_f: VectorFn, theta0, cfg: OptimizerConfig, **kwargs) -> StageResult:
    """
    PR+ 共役勾配法で f を最小化する

    ‖∇f‖_∞ ≤ grad_tolerance、max_iters 到達、評価予算切れのいずれかで停止し、
    軌跡上でエネルギー最小の点を返す。直線探索に失敗した場合は最急降下方向で
    1 度だけ再開し、再度失敗したら停止する。
    """
    driver = StageDriver(f, grad_f, theta0, cfg, **kwargs)
    state = {"direction": None}

    def step() -> StopReason | None:
        direction = state["direction"]
        if direction is None or float(np.dot(direction, driver.g)) >= 0.0:
            direction = -driver.g

        found = driver.search(direction)
        if found is None:
            if driver.fallback_used:
                logger.debug(f"CG line search failed at iteration {driver.iterations}; stopping")
                return StopReason.LINE_SEARCH
            driver.fallback_used = True
            logger.debug(f"CG line search failed at iteration {driver.iterations}; restarting along -g")
            direction = -driver.g
            found = driver.search(direction, use_previous=False)
            if found is None:
                return StopReason.LINE_SEARCH

        alpha, f_new = found
        g_old = driver.accept(direction, alpha, f_new)
        g_new = driver.g

        beta = max(0.0, float(np.dot(g_new - g_old, g_new)) / float(np.dot(g_old, g_old)))
        next_direction = -g_new + beta * direction
        if float(np.dot(next_direction, g_new)) > -SIGMA_DESCENT * float(np.dot(g_new, g_new)):
            next_direction = -g_new
        state["direction"] = next_direction
        return None

    return driver.run(step)
