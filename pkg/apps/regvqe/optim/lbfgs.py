"""
制限メモリ BFGS (2 ループ再帰、強 Wolfe 直線探索、境界制約なし)
"""

import logging
from collections import deque

import numpy as np

from .base import OptimizerConfig, ScalarFn, StageDriver, StageResult, StopReason, VectorFn

logger = logging.getLogger(__name__)

# yᵀs がこれ以下の曲率ペアは捨てる
CURVATURE_EPS = 1e-10


def two_loop_direction(g: np.ndarray, pairs: deque) -> np.ndarray:
    """-H·g を 2 ループ再帰で求める。H0 = (sᵀy / yᵀy) I"""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(np.dot(s, q))
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= float(np.dot(s, y)) / float(np.dot(y, y))
    for (s, y, rho), a in zip(pairs, reversed(alphas), strict=True):
        b = rho * float(np.dot(y, q))
        q += (a - b) * s
    return -q


def minimize_lbfgs(f: ScalarFn, grad_f: VectorFn, theta0, cfg: OptimizerConfig, **kwargs) -> StageResult:
    """
    L-BFGS で f を最小化する

    停止条件と戻り値は CG と同じ。yᵀs ≤ 1e-10 の曲率ペアは記憶せず
    skipped_pairs に数える。直線探索に失敗したら記憶を消して最急降下方向で
    1 度だけ再開する。
    """
    driver = StageDriver(f, grad_f, theta0, cfg, **kwargs)
    pairs: deque = deque(maxlen=cfg.lbfgs_memory)

    def step() -> StopReason | None:
        if pairs:
            direction = two_loop_direction(driver.g, pairs)
            if float(np.dot(direction, driver.g)) >= 0.0:
                pairs.clear()
                direction = -driver.g
        else:
            direction = -driver.g
        # 曲率情報があれば単位ステップから、なければ |Δx| ~ 1 の目安から探索する
        found = driver.search(direction, use_previous=not pairs)

        if found is None:
            if driver.fallback_used:
                logger.debug(f"L-BFGS line search failed at iteration {driver.iterations}; stopping")
                return StopReason.LINE_SEARCH
            driver.fallback_used = True
            logger.debug(f"L-BFGS line search failed at iteration {driver.iterations}; clearing memory")
            pairs.clear()
            direction = -driver.g
            found = driver.search(direction, use_previous=False)
            if found is None:
                return StopReason.LINE_SEARCH

        alpha, f_new = found
        g_old = driver.accept(direction, alpha, f_new)
        s = alpha * direction
        y = driver.g - g_old
        ys = float(np.dot(y, s))
        if ys > CURVATURE_EPS:
            pairs.append((s, y, 1.0 / ys))
        else:
            driver.skipped_pairs += 1
            logger.debug(f"Skipped curvature pair at iteration {driver.iterations} (yᵀs={ys:.3e})")
        return None

    return driver.run(step)
