"""
初期パラメータ θ0 の生成
(seed_base, λ キー, シード番号) をキーにしたカウンタ型乱数 (Philox) で引く
"""

import math
from enum import StrEnum

import numpy as np

from ..core.ansatz import AnsatzSpec, param_count


class InitDistribution(StrEnum):
    UNIFORM_SYMMETRIC_PI = "UniformSymmetricPi"  # [-π, π)
    UNIFORM_0_TO_2PI = "Uniform0To2Pi"  # [0, 2π)


def initial_theta(
    spec: AnsatzSpec,
    seed: int,
    dist: InitDistribution = InitDistribution.UNIFORM_SYMMETRIC_PI,
    *,
    seed_base: int = 0,
    lambda_key: int = 0,
) -> np.ndarray:
    """
    P 個の角度を独立に一様分布から引く

    スケジューリングに依存しないよう乱数は引数だけで決まる。
    λ 間で θ0 を共有する(対応のある比較)場合は lambda_key=0 のまま呼ぶ。
    """
    if seed < 0 or seed_base < 0 or lambda_key < 0:
        raise ValueError(f"seed keys must be non-negative, got {(seed_base, lambda_key, seed)}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed_base, lambda_key, seed])))
    p = param_count(spec)
    if InitDistribution(dist) == InitDistribution.UNIFORM_0_TO_2PI:
        return rng.uniform(0.0, 2.0 * math.pi, p)
    return rng.uniform(-math.pi, math.pi, p)
