"""
最適化器(CG・L-BFGS)と 2 段階パイプライン
"""

from .base import OptimizerConfig, OptimizerMethod, StageResult, StopReason, TrajectoryPoint, check_gradient
from .cg import minimize_cg
from .lbfgs import minimize_lbfgs
from .pipeline import PipelineConfig, run_two_stage

__all__ = [
    "OptimizerConfig",
    "OptimizerMethod",
    "PipelineConfig",
    "StageResult",
    "StopReason",
    "TrajectoryPoint",
    "check_gradient",
    "minimize_cg",
    "minimize_lbfgs",
    "run_two_stage",
]
