"""
実験ハーネス(初期値の生成・λ スイープ・結果の保存)
"""

from .seeding import InitDistribution, initial_theta
from .store import ResultStore, read_records
from .sweep import RunOutcome, SweepConfig, execute_run, run_sweep

__all__ = [
    "InitDistribution",
    "ResultStore",
    "RunOutcome",
    "SweepConfig",
    "execute_run",
    "initial_theta",
    "read_records",
    "run_sweep",
]
