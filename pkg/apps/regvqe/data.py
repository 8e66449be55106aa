from __future__ import annotations

import math
from dataclasses import dataclass
from enum import StrEnum

RUN_COLUMNS = [
    "lambda0",
    "seed",
    "final_energy",
    "final_norm",
    "evals_total",
    "status",
    "delta_e",
    "hamiltonian_hash",
    "trajectory_ref",
]


def fmt_float(value: float) -> str:
    """17 有効桁(往復で値が変わらない)"""
    return format(float(value), ".17g")


def run_key(lambda0: float, seed: int) -> str:
    return f"{float(lambda0)!r}/{int(seed)}"


class RunStatus(StrEnum):
    CONVERGED = "Converged"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    FAILED = "Failed"


@dataclass(frozen=True)
class RunRecord:
    """1 回の 2 段階最適化の結果(seed はシード番号 j)"""

    lambda0: float
    seed: int
    final_energy: float
    final_norm: float
    evals_total: int
    status: RunStatus
    delta_e: float
    hamiltonian_hash: str = ""
    trajectory_ref: str | None = None

    @property
    def key(self) -> tuple[float, int]:
        return (self.lambda0, self.seed)

    def succeeded(self, threshold: float) -> bool:
        return self.status != RunStatus.FAILED and math.isfinite(self.delta_e) and self.delta_e <= threshold

    def to_row(self) -> list[str]:
        return [
            fmt_float(self.lambda0),
            str(self.seed),
            fmt_float(self.final_energy),
            fmt_float(self.final_norm),
            str(self.evals_total),
            str(self.status),
            fmt_float(self.delta_e),
            self.hamiltonian_hash,
            self.trajectory_ref or "",
        ]

    @classmethod
    def from_row(cls, row: dict[str, str]) -> RunRecord:
        return cls(
            lambda0=float(row["lambda0"]),
            seed=int(row["seed"]),
            final_energy=float(row["final_energy"]),
            final_norm=float(row["final_norm"]),
            evals_total=int(row["evals_total"]),
            status=RunStatus(row["status"]),
            delta_e=float(row["delta_e"]),
            hamiltonian_hash=row.get("hamiltonian_hash") or "",
            trajectory_ref=row.get("trajectory_ref") or None,
        )
