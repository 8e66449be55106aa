"""
λ スイープの実行
(λ0, シード番号) ごとに独立な 2 段階最適化を実行し、結果を ResultStore に追記する
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from ..core.ansatz import AnsatzSpec, param_count
from ..core.pauli import WeightedPauliSum, hamiltonian_hash
from ..data import RunRecord, RunStatus, run_key
from ..errors import StoreError
from ..objective import GradientMethod, Objective
from ..optim.base import StageResult
from ..optim.pipeline import PipelineConfig, run_two_stage
from .seeding import InitDistribution, initial_theta
from .store import ResultStore

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepConfig:
    """
    スイープ設定

    pipeline はテンプレートで、schedule.lambda0 は λ ごとに差し替える。
    ground_energy は ΔE の基準(厳密基底エネルギー)。
    """

    hamiltonian: WeightedPauliSum
    ansatz: AnsatzSpec
    pipeline: PipelineConfig
    lambda_grid: tuple[float, ...]
    n_seeds: int
    ground_energy: float
    seed_base: int = 0
    init_distribution: InitDistribution = InitDistribution.UNIFORM_SYMMETRIC_PI
    workers: int = 1
    paired: bool = True
    trajectory_seeds: int = 10
    gradient_method: GradientMethod = GradientMethod.PARAMETER_SHIFT
    fd_step: float = 1e-5
    debug: bool = False
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        grid = tuple(float(v) for v in self.lambda_grid)
        object.__setattr__(self, "lambda_grid", grid)
        object.__setattr__(self, "init_distribution", InitDistribution(self.init_distribution))
        if not grid:
            raise ValueError("lambda_grid must not be empty")
        if any(not (math.isfinite(v) and v >= 0) for v in grid):
            raise ValueError("lambda_grid values must be finite and non-negative")
        if any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
            raise ValueError("lambda_grid must be sorted ascending without duplicates")
        if self.n_seeds < 1:
            raise ValueError(f"n_seeds must be positive, got {self.n_seeds}")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")
        if self.hamiltonian.n_qubits != self.ansatz.n_qubits:
            raise ValueError(
                f"ansatz acts on {self.ansatz.n_qubits} qubits, Hamiltonian on {self.hamiltonian.n_qubits}"
            )

    def tasks(self) -> list[tuple[int, float, int]]:
        """(λ 番号, λ0, シード番号) の全組"""
        return [(i, lam, j) for i, lam in enumerate(self.lambda_grid) for j in range(self.n_seeds)]

    def describe(self) -> dict[str, Any]:
        """sweep.meta.json に書く内容"""
        return {
            **self.meta,
            "hamiltonian_hash": hamiltonian_hash(self.hamiltonian),
            "exact_ground_energy": self.ground_energy,
            "n_qubits": self.hamiltonian.n_qubits,
            "params": param_count(self.ansatz),
            "init_distribution": str(self.init_distribution),
            "paired": self.paired,
            "lambda_grid": list(self.lambda_grid),
            "n_seeds": self.n_seeds,
            "seed_base": self.seed_base,
        }


@dataclass
class RunOutcome:
    record: RunRecord
    stage_a: StageResult | None = None
    stage_b: StageResult | None = None


def _status(stage_a: StageResult, stage_b: StageResult) -> RunStatus:
    if stage_a.failed or stage_b.failed or not math.isfinite(stage_b.best_value):
        return RunStatus.FAILED
    if stage_a.truncated or stage_b.truncated:
        return RunStatus.BUDGET_EXHAUSTED
    return RunStatus.CONVERGED


def execute_run(cfg: SweepConfig, lambda_index: int, seed: int, *, keep_trajectory: bool | None = None) -> RunOutcome:
    """
    1 回の 2 段階最適化

    例外はここで捕まえて status=Failed の記録にする(スイープは止めない)。
    """
    lambda0 = cfg.lambda_grid[lambda_index]
    if keep_trajectory is None:
        keep_trajectory = seed < cfg.trajectory_seeds
    h_hash = hamiltonian_hash(cfg.hamiltonian)
    ref = run_key(lambda0, seed) if keep_trajectory else None

    theta0 = initial_theta(
        cfg.ansatz,
        seed,
        cfg.init_distribution,
        seed_base=cfg.seed_base,
        lambda_key=0 if cfg.paired else lambda_index,
    )
    pipeline = replace(cfg.pipeline, schedule=replace(cfg.pipeline.schedule, lambda0=lambda0))
    obj = Objective(cfg.hamiltonian, cfg.ansatz, gradient_method=cfg.gradient_method, fd_step=cfg.fd_step)
    try:
        stage_a, stage_b = run_two_stage(pipeline, obj, theta0, debug=cfg.debug)
    except Exception as e:
        logger.warning(f"Run λ0={lambda0!r} seed={seed} failed: {type(e).__name__}: {e}")
        record = RunRecord(
            lambda0=lambda0,
            seed=seed,
            final_energy=math.nan,
            final_norm=float(np.linalg.norm(theta0)),
            evals_total=obj.eval_counter,
            status=RunStatus.FAILED,
            delta_e=math.nan,
            hamiltonian_hash=h_hash,
            trajectory_ref=None,
        )
        return RunOutcome(record)

    status = _status(stage_a, stage_b)
    final_energy = stage_b.best_value
    record = RunRecord(
        lambda0=lambda0,
        seed=seed,
        final_energy=final_energy,
        final_norm=stage_b.final_norm,
        evals_total=obj.eval_counter,
        status=status,
        delta_e=final_energy - cfg.ground_energy if math.isfinite(final_energy) else math.nan,
        hamiltonian_hash=h_hash,
        trajectory_ref=ref,
    )
    if status == RunStatus.FAILED:
        logger.warning(f"Run λ0={lambda0!r} seed={seed} failed: non-finite objective or gradient")
    if not keep_trajectory:
        return RunOutcome(record)
    return RunOutcome(record, stage_a, stage_b)


# === ワーカープロセス ===

_WORKER_CFG: SweepConfig | None = None


def _init_worker(cfg: SweepConfig) -> None:
    global _WORKER_CFG
    _WORKER_CFG = cfg


def _worker_run(lambda_index: int, seed: int) -> RunOutcome:
    assert _WORKER_CFG is not None
    return execute_run(_WORKER_CFG, lambda_index, seed)


def _check_meta(store: ResultStore, meta: dict[str, Any]) -> None:
    existing = store.read_meta()
    if existing is None:
        if store.runs_path.exists() and store.records():
            raise StoreError(f"{store.runs_path} exists without {store.meta_path.name}; refusing to mix results")
        return
    if existing != meta:
        differing = sorted(k for k in set(existing) | set(meta) if existing.get(k) != meta.get(k))
        raise StoreError(
            f"{store.meta_path} describes a different sweep (differs in: {', '.join(differing)}); "
            "use a new output directory"
        )


def run_sweep(cfg: SweepConfig, out_dir, *, resume: bool = False) -> list[RunRecord]:
    """
    全 (λ0, シード) の組を実行して記録を返す

    完了済みの組は飛ばす(再開)。記録は完了順に追記し、最後に
    (lambda0, seed) 順に書き直すので、最終的な runs.csv はワーカー数や
    中断の有無に依存しない。
    """
    store = ResultStore(out_dir)
    store.prepare()
    meta = cfg.describe()
    _check_meta(store, meta)
    store.write_meta(meta)

    done = store.completed_keys()
    pending = [(i, lam, j) for i, lam, j in cfg.tasks() if (lam, j) not in done]
    if done and pending and not resume:
        raise StoreError(f"{store.out_dir} holds a partial sweep; pass --resume to continue it")
    total = len(cfg.lambda_grid) * cfg.n_seeds
    logger.info(f"Sweep: {total} runs, {total - len(pending)} already done, {len(pending)} pending")

    per_lambda = Counter(lam for lam, _ in done)

    def sink(outcome: RunOutcome) -> None:
        record = outcome.record
        if outcome.stage_a is not None and outcome.stage_b is not None:
            store.save_trajectory(record, outcome.stage_a, outcome.stage_b)
        store.append(record)
        per_lambda[record.lambda0] += 1
        if per_lambda[record.lambda0] == cfg.n_seeds:
            logger.info(f"λ0={record.lambda0!r}: {cfg.n_seeds}/{cfg.n_seeds} runs complete")

    if pending:
        if cfg.workers == 1:
            for i, _, j in pending:
                sink(execute_run(cfg, i, j))
        else:
            with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_init_worker, initargs=(cfg,)) as pool:
                futures = [pool.submit(_worker_run, i, j) for i, _, j in pending]
                for future in as_completed(futures):
                    sink(future.result())

    count = store.finalize()
    logger.info(f"Sweep finished: {count} records in {store.runs_path}")
    return store.records()
