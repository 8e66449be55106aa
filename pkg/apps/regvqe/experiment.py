"""
実験設定 (YAML)
pydantic モデルで検証し、エラーは YAML の該当行に結び付けて報告する
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from yaml.nodes import MappingNode, Node, SequenceNode

from .core.ansatz import AnsatzKind, AnsatzSpec, Entanglement
from .core.pauli import RfimSpec, WeightedPauliSum, generate_rfim, load_bundled, read_pauli_sum
from .core.statevector import cached_ground_energy, exact_ground_energy
from .errors import ConfigError, PauliFormatError
from .harness.seeding import InitDistribution
from .harness.sweep import SweepConfig
from .objective import GradientMethod, Schedule, ScheduleKind
from .optim.base import OptimizerConfig, OptimizerMethod
from .optim.pipeline import PipelineConfig

logger = logging.getLogger(__name__)

# 実行環境だけに関わり、結果に影響しないキー
RUNTIME_KEYS = ("workers", "out")

U64 = 2**64


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RfimSection(StrictModel):
    n_qubits: int = Field(12, ge=2)
    coupling_j: float = 1.1
    field_low: float = -0.5198333333333334
    field_high: float = 0.5198333333333334
    rng_seed: int = Field(7, ge=0, lt=U64)

    @model_validator(mode="after")
    def _bounds(self):
        if self.field_low > self.field_high:
            raise ValueError(f"field_low ({self.field_low}) must not exceed field_high ({self.field_high})")
        return self

    def to_spec(self) -> RfimSpec:
        return RfimSpec(self.n_qubits, self.coupling_j, self.field_low, self.field_high, self.rng_seed)


class HamiltonianSection(StrictModel):
    path: str | None = None
    bundled: Literal["h2", "lih"] | None = None
    rfim: RfimSection | None = None

    @model_validator(mode="after")
    def _exactly_one(self):
        given = [name for name in ("path", "bundled", "rfim") if getattr(self, name) is not None]
        if len(given) != 1:
            raise ValueError(f"exactly one of path, bundled, rfim is required, got {given or 'none'}")
        return self


class AnsatzSection(StrictModel):
    kind: AnsatzKind = AnsatzKind.TWO_LOCAL
    reps: int | None = Field(None, ge=0)
    entanglement: Entanglement = Entanglement.LINEAR

    @model_validator(mode="after")
    def _reps(self):
        if self.reps is None:
            self.reps = 4 if self.kind == AnsatzKind.TWO_LOCAL else 0
        if self.kind == AnsatzKind.RY_LAYER and self.reps != 0:
            raise ValueError("RyLayer has no entangling layers; reps must be 0")
        return self


class RegSection(StrictModel):
    lambda0: float = Field(0.0, ge=0.0, allow_inf_nan=False)
    schedule: ScheduleKind = ScheduleKind.COSINE


class FdSection(StrictModel):
    step: float = Field(1e-5, gt=0.0, allow_inf_nan=False)


class OptSection(StrictModel):
    method: OptimizerMethod = OptimizerMethod.CG
    max_iters_a: int = Field(15, ge=1)
    max_iters_b: int = Field(10, ge=1)
    gtol: float = Field(1e-2, gt=0.0)
    budget: int = Field(10_000, ge=1)
    lbfgs_memory: int = Field(10, ge=1)
    wolfe_c1: float = Field(1e-4, gt=0.0, lt=1.0)
    wolfe_c2: float | None = Field(None, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _wolfe(self):
        if self.wolfe_c2 is None:
            self.wolfe_c2 = 0.4 if self.method == OptimizerMethod.CG else 0.9
        if not self.wolfe_c1 < self.wolfe_c2:
            raise ValueError(f"wolfe_c1 ({self.wolfe_c1}) must be smaller than wolfe_c2 ({self.wolfe_c2})")
        return self


class SweepSection(StrictModel):
    lambda_grid: list[float] = Field(default_factory=lambda: [0.0])
    n_seeds: int = Field(1, ge=1)
    seed_base: int = Field(0, ge=0, lt=U64)
    init: InitDistribution = InitDistribution.UNIFORM_SYMMETRIC_PI
    paired: bool = True
    trajectory_seeds: int = Field(10, ge=0)

    @field_validator("lambda_grid")
    @classmethod
    def _grid(cls, grid: list[float]) -> list[float]:
        if not grid:
            raise ValueError("lambda_grid must not be empty")
        if any(not (math.isfinite(v) and v >= 0) for v in grid):
            raise ValueError("lambda_grid values must be finite and non-negative")
        if any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
            raise ValueError("lambda_grid must be sorted ascending without duplicates")
        return grid


class ExperimentConfig(StrictModel):
    hamiltonian: HamiltonianSection
    ansatz: AnsatzSection = Field(default_factory=AnsatzSection)
    reg: RegSection = Field(default_factory=RegSection)
    gradient: GradientMethod = GradientMethod.PARAMETER_SHIFT
    fd: FdSection = Field(default_factory=FdSection)
    opt: OptSection = Field(default_factory=OptSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    workers: int | None = Field(None, ge=1)
    out: str | None = None

    # --- 組み立て ---

    def load_hamiltonian(self) -> WeightedPauliSum:
        section = self.hamiltonian
        if section.rfim is not None:
            return generate_rfim(section.rfim.to_spec())
        if section.bundled is not None:
            return load_bundled(section.bundled)
        try:
            return read_pauli_sum(section.path)
        except OSError as e:
            raise ConfigError(f"cannot read Hamiltonian file {section.path}: {e.strerror}") from e
        except PauliFormatError as e:
            raise ConfigError(f"{section.path}: {e}") from e

    def ansatz_spec(self, n_qubits: int) -> AnsatzSpec:
        return AnsatzSpec(self.ansatz.kind, n_qubits, self.ansatz.reps, self.ansatz.entanglement)

    def optimizer_config(self, stage: Literal["a", "b"]) -> OptimizerConfig:
        return OptimizerConfig(
            method=self.opt.method,
            max_iters=self.opt.max_iters_a if stage == "a" else self.opt.max_iters_b,
            grad_tolerance=self.opt.gtol,
            lbfgs_memory=self.opt.lbfgs_memory,
            wolfe_c1=self.opt.wolfe_c1,
            wolfe_c2=self.opt.wolfe_c2,
        )

    def pipeline(self, lambda0: float | None = None) -> PipelineConfig:
        lam = self.reg.lambda0 if lambda0 is None else lambda0
        return PipelineConfig(
            stage_a=self.optimizer_config("a"),
            stage_b=self.optimizer_config("b"),
            schedule=Schedule(lam, self.opt.max_iters_a, self.reg.schedule),
            eval_budget=self.opt.budget,
        )

    def resolve(self) -> dict[str, Any]:
        """既定値をすべて書き出した設定(そのまま再実行に使える)"""
        return self.model_dump(mode="json")

    def reproducible_part(self) -> dict[str, Any]:
        """結果を決めるキーだけ(再開時の一致判定に使う)"""
        resolved = self.resolve()
        for key in RUNTIME_KEYS:
            resolved.pop(key, None)
        return resolved

    def sweep_config(
        self,
        *,
        workers: int = 1,
        cache_dir: str | Path | None = None,
        debug: bool = False,
        lambda_grid: list[float] | None = None,
    ) -> SweepConfig:
        """ハミルトニアンを読み込み、厳密基底エネルギーを求めてスイープ設定を組み立てる"""
        h = self.load_hamiltonian()
        ground = exact_ground_energy(h) if cache_dir is None else cached_ground_energy(h, cache_dir)
        return SweepConfig(
            hamiltonian=h,
            ansatz=self.ansatz_spec(h.n_qubits),
            pipeline=self.pipeline(),
            lambda_grid=tuple(self.sweep.lambda_grid if lambda_grid is None else lambda_grid),
            n_seeds=self.sweep.n_seeds,
            ground_energy=ground,
            seed_base=self.sweep.seed_base,
            init_distribution=self.sweep.init,
            workers=workers,
            paired=self.sweep.paired,
            trajectory_seeds=self.sweep.trajectory_seeds,
            gradient_method=self.gradient,
            fd_step=self.fd.step,
            debug=debug,
            meta={"config": self.reproducible_part()},
        )

    def with_overrides(self, **updates: Any) -> ExperimentConfig:
        """CLI フラグによる上書き(再検証する)"""
        data = self.resolve()
        for dotted, value in updates.items():
            if value is None:
                continue
            target = data
            *parents, leaf = dotted.split(".")
            for part in parents:
                target = target.setdefault(part, {})
            target[leaf] = value
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(_format_errors(e, None)[0]) from None


# === 読み込み ===


def _node_line(root: Node | None, loc: tuple) -> int | None:
    """pydantic のエラー位置 (loc) を YAML ノードの行番号 (1 始まり) に変換する"""
    if root is None:
        return None
    node = root
    line = node.start_mark.line + 1
    for key in loc:
        if isinstance(node, MappingNode):
            for key_node, value_node in node.value:
                if key_node.value == str(key):
                    line = key_node.start_mark.line + 1
                    node = value_node
                    break
            else:
                break
        elif isinstance(node, SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _format_errors(e: ValidationError, root: Node | None) -> tuple[str, int | None]:
    errors = e.errors()
    first = errors[0]
    where = ".".join(str(part) for part in first["loc"]) or "config"
    message = f"{where}: {first['msg']}"
    if len(errors) > 1:
        message += f" (and {len(errors) - 1} more)"
    return message, _node_line(root, first["loc"])


def parse_experiment(text: str, path: str = "<config>", base_dir: Path | None = None) -> ExperimentConfig:
    """YAML テキストを検証して ExperimentConfig を返す"""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as e:
        mark = e.problem_mark or e.context_mark
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"invalid YAML: {e.problem or e}", line, path) from None
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}", None, path) from None

    if data is None:
        raise ConfigError("config is empty", 1, path)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", _node_line(root, ()), path)

    # ファイル相対のパスは設定ファイルの場所を基準にする
    ham = data.get("hamiltonian")
    if base_dir is not None and isinstance(ham, dict) and isinstance(ham.get("path"), str):
        p = Path(ham["path"])
        if not p.is_absolute():
            ham["path"] = str((base_dir / p).resolve())

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        message, line = _format_errors(e, root)
        raise ConfigError(message, line, path) from None


def load_experiment(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e.strerror}", None, str(path)) from e
    logger.debug(f"Loading experiment config {path}")
    return parse_experiment(text, str(path), path.parent)
