"""
実験結果の保存先
runs.csv (追記のみ、完了後に (lambda0, seed) 順へ書き直す)・sweep.meta.json・trajectories.db
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Literal

import pandas as pd
from sqlalchemy import select

from ..data import RUN_COLUMNS, RunRecord
from ..db.models import TrajectoryPointRow, TrajectoryRun
from ..db.session import TRAJECTORY_DB_NAME, create_store_engine, init_db, session_scope
from ..errors import StoreError
from ..optim.base import StageResult

logger = logging.getLogger(__name__)

RUNS_CSV = "runs.csv"
META_JSON = "sweep.meta.json"


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def read_runs_frame(path: str | Path) -> pd.DataFrame:
    """runs.csv を文字列のまま読む(途中で切れた行は捨てる)"""
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        return pd.DataFrame(columns=RUN_COLUMNS, dtype=str)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, on_bad_lines="warn")
    except (OSError, pd.errors.ParserError) as e:
        raise StoreError(f"cannot read {path}: {e}") from e
    frame = frame.fillna("")
    missing = [c for c in RUN_COLUMNS[:7] if c not in frame.columns]
    if missing:
        raise StoreError(f"{path} is missing columns: {', '.join(missing)}")
    for column in RUN_COLUMNS[7:]:
        if column not in frame.columns:
            frame[column] = ""
    # 中断された追記で欠けた行
    complete = (frame[RUN_COLUMNS[:7]] != "").all(axis=1)
    if not complete.all():
        logger.warning(f"Dropping {int((~complete).sum())} incomplete rows from {path}")
        frame = frame[complete]
    return frame[RUN_COLUMNS].reset_index(drop=True)


def read_records(path: str | Path) -> list[RunRecord]:
    try:
        return [RunRecord.from_row(row) for row in read_runs_frame(path).to_dict("records")]
    except (KeyError, ValueError) as e:
        raise StoreError(f"malformed record in {path}: {e}") from e


class ResultStore:
    """1 つの出力ディレクトリ。書き込みは親プロセスだけが行う"""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self.runs_path = self.out_dir / RUNS_CSV
        self.meta_path = self.out_dir / META_JSON
        self.db_path = self.out_dir / TRAJECTORY_DB_NAME
        self._session_factory = None

    def prepare(self) -> None:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StoreError(f"cannot create output directory {self.out_dir}: {e.strerror}") from e

    # --- runs.csv ---

    def records(self) -> list[RunRecord]:
        return read_records(self.runs_path)

    def completed_keys(self) -> set[tuple[float, int]]:
        return {record.key for record in self.records()}

    def append(self, record: RunRecord) -> None:
        new_file = not self.runs_path.exists() or self.runs_path.stat().st_size == 0
        frame = pd.DataFrame([record.to_row()], columns=RUN_COLUMNS)
        try:
            frame.to_csv(self.runs_path, mode="a", header=new_file, index=False, lineterminator="\n")
        except OSError as e:
            raise StoreError(f"cannot append to {self.runs_path}: {e.strerror}") from e

    def finalize(self, keep: Literal["first", "last"] = "first") -> int:
        """重複を除いて (lambda0, seed) 順に並べ替え、書き直す。keep="last" なら後から追記した記録を残す"""
        frame = read_runs_frame(self.runs_path)
        frame = frame.assign(_lam=frame["lambda0"].astype(float), _seed=frame["seed"].astype(int))
        frame = frame.drop_duplicates(subset=["_lam", "_seed"], keep=keep)
        frame = frame.sort_values(["_lam", "_seed"], kind="mergesort")[RUN_COLUMNS]
        try:
            _atomic_write(self.runs_path, frame.to_csv(index=False, lineterminator="\n"))
        except OSError as e:
            raise StoreError(f"cannot rewrite {self.runs_path}: {e.strerror}") from e
        return len(frame)

    # --- sweep.meta.json ---

    def read_meta(self) -> dict[str, Any] | None:
        if not self.meta_path.exists():
            return None
        try:
            return json.loads(self.meta_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise StoreError(f"cannot read {self.meta_path}: {e}") from e

    def write_meta(self, meta: dict[str, Any]) -> None:
        text = json.dumps(meta, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        try:
            _atomic_write(self.meta_path, text)
        except OSError as e:
            raise StoreError(f"cannot write {self.meta_path}: {e.strerror}") from e

    # --- trajectories.db ---

    def _sessions(self):
        if self._session_factory is None:
            self._session_factory = init_db(create_store_engine(self.db_path))
        return self._session_factory

    def save_trajectory(self, record: RunRecord, stage_a: StageResult, stage_b: StageResult) -> None:
        """既存の同じ実行キーの軌跡は置き換える(再開時の再実行に備える)"""
        key = record.trajectory_ref
        if key is None:
            return
        with session_scope(self._sessions()) as db:
            existing = db.get(TrajectoryRun, key)
            if existing is not None:
                db.delete(existing)
                db.flush()
            run = TrajectoryRun(run_key=key, lambda0=record.lambda0, seed=record.seed, status=str(record.status))
            for stage, result in (("A", stage_a), ("B", stage_b)):
                for point in result.trajectory:
                    run.points.append(
                        TrajectoryPointRow(
                            stage=stage,
                            iteration=point.iteration,
                            energy=point.energy,
                            objective=point.objective,
                            norm=point.norm,
                            lam=point.lam,
                        )
                    )
            db.add(run)

    def load_trajectories(self) -> pd.DataFrame:
        """全軌跡を 1 表にする(列: run_key, lambda0, seed, stage, iteration, energy, objective, norm, lam)"""
        columns = ["run_key", "lambda0", "seed", "stage", "iteration", "energy", "objective", "norm", "lam"]
        if not self.db_path.exists():
            return pd.DataFrame(columns=columns)
        stmt = (
            select(
                TrajectoryRun.run_key,
                TrajectoryRun.lambda0,
                TrajectoryRun.seed,
                TrajectoryPointRow.stage,
                TrajectoryPointRow.iteration,
                TrajectoryPointRow.energy,
                TrajectoryPointRow.objective,
                TrajectoryPointRow.norm,
                TrajectoryPointRow.lam,
            )
            .join(TrajectoryPointRow, TrajectoryPointRow.run_key == TrajectoryRun.run_key)
            .order_by(TrajectoryRun.lambda0, TrajectoryRun.seed, TrajectoryPointRow.stage, TrajectoryPointRow.iteration)
        )
        with session_scope(self._sessions()) as db:
            rows = db.execute(stmt).all()
        return pd.DataFrame([tuple(row) for row in rows], columns=columns)
