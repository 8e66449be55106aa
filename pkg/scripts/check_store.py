#!/usr/bin/env python3
"""
スイープ出力ディレクトリの内容を確認するスクリプト
runs.csv の件数・sweep.meta.json・trajectories.db のテーブルを表示する
"""

import argparse
import sys
from pathlib import Path

import pandas as pd
from sqlalchemy import func, inspect, select

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from apps.regvqe.db.models import TrajectoryPointRow, TrajectoryRun  # noqa: E402
from apps.regvqe.db.session import create_store_engine, init_db, session_scope  # noqa: E402
from apps.regvqe.errors import StoreError  # noqa: E402
from apps.regvqe.harness.store import ResultStore, read_runs_frame  # noqa: E402


def status_table(store: ResultStore) -> pd.DataFrame:
    """λ0 × status の件数表"""
    frame = read_runs_frame(store.runs_path)
    if frame.empty:
        return pd.DataFrame()
    frame = frame.assign(lambda0=frame["lambda0"].astype(float))
    return frame.groupby(["lambda0", "status"]).size().unstack(fill_value=0).sort_index()


def check_store(out_dir: str | Path, max_sample_size: int = 5) -> bool:
    store = ResultStore(out_dir)
    if not store.out_dir.exists():
        print(f"出力ディレクトリが見つかりません: {store.out_dir}")
        return False

    print(f"出力ディレクトリ: {store.out_dir}")
    print("=" * 50)

    try:
        meta = store.read_meta()
        if meta is None:
            print("sweep.meta.json: なし")
        else:
            print("📋 sweep.meta.json")
            for key in ("hamiltonian_hash", "exact_ground_energy", "n_qubits", "params", "n_seeds", "lambda_grid"):
                print(f"  {key}: {meta.get(key)}")

        print("\n" + "=" * 50)
        records = store.records()
        print(f"📋 runs.csv: {len(records)} 件")
        table = status_table(store)
        if not table.empty:
            print(table.to_string())
            if meta is not None:
                expected = len(meta.get("lambda_grid", [])) * int(meta.get("n_seeds", 0))
                if len(records) < expected:
                    print(f"  未完了: {expected - len(records)} 件(--resume で再開できます)")
    except StoreError as e:
        print(f"エラーが発生しました: {e}")
        return False

    print("\n" + "=" * 50)
    if not store.db_path.exists():
        print("trajectories.db: なし")
        return True

    print(f"📋 trajectories.db ({store.db_path.stat().st_size} bytes)")
    engine = create_store_engine(store.db_path)
    inspector = inspect(engine)
    for table_name in inspector.get_table_names():
        columns = ", ".join(f"{col['name']} ({col['type']})" for col in inspector.get_columns(table_name))
        print(f"- {table_name}: {columns}")

    with session_scope(init_db(engine)) as db:
        n_runs = db.scalar(select(func.count()).select_from(TrajectoryRun))
        n_points = db.scalar(select(func.count()).select_from(TrajectoryPointRow))
        print(f"\n軌跡: {n_runs} 実行 / {n_points} 点")
        stmt = select(TrajectoryRun).order_by(TrajectoryRun.lambda0, TrajectoryRun.seed).limit(max_sample_size)
        sample = db.scalars(stmt)
        for run in sample:
            stages = {stage: sum(p.stage == stage for p in run.points) for stage in ("A", "B")}
            print(f"  {run.run_key}: status={run.status}, Stage A {stages['A']} 点, Stage B {stages['B']} 点")
    engine.dispose()
    return True


def main():
    parser = argparse.ArgumentParser(description="スイープ出力ディレクトリの内容を確認するスクリプト")
    parser.add_argument("out_dir", help="run_sweep の出力ディレクトリ")
    parser.add_argument("--max-sample", type=int, default=5, help="表示する軌跡の最大件数(デフォルト: 5)")

    args = parser.parse_args()

    ok = check_store(args.out_dir, max_sample_size=args.max_sample)
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
