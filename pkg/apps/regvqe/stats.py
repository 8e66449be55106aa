"""
実験結果の集計
しきい値ごとの成功率と Wilson 区間・エネルギー/ノルムの分位点・λ_opt 窓・λ_scale
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .core.pauli import WeightedPauliSum, abs_coefficient_sum
from .data import RunRecord, RunStatus
from .errors import StatsError, WindowUndefinedError
from .harness.store import ResultStore

logger = logging.getLogger(__name__)

Z95 = 1.959964
WINDOW_FRACTION = 0.9
# 0.9 * 0.1 > 0.09 のような丸めで境界の λ を落とさない
WINDOW_RTOL = 1e-12

SUMMARY_COLUMNS = [
    "lambda0",
    "n",
    "thr",
    "successes",
    "rate",
    "wilson_lo",
    "wilson_hi",
    "median_E",
    "iqr_E",
    "median_norm",
    "iqr_norm",
]
FLOAT_FORMAT = "%.17g"


def threshold_grid() -> list[float]:
    """化学的精度のしきい値 1.5×10⁻¹ … 1.5×10⁻⁷ Ha"""
    return [1.5e-1, 1.5e-2, 1.5e-3, 1.5e-4, 1.5e-5, 1.5e-6, 1.5e-7]


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson スコア区間(両端を [0, 1] に切り詰める)"""
    if n <= 0:
        raise StatsError(f"Wilson interval needs n > 0, got {n}")
    if not 0 <= successes <= n:
        raise StatsError(f"successes must lie in [0, {n}], got {successes}")
    if not z > 0:
        raise StatsError(f"z must be positive, got {z}")
    p_hat = successes / n
    denominator = 1 + z**2 / n
    center = (p_hat + z**2 / (2 * n)) / denominator
    margin = (z / denominator) * math.sqrt(p_hat * (1 - p_hat) / n + z**2 / (4 * n**2))
    # k=0 と k=n の端は丸め誤差を残さず 0・1 に固定する
    lo = 0.0 if successes == 0 else max(0.0, center - margin)
    hi = 1.0 if successes == n else min(1.0, center + margin)
    return lo, hi


def lambda_scale(h: WeightedPauliSum, p: int) -> float:
    """λ_scale = Σ|c_i| / P"""
    if p <= 0:
        raise StatsError(f"parameter count must be positive, got {p}")
    return abs_coefficient_sum(h) / p


# === 集計 ===


@dataclass(frozen=True)
class LambdaWindow:
    lambda_lo: float
    lambda_hi: float
    max_rate: float
    all_windows: tuple[tuple[float, float], ...] = ()


@dataclass
class SweepSummary:
    """(λ0, しきい値) ごとの集計表"""

    table: pd.DataFrame
    thresholds: tuple[float, ...]
    hamiltonian_hash: str = ""
    windows: dict[float, LambdaWindow | None] = field(default_factory=dict)

    @property
    def lambdas(self) -> list[float]:
        return sorted(self.table["lambda0"].unique().tolist())

    def rows(self, threshold: float) -> pd.DataFrame:
        mask = np.isclose(self.table["thr"].to_numpy(), threshold, rtol=1e-12, atol=0.0)
        if not mask.any():
            raise StatsError(f"threshold {threshold!r} is not part of the summary")
        return self.table[mask].sort_values("lambda0")

    def rates(self, threshold: float) -> np.ndarray:
        return self.rows(threshold)["rate"].to_numpy(dtype=float)


def records_frame(records: Iterable[RunRecord]) -> pd.DataFrame:
    rows = [
        {
            "lambda0": r.lambda0,
            "seed": r.seed,
            "final_energy": r.final_energy,
            "final_norm": r.final_norm,
            "status": str(r.status),
            "delta_e": r.delta_e,
            "hamiltonian_hash": r.hamiltonian_hash,
        }
        for r in records
    ]
    return pd.DataFrame(rows)


def _median_iqr(values: pd.Series) -> tuple[float, float]:
    """線形補間 (type 7) の中央値と四分位範囲"""
    values = values[np.isfinite(values)]
    if values.empty:
        return math.nan, math.nan
    q1, median, q3 = np.quantile(values.to_numpy(dtype=float), [0.25, 0.5, 0.75], method="linear")
    return float(median), float(q3 - q1)


def summarize(records: Sequence[RunRecord], thresholds: Sequence[float] | None = None) -> SweepSummary:
    """λ0 ごとにまとめ、しきい値ごとの成功数・Wilson 区間・中央値・IQR を求める"""
    thresholds = tuple(threshold_grid() if thresholds is None else thresholds)
    if not records:
        raise StatsError("no records")
    frame = records_frame(records)

    hashes = sorted(h for h in frame["hamiltonian_hash"].unique() if h)
    if len(hashes) > 1:
        raise StatsError(f"records mix Hamiltonian instances: {', '.join(hashes)}")

    ok = frame["status"] != str(RunStatus.FAILED)
    rows = []
    for lam, group in frame.groupby("lambda0", sort=True):
        valid = group[ok.loc[group.index]]
        median_e, iqr_e = _median_iqr(valid["final_energy"])
        median_norm, iqr_norm = _median_iqr(valid["final_norm"])
        n = len(group)
        delta = valid["delta_e"].to_numpy(dtype=float)
        for thr in thresholds:
            successes = int(np.count_nonzero(np.isfinite(delta) & (delta <= thr)))
            lo, hi = wilson_interval(successes, n)
            rows.append(
                {
                    "lambda0": float(lam),
                    "n": n,
                    "thr": float(thr),
                    "successes": successes,
                    "rate": successes / n,
                    "wilson_lo": lo,
                    "wilson_hi": hi,
                    "median_E": median_e,
                    "iqr_E": iqr_e,
                    "median_norm": median_norm,
                    "iqr_norm": iqr_norm,
                }
            )
    table = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    summary = SweepSummary(table, thresholds, hashes[0] if hashes else "")

    if len(summary.lambdas) >= 2:
        for thr in thresholds:
            try:
                summary.windows[thr] = lambda_opt_window_detail(summary, thr)
            except WindowUndefinedError:
                summary.windows[thr] = None
    return summary


# === λ_opt 窓 ===


def _qualifying_windows(rates: np.ndarray) -> tuple[list[tuple[int, int]], float]:
    best = float(rates.max())
    qualifies = rates >= WINDOW_FRACTION * best * (1.0 - WINDOW_RTOL)
    windows = []
    start = None
    for i, flag in enumerate(qualifies):
        if flag and start is None:
            start = i
        if not flag and start is not None:
            windows.append((start, i - 1))
            start = None
    if start is not None:
        windows.append((start, len(rates) - 1))
    # 最大値を含む窓だけが候補
    return [(a, b) for a, b in windows if np.any(rates[a : b + 1] == best)], best


def lambda_opt_window_detail(summary: SweepSummary, threshold: float) -> LambdaWindow:
    rows = summary.rows(threshold)
    lambdas = rows["lambda0"].to_numpy(dtype=float)
    rates = rows["rate"].to_numpy(dtype=float)
    if len(lambdas) < 2:
        raise StatsError(f"λ_opt window needs at least 2 λ values, got {len(lambdas)}")
    if rates.max() <= 0.0:
        raise WindowUndefinedError(f"no successful runs at threshold {threshold:g}; λ_opt window undefined")
    windows, best = _qualifying_windows(rates)
    lo, hi = windows[0]  # 最小の argmax を含む窓
    return LambdaWindow(
        lambda_lo=float(lambdas[lo]),
        lambda_hi=float(lambdas[hi]),
        max_rate=best,
        all_windows=tuple((float(lambdas[a]), float(lambdas[b])) for a, b in windows),
    )


def lambda_opt_window(summary: SweepSummary, threshold: float) -> tuple[float, float]:
    """成功率が最大値の 90% 以上を保つ連続した λ 区間"""
    window = lambda_opt_window_detail(summary, threshold)
    return window.lambda_lo, window.lambda_hi


# === 付随する表 ===


def contraction_report(summary: SweepSummary) -> pd.DataFrame:
    """λ0 ごとの IQR を λ=0 の IQR で割った比"""
    per_lambda = summary.table.drop_duplicates("lambda0")[["lambda0", "iqr_E", "iqr_norm"]].sort_values("lambda0")
    baseline = per_lambda[per_lambda["lambda0"] == 0.0]
    if baseline.empty:
        raise StatsError("contraction report needs a λ0=0 baseline")
    base_e = float(baseline["iqr_E"].iloc[0])
    base_norm = float(baseline["iqr_norm"].iloc[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        report = per_lambda.assign(
            iqr_E_ratio=per_lambda["iqr_E"].to_numpy(dtype=float) / base_e,
            iqr_norm_ratio=per_lambda["iqr_norm"].to_numpy(dtype=float) / base_norm,
        )
    return report.reset_index(drop=True)


def write_summary(summary: SweepSummary, path: str | Path) -> Path:
    path = Path(path)
    summary.table.sort_values(["lambda0", "thr"], ascending=[True, False], kind="mergesort").to_csv(
        path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    return path


def window_report(summary: SweepSummary) -> dict[str, object]:
    report: dict[str, object] = {}
    for k, thr in enumerate(summary.thresholds, start=1):
        window = summary.windows.get(thr)
        entry: dict[str, object] = {"threshold": thr}
        if window is None:
            entry["window"] = None
        else:
            entry.update(
                window=[window.lambda_lo, window.lambda_hi],
                max_rate=window.max_rate,
                all_windows=[list(w) for w in window.all_windows],
            )
        report[f"thr{k}"] = entry
    return report


def write_window_report(summary: SweepSummary, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(window_report(summary), indent=2) + "\n", encoding="utf-8")
    return path


def export_curves(summary: SweepSummary, out_dir: str | Path) -> list[Path]:
    """しきい値ごとに curve_thr<k>.csv (lambda0, rate, wilson_lo, wilson_hi)"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, thr in enumerate(summary.thresholds, start=1):
        path = out_dir / f"curve_thr{k}.csv"
        summary.rows(thr)[["lambda0", "rate", "wilson_lo", "wilson_hi"]].to_csv(
            path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
        paths.append(path)
    return paths


def trajectory_profile(out_dir: str | Path) -> pd.DataFrame:
    """保存済み軌跡の (λ0, ステージ, 反復) ごとの中央値"""
    trajectories = ResultStore(out_dir).load_trajectories()
    if trajectories.empty:
        raise StatsError(f"no stored trajectories in {out_dir}")
    profile = (
        trajectories.groupby(["lambda0", "stage", "iteration"], sort=True)
        .agg(
            runs=("run_key", "nunique"),
            median_energy=("energy", "median"),
            median_objective=("objective", "median"),
            median_norm=("norm", "median"),
            lam=("lam", "median"),
        )
        .reset_index()
    )
    return profile
