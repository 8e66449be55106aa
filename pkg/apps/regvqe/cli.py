"""
コマンドラインインターフェース
run / sweep / stats / exact / lambda-scale / curves / trajectory

標準出力は 1 行 1 つの key=value、進捗やログは標準エラー出力。
終了コード: 0 正常、1 使い方・設定の誤り、2 実行の失敗。
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import LOG_LEVELS, get_settings
from .core.ansatz import param_count
from .core.pauli import (
    RfimSpec,
    WeightedPauliSum,
    abs_coefficient_sum,
    generate_rfim,
    load_bundled,
    read_pauli_sum,
)
from .core.statevector import cached_ground_energy
from .data import RunStatus
from .errors import ConfigError, RegVQEError
from .experiment import ExperimentConfig, load_experiment
from .harness.store import ResultStore, read_records
from .harness.sweep import execute_run, run_sweep
from .stats import (
    contraction_report,
    export_curves,
    lambda_scale,
    summarize,
    trajectory_profile,
    write_summary,
    write_window_report,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUN_FAILED = 2

RFIM_KEYS = {
    "n": "n_qubits",
    "n_qubits": "n_qubits",
    "j": "coupling_j",
    "coupling_j": "coupling_j",
    "seed": "rng_seed",
    "rng_seed": "rng_seed",
    "field_low": "field_low",
    "h_low": "field_low",
    "field_high": "field_high",
    "h_high": "field_high",
}


class _Parser(argparse.ArgumentParser):
    """使い方の誤りも終了コード 1 にする"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def emit(key: str, value) -> None:
    if isinstance(value, float):
        value = repr(value)
    print(f"{key}={value}")


# === 入力の解決 ===


def parse_rfim(items: list[str]) -> RfimSpec:
    """`n=12 seed=7 J=1.1` または `n=12,seed=7` 形式。h_max は対称な範囲 [-h_max, h_max]"""
    values: dict[str, float | int] = {}
    for item in (part for chunk in items for part in chunk.split(",") if part.strip()):
        key, sep, raw = item.partition("=")
        key = key.strip().lower()
        if not sep:
            raise ConfigError(f"--rfim expects key=value pairs, got {item!r}")
        try:
            if key == "h_max":
                h_max = float(raw)
                values["field_low"], values["field_high"] = -h_max, h_max
            elif key in RFIM_KEYS:
                name = RFIM_KEYS[key]
                values[name] = int(raw) if name in ("n_qubits", "rng_seed") else float(raw)
            else:
                raise ConfigError(f"unknown --rfim key {key!r}")
        except ValueError:
            raise ConfigError(f"--rfim value for {key!r} is not a number: {raw!r}") from None
    try:
        return RfimSpec(**values)
    except ValueError as e:
        raise ConfigError(f"invalid --rfim: {e}") from None


def resolve_hamiltonian(args) -> WeightedPauliSum:
    chosen = [x for x in (args.hamiltonian, args.bundled, args.rfim) if x]
    if len(chosen) != 1:
        raise ConfigError("give exactly one of a Hamiltonian file, --bundled or --rfim")
    if args.rfim:
        return generate_rfim(parse_rfim(args.rfim))
    if args.bundled:
        try:
            return load_bundled(args.bundled)
        except FileNotFoundError as e:
            raise ConfigError(str(e)) from None
    try:
        return read_pauli_sum(args.hamiltonian)
    except OSError as e:
        raise ConfigError(f"cannot read {args.hamiltonian}: {e.strerror}") from None


def _workers(args, exp: ExperimentConfig, settings) -> int:
    workers = args.workers or exp.workers or settings.workers
    if workers < 1:
        raise ConfigError(f"--workers must be positive, got {workers}")
    return workers


# === サブコマンド ===


def cmd_run(args, settings) -> int:
    exp = load_experiment(args.config)
    if args.lambda0 is not None:
        exp = exp.with_overrides(**{"reg.lambda0": args.lambda0})
    if args.seed < 0:
        raise ConfigError(f"--seed must be non-negative, got {args.seed}")
    cfg = exp.sweep_config(cache_dir=settings.cache_dir, debug=settings.debug, lambda_grid=[exp.reg.lambda0])
    outcome = execute_run(cfg, 0, args.seed, keep_trajectory=True)
    record = outcome.record

    out = Path(args.out or exp.out or "runs/single")
    store = ResultStore(out)
    store.prepare()
    if outcome.stage_a is not None and outcome.stage_b is not None:
        store.save_trajectory(record, outcome.stage_a, outcome.stage_b)
    store.append(record)
    # 同じ (λ0, seed) の再実行は最新の記録で置き換える
    store.finalize(keep="last")

    emit("lambda0", record.lambda0)
    emit("seed", record.seed)
    emit("final_energy", record.final_energy)
    emit("exact_ground_energy", cfg.ground_energy)
    emit("delta_e", record.delta_e)
    emit("final_norm", record.final_norm)
    emit("evals_total", record.evals_total)
    emit("status", record.status)
    if outcome.stage_a is not None and outcome.stage_b is not None:
        emit("stage_a_iterations", outcome.stage_a.iterations_used)
        emit("stage_b_iterations", outcome.stage_b.iterations_used)
    emit("runs_csv", store.runs_path)
    return EXIT_RUN_FAILED if record.status == RunStatus.FAILED else EXIT_OK


def cmd_sweep(args, settings) -> int:
    exp = load_experiment(args.config)
    cfg = exp.sweep_config(workers=_workers(args, exp, settings), cache_dir=settings.cache_dir, debug=settings.debug)
    out = Path(args.out or exp.out or "runs/sweep")
    logger.info(
        f"Sweep over {len(cfg.lambda_grid)} λ values × {cfg.n_seeds} seeds on {cfg.workers} workers → {out}"
    )
    records = run_sweep(cfg, out, resume=args.resume)
    store = ResultStore(out)
    emit("records", len(records))
    emit("failed", sum(r.status == RunStatus.FAILED for r in records))
    emit("exact_ground_energy", cfg.ground_energy)
    emit("runs_csv", store.runs_path)
    emit("meta", store.meta_path)
    return EXIT_OK


def cmd_stats(args, settings) -> int:
    runs = Path(args.runs)
    records = read_records(runs)
    summary = summarize(records)
    out = Path(args.out) if args.out else runs.parent
    out.mkdir(parents=True, exist_ok=True)
    summary_path = write_summary(summary, out / "summary.csv")
    windows_path = write_window_report(summary, out / "windows.json")
    emit("records", len(records))
    emit("hamiltonian_hash", summary.hamiltonian_hash)
    emit("summary_csv", summary_path)
    emit("windows", windows_path)
    for k, thr in enumerate(summary.thresholds, start=1):
        window = summary.windows.get(thr)
        emit(f"window_thr{k}", "undefined" if window is None else f"{window.lambda_lo!r},{window.lambda_hi!r}")
    return EXIT_OK


def cmd_curves(args, settings) -> int:
    runs = Path(args.runs)
    summary = summarize(read_records(runs))
    out = Path(args.out) if args.out else runs.parent / "curves"
    paths = export_curves(summary, out)
    contraction = contraction_report(summary)
    contraction_path = out / "contraction.csv"
    contraction.to_csv(contraction_path, index=False, float_format="%.17g", lineterminator="\n")
    emit("curves", len(paths))
    emit("out", out)
    emit("contraction_csv", contraction_path)
    return EXIT_OK


def cmd_trajectory(args, settings) -> int:
    run_dir = Path(args.run_dir)
    profile = trajectory_profile(run_dir)
    out = Path(args.out) if args.out else run_dir / "trajectory_profile.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    profile.to_csv(out, index=False, float_format="%.17g", lineterminator="\n")
    emit("rows", len(profile))
    emit("trajectory_csv", out)
    return EXIT_OK


def cmd_exact(args, settings) -> int:
    h = resolve_hamiltonian(args)
    energy = cached_ground_energy(h, settings.cache_dir)
    emit("n_qubits", h.n_qubits)
    emit("terms", len(h.terms))
    emit("ground_energy", energy)
    return EXIT_OK


def cmd_lambda_scale(args, settings) -> int:
    if args.config:
        if args.hamiltonian or args.bundled or args.rfim:
            raise ConfigError("--config cannot be combined with a Hamiltonian argument")
        exp = load_experiment(args.config)
        h = exp.load_hamiltonian()
        params = args.params or param_count(exp.ansatz_spec(h.n_qubits))
    else:
        h = resolve_hamiltonian(args)
        if not args.params:
            raise ConfigError("--params is required without --config")
        params = args.params
    emit("abs_coefficient_sum", abs_coefficient_sum(h))
    emit("params", params)
    emit("lambda_scale", lambda_scale(h, params))
    return EXIT_OK


# === エントリポイント ===


def _add_hamiltonian_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("hamiltonian", nargs="?", help=".psum file")
    parser.add_argument("--bundled", choices=["h2", "lih"], help="bundled Hamiltonian")
    parser.add_argument("--rfim", nargs="+", metavar="K=V", help="RFIM instance, e.g. n=12 seed=7 J=1.1 h_max=0.52")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regvqe", description="Regularized VQE experiments")
    parser.add_argument(
        "--log-level", type=str.upper, choices=LOG_LEVELS, help="logging level (default: REGVQE_LOG_LEVEL or INFO)"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="one two-stage run")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda0", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="λ-grid sweep over seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--resume", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="summary.csv and λ_opt windows from runs.csv")
    p.add_argument("runs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("curves", help="plot-ready success-rate curves and IQR contraction")
    p.add_argument("runs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("trajectory", help="median trajectory profile of a sweep directory")
    p.add_argument("run_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("exact", help="exact ground energy")
    _add_hamiltonian_args(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("lambda-scale", help="λ_scale = Σ|c_i| / P")
    _add_hamiltonian_args(p)
    p.add_argument("--config")
    p.add_argument("--params", type=int)
    p.set_defaults(func=cmd_lambda_scale)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = get_settings()
    except ConfigError as e:
        print(f"regvqe: {e}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=args.log_level or settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args, settings)
    except RegVQEError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
