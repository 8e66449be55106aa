import pytest

from apps.regvqe.core.ansatz import AnsatzSpec
from apps.regvqe.data import RunStatus
from apps.regvqe.errors import StoreError
from apps.regvqe.harness.store import ResultStore
from apps.regvqe.harness.sweep import SweepConfig, execute_run, run_sweep
from apps.regvqe.objective import Schedule
from apps.regvqe.optim.base import OptimizerConfig
from apps.regvqe.optim.pipeline import PipelineConfig


@pytest.fixture
def toy_sweep(toy_zz):
    def build(**overrides):
        params = dict(
            hamiltonian=toy_zz,
            ansatz=AnsatzSpec.ry_layer(2),
            pipeline=PipelineConfig(
                OptimizerConfig(max_iters=15, grad_tolerance=1e-8),
                OptimizerConfig(max_iters=10, grad_tolerance=1e-8),
                Schedule(0.0, 15),
            ),
            lambda_grid=(0.0,),
            n_seeds=3,
            ground_energy=-2.0,
            seed_base=2025,
            trajectory_seeds=1,
        )
        params.update(overrides)
        return SweepConfig(**params)

    return build


class TestSweepConfig:
    def test_tasks(self, toy_sweep):
        cfg = toy_sweep(lambda_grid=(0.0, 0.1), n_seeds=2)
        assert cfg.tasks() == [(0, 0.0, 0), (0, 0.0, 1), (1, 0.1, 0), (1, 0.1, 1)]

    @pytest.mark.parametrize(
        "overrides",
        [{"lambda_grid": ()}, {"lambda_grid": (0.1, 0.0)}, {"lambda_grid": (-0.1,)}, {"n_seeds": 0}, {"workers": 0}],
    )
    def test_invalid(self, toy_sweep, overrides):
        with pytest.raises(ValueError):
            toy_sweep(**overrides)

    def test_ansatz_must_match_hamiltonian(self, toy_sweep):
        with pytest.raises(ValueError):
            toy_sweep(ansatz=AnsatzSpec.ry_layer(3))


class TestExecuteRun:
    def test_toy_run_reaches_ground_state(self, toy_sweep):
        outcome = execute_run(toy_sweep(), 0, 0)
        record = outcome.record
        assert record.status == RunStatus.CONVERGED
        assert -1e-12 <= record.delta_e < 1e-6
        assert record.trajectory_ref == "0.0/0"
        assert outcome.stage_a is not None
        assert record.evals_total <= 10_000

    def test_trajectory_only_for_leading_seeds(self, toy_sweep):
        outcome = execute_run(toy_sweep(), 0, 2)
        assert outcome.record.trajectory_ref is None
        assert outcome.stage_a is None

    def test_paired_runs_share_theta0(self, toy_sweep):
        # 実質 λ0 = 0 の 2 点は θ0 を共有するので同じ結果になる
        cfg = toy_sweep(lambda_grid=(0.0, 1e-300))
        a = execute_run(cfg, 0, 1).record
        b = execute_run(cfg, 1, 1).record
        assert a.final_energy == pytest.approx(b.final_energy, abs=1e-12)

    def test_budget_exhaustion_is_reported(self, toy_sweep):
        pipeline = PipelineConfig(
            OptimizerConfig(max_iters=15, grad_tolerance=1e-12),
            OptimizerConfig(max_iters=10, grad_tolerance=1e-12),
            Schedule(0.0, 15),
            eval_budget=20,
        )
        record = execute_run(toy_sweep(pipeline=pipeline), 0, 0).record
        assert record.status == RunStatus.BUDGET_EXHAUSTED
        assert record.evals_total <= 20


class TestRunSweep:
    def test_toy_sweep(self, toy_sweep, tmp_path):
        records = run_sweep(toy_sweep(), tmp_path)
        assert [r.key for r in records] == [(0.0, 0), (0.0, 1), (0.0, 2)]
        assert all(r.status == RunStatus.CONVERGED and r.delta_e < 1e-6 for r in records)
        store = ResultStore(tmp_path)
        assert store.read_meta()["n_seeds"] == 3
        assert set(store.load_trajectories()["run_key"]) == {"0.0/0"}

    def test_rerun_is_idempotent(self, toy_sweep, tmp_path):
        run_sweep(toy_sweep(), tmp_path)
        before = (tmp_path / "runs.csv").read_bytes()
        run_sweep(toy_sweep(), tmp_path)
        assert (tmp_path / "runs.csv").read_bytes() == before

    def test_partial_sweep_needs_resume(self, toy_sweep, tmp_path):
        run_sweep(toy_sweep(), tmp_path)
        runs = tmp_path / "runs.csv"
        full = runs.read_bytes()
        lines = runs.read_text(encoding="utf-8").splitlines(keepends=True)
        runs.write_text("".join(lines[:2]), encoding="utf-8")
        with pytest.raises(StoreError, match="resume"):
            run_sweep(toy_sweep(), tmp_path)
        run_sweep(toy_sweep(), tmp_path, resume=True)
        assert runs.read_bytes() == full

    def test_mismatched_meta_is_refused(self, toy_sweep, tmp_path):
        run_sweep(toy_sweep(), tmp_path)
        with pytest.raises(StoreError, match="n_seeds"):
            run_sweep(toy_sweep(n_seeds=4), tmp_path, resume=True)

    def test_runs_without_meta_are_refused(self, toy_sweep, tmp_path):
        run_sweep(toy_sweep(), tmp_path)
        (tmp_path / "sweep.meta.json").unlink()
        with pytest.raises(StoreError):
            run_sweep(toy_sweep(), tmp_path)

    def test_worker_count_does_not_change_results(self, toy_sweep, tmp_path):
        cfg = toy_sweep(lambda_grid=(0.0, 0.05), n_seeds=3)
        run_sweep(cfg, tmp_path / "serial")
        run_sweep(toy_sweep(lambda_grid=(0.0, 0.05), n_seeds=3, workers=2), tmp_path / "parallel")
        assert (tmp_path / "serial" / "runs.csv").read_bytes() == (tmp_path / "parallel" / "runs.csv").read_bytes()
