import json
import os

import numpy as np
import pytest

from ogdtrack.cost_model import (
    CostSequence,
    QuadraticTrackingCost,
    generate_random_setpoints,
    save_schedule,
    setpoint_from_input,
)
from ogdtrack.errors import CertificateUnavailableError
from ogdtrack.sim_harness import (
    RunConfig,
    SetpointSpec,
    demo_system,
    experiment_pathlength,
    experiment_tracking,
    export,
    load_summary,
    load_trajectory,
    run_closed_loop,
    summary_dict,
    sweep_csv,
    trajectory_csv,
)
from ogdtrack import cli

GOLDEN = os.path.join(os.path.dirname(__file__), "data", "golden_tracking_seed7.csv")


def demo_config_dict(**overrides):
    d = {
        "system": {"A": demo_system().A.tolist(), "B": demo_system().B.tolist()},
        "cost": {"q": 1.0, "r": 1.0},
        "horizon": 30,
        "gamma_v": 0.98,
        "gamma_x": 0.995,
        "x0": [0.0, 0.0, 0.0],
        "v0": [0.0],
        "setpoints": {"mode": "random", "change_prob": 0.1, "eta_range": [-5, 5]},
        "seed": 7,
    }
    d.update(overrides)
    return d


class TestRunConfig:
    def test_from_dict_round_trip(self):
        cfg = RunConfig.from_dict(demo_config_dict())
        assert cfg.horizon == 30 and cfg.seed == 7
        assert cfg.setpoints.change_prob == 0.1

    def test_random_mode_requires_seed(self):
        with pytest.raises(ValueError):
            RunConfig(system=demo_system(), horizon=10)

    def test_schedule_mode_requires_file(self):
        with pytest.raises(ValueError):
            SetpointSpec(mode="schedule")

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            RunConfig(system=demo_system(), horizon=0, seed=1)


class TestRunClosedLoop:
    def test_steady_start_zero_cost_zero_regret(self, demo_sys):
        eta = np.array([1.0])
        theta = setpoint_from_input(demo_sys, eta)
        seq = CostSequence([QuadraticTrackingCost(theta, eta) for _ in range(10)])
        cfg = RunConfig(system=demo_sys, horizon=10, seed=1, x0=theta, v0=eta)
        rec = run_closed_loop(cfg, seq=seq)
        assert rec.total_cost == pytest.approx(0.0, abs=1e-20)
        assert rec.regret == pytest.approx(0.0, abs=1e-12)

    def test_dynamics_consistency(self, demo_sys):
        rec = run_closed_loop(RunConfig(system=demo_sys, horizon=50, seed=3))
        prev = np.vstack([rec.x0, rec.x[:-1]])
        resid = rec.x - prev @ demo_sys.A.T - rec.u @ demo_sys.B.T
        assert np.max(np.abs(resid)) <= 1e-12

    def test_record_lengths(self, demo_sys):
        rec = run_closed_loop(RunConfig(system=demo_sys, horizon=17, seed=3))
        for arr in (rec.x, rec.u, rec.v, rec.g, rec.x_hat, rec.theta, rec.eta,
                    rec.cost_x, rec.cost_u):
            assert arr.shape[0] == 17

    def test_causality(self, demo_sys):
        """u_1..u_t depend only on costs before t."""
        base = generate_random_setpoints(demo_sys, 20, 0.5, (-5, 5), seed=10)
        tcut = 10
        alt_costs = list(base.costs[:tcut]) + [
            QuadraticTrackingCost(setpoint_from_input(demo_sys, [9.0]), [9.0])
            for _ in range(20 - tcut)
        ]
        cfg = RunConfig(system=demo_sys, horizon=20, seed=10, compute_regret=False)
        a = run_closed_loop(cfg, seq=base)
        b = run_closed_loop(cfg, seq=CostSequence(alt_costs))
        # inputs up to and including t = tcut+1 see identical history
        assert np.array_equal(a.u[: tcut + 1], b.u[: tcut + 1])
        assert not np.allclose(a.u[tcut + 1 :], b.u[tcut + 1 :])

    def test_strict_mode_refuses_bad_steps(self, demo_sys):
        cfg = RunConfig(system=demo_sys, horizon=10, seed=1, gamma_x=0.2, strict=True)
        with pytest.raises(CertificateUnavailableError):
            run_closed_loop(cfg)

    def test_advisory_mode_warns_and_skips_certificate(self, demo_sys):
        cfg = RunConfig(system=demo_sys, horizon=10, seed=1, gamma_x=0.2)
        with pytest.warns(UserWarning):
            rec = run_closed_loop(cfg)
        assert rec.certificate is None
        assert rec.total_cost > 0

    def test_schedule_mode_exact_replay(self, tmp_path, demo_sys):
        seq = generate_random_setpoints(demo_sys, 12, 0.4, (-5, 5), seed=2)
        sched = tmp_path / "sched.csv"
        save_schedule(seq, sched)
        cfg = RunConfig(
            system=demo_sys, horizon=12,
            setpoints=SetpointSpec(mode="schedule", schedule_file=str(sched)),
        )
        rec = run_closed_loop(cfg)
        direct = run_closed_loop(RunConfig(system=demo_sys, horizon=12, seed=2), seq=seq)
        assert np.array_equal(rec.u, direct.u)


class TestExperimentTracking:
    def test_csv_schema_and_rows(self, tmp_path):
        rec = experiment_tracking(seed=3, out_dir=str(tmp_path))
        text = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert text[0] == "t,x_1,x_2,x_3,u_1,theta_1,theta_2,theta_3,eta_1,cost_x,cost_u"
        assert len(text) == 31  # header + 30 rows
        cert = json.loads((tmp_path / "certificate.json").read_text())
        assert cert["bound_ok"] is True

    def test_every_setpoint_is_steady_state(self, demo_sys):
        rec = experiment_tracking(seed=5)
        for t in range(rec.T):
            resid = (np.eye(3) - demo_sys.A) @ rec.theta[t] - demo_sys.B @ rec.eta[t]
            assert np.linalg.norm(resid) <= 1e-9

    def test_bit_identical_across_invocations(self):
        a = trajectory_csv(experiment_tracking(seed=11))
        b = trajectory_csv(experiment_tracking(seed=11))
        assert a == b

    def test_matches_golden_file(self):
        rec = experiment_tracking(seed=7, backend="python")
        golden = load_trajectory(GOLDEN)
        np.testing.assert_allclose(rec.x, golden["x"], atol=1e-12)
        np.testing.assert_allclose(rec.u, golden["u"], atol=1e-12)
        np.testing.assert_allclose(rec.theta, golden["theta"], atol=1e-12)
        np.testing.assert_allclose(rec.cost_x, golden["cost_x"], atol=1e-12)


class TestExperimentSweep:
    def test_smoke_two_runs_change_probs(self):
        sweep = experiment_pathlength(num_runs=2, horizon=20, seed=0)
        assert sweep.rows[0]["change_prob"] == pytest.approx(0.125)
        assert sweep.rows[1]["change_prob"] == pytest.approx(0.25)

    def test_rows_independent_of_execution_order(self):
        fwd = experiment_pathlength(num_runs=5, horizon=15, seed=4)
        rev = experiment_pathlength(num_runs=5, horizon=15, seed=4,
                                    run_order=[5, 3, 1, 2, 4])
        assert sweep_csv(fwd) == sweep_csv(rev)

    def test_csv_schema(self, tmp_path):
        sweep = experiment_pathlength(num_runs=2, horizon=10, seed=1,
                                      out_dir=str(tmp_path))
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == ("run,change_prob,path_length,Theta_T,H_T,total_cost,"
                            "regret,comparator_regret,bound,bound_ok")
        assert len(lines) == 3

    def test_bounds_hold(self):
        sweep = experiment_pathlength(num_runs=3, horizon=30, seed=2)
        assert all(row["bound_ok"] for row in sweep.rows)

    def test_too_few_runs(self):
        with pytest.raises(ValueError):
            experiment_pathlength(num_runs=1, horizon=10, seed=0)


class TestExport:
    def test_trajectory_csv_round_trip_bit_exact(self, tmp_path, demo_sys):
        rec = run_closed_loop(RunConfig(system=demo_sys, horizon=25, seed=9))
        path = tmp_path / "run.csv"
        export(rec, path, "csv")
        back = load_trajectory(path)
        assert np.array_equal(back["x"], rec.x)
        assert np.array_equal(back["u"], rec.u)
        assert np.array_equal(back["cost_x"], rec.cost_x)

    def test_json_aggregates_round_trip_bit_exact(self, tmp_path, demo_sys):
        rec = run_closed_loop(RunConfig(system=demo_sys, horizon=25, seed=9))
        path = tmp_path / "run.json"
        export(rec, path, "json")
        back = load_summary(path)
        assert back["total_cost"] == rec.total_cost
        assert back["regret"] == rec.regret
        assert back["comparator_regret"] == rec.comparator_regret
        assert back["Theta_T"] == rec.path.Theta_T
        assert back["certificate"]["Lambda_theta"] == rec.certificate.Lambda_theta

    def test_unknown_format(self, tmp_path, demo_sys):
        rec = run_closed_loop(RunConfig(system=demo_sys, horizon=5, seed=9))
        with pytest.raises(ValueError):
            export(rec, tmp_path / "x.bin", "parquet")

    def test_io_error_carries_path(self, demo_sys):
        rec = run_closed_loop(RunConfig(system=demo_sys, horizon=5, seed=9))
        with pytest.raises(OSError, match="no/such/dir"):
            export(rec, "no/such/dir/run.csv", "csv")

    def test_benchmark_export_same_schema(self, tmp_path, demo_sys):
        from ogdtrack.offline_oracle import optimal_trajectory
        from ogdtrack.sim_harness import export_benchmark

        seq = generate_random_setpoints(demo_sys, 10, 0.3, (-5, 5), seed=4)
        opt = optimal_trajectory(demo_sys, seq, np.zeros(3))
        path = tmp_path / "benchmark.csv"
        export_benchmark(opt, seq, path)
        header = path.read_text().splitlines()[0]
        assert header == "t,x_1,x_2,x_3,u_1,theta_1,theta_2,theta_3,eta_1,cost_x,cost_u"
        back = load_trajectory(path)
        np.testing.assert_array_equal(back["x"], opt.x_star)
        assert back["cost_x"].sum() + back["cost_u"].sum() == pytest.approx(opt.total_cost)

    def test_record_predictions_flag(self, demo_sys):
        rec = run_closed_loop(
            RunConfig(system=demo_sys, horizon=10, seed=3, record_predictions=False)
        )
        assert rec.x_hat is None
        assert rec.certificate is not None  # transient constant still computed


class TestCli:
    def write_config(self, tmp_path, **overrides):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(demo_config_dict(**overrides)))
        return str(path)

    def test_simulate(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        code = cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "trajectory.csv").exists()
        assert "total_cost=" in capsys.readouterr().out

    def test_simulate_strict_bad_steps_exit_2(self, tmp_path):
        cfg = self.write_config(tmp_path, gamma_x=0.2)
        assert cli.main(["simulate", "--config", cfg, "--strict"]) == 2

    def test_simulate_numerical_blowup_exit_3(self, tmp_path):
        cfg = self.write_config(tmp_path, gamma_x=1e6, horizon=200)
        with pytest.warns(UserWarning):
            assert cli.main(["simulate", "--config", cfg]) == 3

    def test_experiment_tracking_cmd(self, tmp_path, capsys):
        out = str(tmp_path / "exp")
        code = cli.main(["experiment", "tracking", "--seed", "3", "--out", out])
        assert code == 0
        assert os.path.exists(os.path.join(out, "trajectory.csv"))

    def test_experiment_sweep_cmd(self, tmp_path, capsys):
        out = str(tmp_path / "sweep")
        code = cli.main(["experiment", "sweep", "--runs", "2", "--horizon", "10",
                         "--seed", "1", "--out", out])
        assert code == 0
        assert "bound_ok=2/2" in capsys.readouterr().out

    def test_verify_cmd(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        code = cli.main(["verify", "--config", cfg, "--seed", "5"])
        assert code == 0
        out = capsys.readouterr().out
        assert "[pass] prediction_recursion" in out
        assert '"Lambda_theta"' in out

    def test_check_cmd(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        assert cli.main(["check", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "mu=3" in out

    def test_check_strict_failure_exit_2(self, tmp_path):
        cfg = self.write_config(tmp_path, gamma_x=0.2)
        assert cli.main(["check", "--config", cfg, "--strict"]) == 2
        assert cli.main(["check", "--config", cfg]) == 0
