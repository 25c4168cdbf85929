import json

import pytest

from fedsim.cli import main


def write_cfg(tmp_path, name="cfg.json", **entries):
    path = tmp_path / name
    path.write_text(json.dumps(entries), encoding="utf-8")
    return str(path)


def run_dirs(out):
    return sorted(p for p in out.iterdir() if p.is_dir())


def tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestSolveEnergyCommand:
    def test_feasible_run_artifacts(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, **{"train.num_workers": 2})
        out = tmp_path / "runs"
        code = main(["solve-energy", "--config", cfg, "--out", str(out)])
        assert code == 0
        (run_dir,) = run_dirs(out)
        assert run_dir.name.startswith("solve-energy-") and run_dir.name.endswith("-s0")
        for artifact in ("manifest.json", "config.json", "plans.json", "trace.csv"):
            assert (run_dir / artifact).is_file()
        plans = json.loads((run_dir / "plans.json").read_text())
        assert plans["feasible"] is True and len(plans["plans"]) == 2
        trace = (run_dir / "trace.csv").read_text().splitlines()
        assert trace[0] == "worker,iteration,iterate,objective,step"
        assert len(trace) == 1 + 2 * 501
        stdout = capsys.readouterr().out
        assert "worker 0:" in stdout and "[ok]" in stdout

    def test_infeasible_exits_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, **{"train.T_l": 0.12, "train.p_out_target": 0.01})
        code = main(["solve-energy", "--config", cfg, "--out", str(tmp_path / "runs")])
        assert code == 2
        assert "[fallback]" in capsys.readouterr().out

    def test_rerun_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, **{"train.num_workers": 2})
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["solve-energy", "--config", cfg, "--out", str(a)]) == 0
        assert main(["solve-energy", "--config", cfg, "--out", str(b)]) == 0
        assert tree_bytes(a) == tree_bytes(b)

    def test_seed_override_names_run(self, tmp_path):
        cfg = write_cfg(tmp_path, **{"train.num_workers": 2})
        out = tmp_path / "runs"
        main(["solve-energy", "--config", cfg, "--out", str(out), "--seed", "7"])
        (run_dir,) = run_dirs(out)
        assert run_dir.name.endswith("-s7")
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["seed"] == 7


class TestSolvePerfCommand:
    def test_artifacts_and_stdout(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path)
        out = tmp_path / "runs"
        assert main(["solve-perf", "--config", cfg, "--out", str(out)]) == 0
        (run_dir,) = run_dirs(out)
        solution = json.loads((run_dir / "solution.json").read_text())
        assert solution["converged"] is True
        assert (run_dir / "trace.csv").read_text().splitlines()[0] == (
            "iteration,iterate,objective,step"
        )
        assert "T_l*=" in capsys.readouterr().out


class TestTrainCommand:
    def test_ledger_files(self, tmp_path, small_data_dir, capsys):
        cfg = write_cfg(
            tmp_path,
            **{
                "data.dir": str(small_data_dir),
                "train.num_workers": 2,
                "train.samples_per_worker": 150,
                "train.T_total": 0.75,
            },
        )
        out = tmp_path / "runs"
        assert main(["train", "--config", cfg, "--out", str(out), "--seed", "1"]) == 0
        (run_dir,) = run_dirs(out)
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["rounds"] == 5 and summary["seed"] == 1
        rounds = (run_dir / "rounds.csv").read_text().splitlines()
        assert len(rounds) == 6
        assert rounds[0].startswith("round,model_time,train_loss")
        assert "test accuracy" in capsys.readouterr().out

    def test_train_rerun_byte_identical(self, tmp_path, small_data_dir):
        cfg = write_cfg(
            tmp_path,
            **{
                "data.dir": str(small_data_dir),
                "train.num_workers": 2,
                "train.samples_per_worker": 100,
                "train.T_total": 0.45,
            },
        )
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["train", "--config", cfg, "--out", str(a)]) == 0
        assert main(["train", "--config", cfg, "--out", str(b)]) == 0
        assert tree_bytes(a) == tree_bytes(b)


class TestAnalyzeCommand:
    def test_passing_suite(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, **{"analyze.trials": 3000, "analyze.instances": 2})
        out = tmp_path / "runs"
        assert main(["analyze", "--config", cfg, "--out", str(out)]) == 0
        (run_dir,) = run_dirs(out)
        report = json.loads((run_dir / "report.json").read_text())
        assert report["passed"] is True and len(report["checks"]) == 9
        checks = (run_dir / "checks.csv").read_text().splitlines()
        assert len(checks) == 10
        stdout = capsys.readouterr().out
        assert stdout.count("PASS") == 9 and "all checks passed" in stdout

    def test_failing_suite_exits_1(self, tmp_path, capsys, monkeypatch):
        import fedsim.service

        monkeypatch.setattr(
            fedsim.service,
            "run_property_checks",
            lambda seed, trials, instances: [
                {"name": "doctored", "passed": False, "detail": "forced failure"}
            ],
        )
        cfg = write_cfg(tmp_path)
        assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "runs")]) == 1
        assert "FAIL" in capsys.readouterr().out


class TestErrorPaths:
    def test_missing_config_no_partial_output(self, tmp_path, capsys):
        out = tmp_path / "runs"
        code = main(["train", "--config", str(tmp_path / "absent.json"), "--out", str(out)])
        assert code == 1
        assert not out.exists()
        assert "not found" in capsys.readouterr().err

    def test_invalid_json_reported(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops", encoding="utf-8")
        assert main(["train", "--config", str(bad), "--out", str(tmp_path / "runs")]) == 1
        assert "config error" in capsys.readouterr().err

    def test_unknown_key_named(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, **{"train.speed": 3})
        assert main(["train", "--config", cfg, "--out", str(tmp_path / "runs")]) == 1
        assert "train.speed" in capsys.readouterr().err

    def test_usage_error_exits_1(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["solve-energy"])  # --config is required
        assert err.value.code == 1


class TestSweepCommand:
    def sweep_cfg(self, tmp_path, small_data_dir, **extra):
        return write_cfg(
            tmp_path,
            **{
                "data.dir": str(small_data_dir),
                "train.num_workers": 2,
                "train.samples_per_worker": 100,
                "train.T_total": 0.45,
                "sweep.kind": "latency",
                "sweep.T_l_values": [0.15, 0.225],
                "sweep.seeds": [0, 1],
                **extra,
            },
        )

    def test_grid_runs_and_plot_data(self, tmp_path, small_data_dir, capsys):
        cfg = self.sweep_cfg(tmp_path, small_data_dir)
        out = tmp_path / "runs"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        (sweep_dir,) = run_dirs(out)
        assert sweep_dir.name.startswith("sweep-")
        summary = json.loads((sweep_dir / "summary.json").read_text())
        assert summary["total_runs"] == 4 and summary["failed_runs"] == 0
        assert len(run_dirs(sweep_dir / "runs")) == 4
        plot = (sweep_dir / "plot_data.csv").read_text().splitlines()
        assert plot[0] == "kind,series,x,seed,metric,y,run_id"
        assert len(plot) == 1 + 4 * 8
        assert "4/4 runs ok" in capsys.readouterr().out

    def test_seed_flag_limits_grid(self, tmp_path, small_data_dir):
        cfg = self.sweep_cfg(tmp_path, small_data_dir)
        out = tmp_path / "runs"
        assert main(["sweep", "--config", cfg, "--out", str(out), "--seed", "5"]) == 0
        (sweep_dir,) = run_dirs(out)
        summary = json.loads((sweep_dir / "summary.json").read_text())
        assert summary["total_runs"] == 2
        assert all(r["seed"] == 5 for r in summary["runs"])

    def test_parallel_matches_serial(self, tmp_path, small_data_dir):
        cfg = self.sweep_cfg(tmp_path, small_data_dir)
        serial, parallel = tmp_path / "serial", tmp_path / "parallel"
        assert main(["sweep", "--config", cfg, "--out", str(serial)]) == 0
        assert main(["sweep", "--config", cfg, "--out", str(parallel), "--jobs", "3"]) == 0
        (a,) = run_dirs(serial)
        (b,) = run_dirs(parallel)
        assert (a / "plot_data.csv").read_bytes() == (b / "plot_data.csv").read_bytes()
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()

    def test_failed_case_recorded_and_exit_1(self, tmp_path, small_data_dir, capsys):
        cfg = self.sweep_cfg(tmp_path, small_data_dir, **{"sweep.T_l_values": [0.15, 2.0]})
        out = tmp_path / "runs"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 1
        (sweep_dir,) = run_dirs(out)
        summary = json.loads((sweep_dir / "summary.json").read_text())
        assert summary["failed_runs"] == 2  # both seeds of the oversize latency
        failed = [r for r in summary["runs"] if r["status"] == "failed"]
        assert len(failed) == 2 and all(r["error"] for r in failed)
        assert "FAILED" in capsys.readouterr().err
