import pytest
from fastapi.testclient import TestClient

from fedsim import __version__
from fedsim.api import app
from fedsim.config import ConfigError, config_hash, validate_config
from fedsim.service import (
    SolveRequest,
    analyze_service,
    effective_config,
    solve_energy_service,
    solve_perf_service,
    train_service,
)


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


class TestEffectiveConfig:
    def test_seed_override_changes_hash(self):
        base = effective_config({}, None)
        overridden = effective_config({}, 9)
        assert base["seed"] == 0 and overridden["seed"] == 9
        assert config_hash(base) != config_hash(overridden)

    def test_no_override_keeps_config_seed(self):
        cfg = effective_config({"seed": 4}, None)
        assert cfg["seed"] == 4
        assert cfg == validate_config({"seed": 4})

    def test_invalid_config_propagates(self):
        with pytest.raises(ConfigError):
            effective_config({"bogus.key": 1}, None)


class TestEnergyService:
    def test_feasible_solution_fields(self):
        resp = solve_energy_service(SolveRequest(config={"train.num_workers": 3}))
        assert resp.version == __version__
        assert resp.latency == 0.15
        assert resp.targets == [0.1, 0.1, 0.1]
        assert resp.feasible and not resp.fallback_used
        assert len(resp.plans) == 3 and len(resp.traces) == 3
        assert resp.round_energy == pytest.approx(3 * resp.plans[0].round_energy)
        for trace in resp.traces:
            assert trace[0].iteration == 0
            assert len(trace) == 501

    def test_per_worker_targets(self):
        resp = solve_energy_service(
            SolveRequest(
                config={"train.num_workers": 2, "train.p_out_target": [0.1, 0.2]}
            )
        )
        assert resp.targets == [0.1, 0.2]
        assert resp.plans[0].outage == pytest.approx(0.1, abs=1e-9)
        assert resp.plans[1].outage == pytest.approx(0.2, abs=1e-9)

    def test_infeasible_fallback_flagged(self):
        resp = solve_energy_service(
            SolveRequest(config={"train.T_l": 0.12, "train.p_out_target": 0.01})
        )
        assert not resp.feasible and resp.fallback_used
        assert resp.worker_feasible == [False] * 10
        for plan in resp.plans:
            assert plan.power == 1.0

    def test_fallback_disabled_is_config_error(self):
        with pytest.raises(ConfigError, match="infeasible"):
            solve_energy_service(
                SolveRequest(
                    config={
                        "train.T_l": 0.12,
                        "train.p_out_target": 0.01,
                        "train.allow_fallback": False,
                    }
                )
            )

    def test_from_b_rejected(self):
        with pytest.raises(ConfigError, match="from_b"):
            solve_energy_service(
                SolveRequest(
                    config={
                        "train.mode": "alg2",
                        "train.b": 0.01,
                        "train.p_out_target": "from_b",
                    }
                )
            )

    def test_optimize_latency_rejected(self):
        with pytest.raises(ConfigError, match="solve-perf"):
            solve_energy_service(SolveRequest(config={"train.T_l": "optimize"}))

    def test_target_range_checked(self):
        with pytest.raises(ConfigError, match="outside"):
            solve_energy_service(SolveRequest(config={"train.p_out_target": 1.5}))


class TestPerfService:
    def test_solution_fields(self):
        resp = solve_perf_service(SolveRequest(config={"train.num_workers": 4}))
        assert resp.converged
        assert 0.05 < resp.latency < 50.0
        assert resp.rounds == int(50.0 // resp.latency)
        assert len(resp.plans) == 4
        assert resp.trace[0].iteration == 0
        assert resp.objective > 0

    def test_deterministic(self):
        a = solve_perf_service(SolveRequest(config={}))
        b = solve_perf_service(SolveRequest(config={}))
        assert a == b


class TestTrainService:
    def test_round_ledger(self, small_data_dir):
        resp = train_service(
            SolveRequest(
                config={
                    "data.dir": str(small_data_dir),
                    "train.num_workers": 3,
                    "train.samples_per_worker": 200,
                    "train.T_total": 0.75,
                },
                seed=2,
            )
        )
        assert resp.summary["rounds"] == 5
        assert resp.summary["seed"] == 2
        assert len(resp.rounds) == 5
        row = resp.rounds[0]
        assert {"round", "model_time", "train_loss", "round_energy"} <= set(row)
        assert {f"outage_w{m}" for m in range(3)} <= set(row)

    def test_missing_corpus_raises(self, tmp_path, monkeypatch):
        monkeypatch.delenv("FEDSIM_DATA_DIR", raising=False)
        with pytest.raises(FileNotFoundError):
            train_service(
                SolveRequest(config={"data.dir": str(tmp_path / "nowhere")})
            )


class TestAnalyzeService:
    def test_checks_pass(self):
        resp = analyze_service(
            SolveRequest(config={"analyze.trials": 5000, "analyze.instances": 3})
        )
        assert resp.passed
        assert len(resp.checks) == 9
        assert all(c.detail for c in resp.checks)


class TestHttpEndpoints:
    def test_health(self, client):
        got = client.get("/health").json()
        assert got == {"status": "ok", "version": __version__}

    def test_solve_energy_route(self, client):
        r = client.post("/solve/energy", json={"config": {"train.num_workers": 2}})
        assert r.status_code == 200
        body = r.json()
        assert body["feasible"] is True
        assert len(body["plans"]) == 2

    def test_bad_config_is_400(self, client):
        r = client.post("/solve/energy", json={"config": {"train.mode": "alg9"}})
        assert r.status_code == 400
        assert "train.mode" in r.json()["detail"]

    def test_domain_error_is_422(self, client, tmp_path, monkeypatch):
        monkeypatch.delenv("FEDSIM_DATA_DIR", raising=False)
        r = client.post(
            "/train", json={"config": {"data.dir": str(tmp_path / "missing")}}
        )
        assert r.status_code == 422

    def test_solve_perf_route(self, client):
        r = client.post("/solve/perf", json={"config": {}, "seed": 1})
        assert r.status_code == 200
        assert r.json()["converged"] is True

    def test_analyze_route(self, client):
        r = client.post(
            "/analyze",
            json={"config": {"analyze.trials": 2000, "analyze.instances": 2}},
        )
        assert r.status_code == 200
        assert r.json()["passed"] is True

    def test_train_route(self, client, small_data_dir):
        r = client.post(
            "/train",
            json={
                "config": {
                    "data.dir": str(small_data_dir),
                    "train.num_workers": 2,
                    "train.samples_per_worker": 150,
                    "train.T_total": 0.45,
                },
                "seed": 0,
            },
        )
        assert r.status_code == 200
        assert r.json()["summary"]["rounds"] == 3
