import pytest
from fastapi.testclient import TestClient

from app.main import app


@pytest.fixture
def client():
    with TestClient(app) as client:
        yield client


def test_root(client):
    response = client.get("/")
    assert response.status_code == 200
    assert "running" in response.json()["message"]


def test_configs(client):
    response = client.get("/configs", params={"cores": 4})
    assert response.status_code == 200
    assert len(response.json()["configs"]) == 8


def test_configs_invalid(client):
    assert client.get("/configs", params={"cores": 0}).status_code == 400


def test_pareto(client):
    samples = [
        {"time_s": 1.0, "dynamic_energy_j": 2.0, "config": {"groups": 1, "threads_per_group": 1}},
        {"time_s": 0.5, "dynamic_energy_j": 3.0, "config": {"groups": 1, "threads_per_group": 2}},
        {"time_s": 0.5, "dynamic_energy_j": 3.0, "config": {"groups": 2, "threads_per_group": 1}},
        {"time_s": 2.0, "dynamic_energy_j": 4.0, "config": {"groups": 3, "threads_per_group": 1}},
    ]
    response = client.post("/pareto", json={"samples": samples})
    assert response.status_code == 200
    entries = response.json()["front"]["entries"]
    assert len(entries) == 2
    assert {len(e["configs"]) for e in entries} == {1, 2}

    tradeoffs = response.json()["tradeoffs"]
    assert tradeoffs["front_size"] == 2
    assert tradeoffs["performance_degradation_pct"] == pytest.approx(100.0)
    assert tradeoffs["energy_increase_pct"] == pytest.approx(50.0)
    assert tradeoffs["base"]["fastest_base"] == {"groups": 1, "threads_per_group": 2}
    assert tradeoffs["base"]["time_improvement_pct"] == 0.0
    assert tradeoffs["base"]["leanest_base"] == {"groups": 1, "threads_per_group": 1}
    assert tradeoffs["base"]["energy_saving_pct"] == 0.0


def test_pareto_rejects_bad_samples(client):
    bad = [{"time_s": -1.0, "dynamic_energy_j": 2.0, "config": {"groups": 1, "threads_per_group": 1}}]
    assert client.post("/pareto", json={"samples": bad}).status_code == 422
    assert client.post("/pareto", json={"samples": []}).status_code == 422


def test_fit_energy(client):
    rows = [(2.0, 1.0, 0.5), (1.0, 3.0, 2.0), (4.0, 0.5, 1.0), (3.0, 2.0, 2.0)]
    records = [
        {
            "config": {"groups": 1, "threads_per_group": k + 1},
            "dynamic_energy_j": 2 * T + 3 * L + S,
            "time_s": T,
            "dtlb_load_walk_cycles": L,
            "dtlb_store_walk_cycles": S,
        }
        for k, (T, L, S) in enumerate(rows)
    ]
    response = client.post("/fit-energy", json={"records": records})
    assert response.status_code == 200
    model = response.json()["model"]
    assert model["beta1"] == pytest.approx(2.0, abs=1e-6)
    assert model["beta2"] == pytest.approx(3.0, abs=1e-6)
    assert model["beta3"] == pytest.approx(1.0, abs=1e-6)


def test_fit_energy_needs_three_records(client):
    record = {
        "config": {"groups": 1, "threads_per_group": 1},
        "dynamic_energy_j": 1.0,
        "time_s": 1.0,
        "dtlb_load_walk_cycles": 1.0,
        "dtlb_store_walk_cycles": 1.0,
    }
    assert client.post("/fit-energy", json={"records": [record, record]}).status_code == 400
