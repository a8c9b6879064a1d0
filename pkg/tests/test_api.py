"""
Tests de l'API FastAPI (client de test, base SQLite temporaire)
"""
from datetime import datetime

import pytest
from fastapi.testclient import TestClient

from app.main import app
from app.models import RunRecord
from app.schemas import RunRecordResponse

FIVE_BARS = [[-1, -2], [-1, 3], [1, -1], [1, 2], [0, 1]]


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


# ---------- racine ----------

def test_root(client):
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["status"] == "online"
    assert "/api/bounds/threshold" in response.json()["endpoints"]


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "healthy"
    assert body["components"]["database"] == "connected"
    assert body["limits"]["dense_budget"] == 4096


# ---------- bornes ----------

def test_bounds_table(client):
    response = client.get("/api/bounds", params={"S_grid": "7,40"})
    assert response.status_code == 200
    reports = response.json()
    assert [r["series_convergent"] for r in reports] == [False, True]
    assert reports[1]["peierls_bound"] == pytest.approx(0.47355, abs=1e-5)


def test_threshold(client):
    assert client.get("/api/bounds/threshold").json()["S_star"] == pytest.approx(39.2, abs=0.1)


def test_bound_for_invalid_spin(client):
    response = client.get("/api/bounds/-1")
    assert response.status_code == 400
    assert response.json()["error"] == "invalid-parameter"


# ---------- oracles exacts ----------

def test_enumeration(client):
    payload = {"twice_S": 1, "ell": 1, "beta": 1, "n": 4, "pairs": [[0, 1]]}
    body = client.post("/api/enumeration", json=payload).json()
    assert body["Z_fraction"] == "127277/16384"
    assert set(body["event_probabilities"]) == {"empty", "0<->1"}


def test_transfer_matrix(client):
    payload = {"twice_S": 1, "ell": 2, "beta": 1, "n": 2, "method": "transfer-matrix", "pairs": [[0, 1]]}
    body = client.post("/api/enumeration", json=payload).json()
    assert body["method"] == "transfer-matrix"


def test_too_large_enumeration(client):
    payload = {"twice_S": 1, "ell": 8, "beta": 8, "n": 64}
    response = client.post("/api/enumeration", json=payload)
    assert response.status_code == 400
    assert response.json()["error"] == "too-large-instance"


def test_spectrum(client):
    body = client.get("/api/diagonalization/spectrum", params={"twice_S": 1, "ell": 2}).json()
    assert body["ground_energy"] == pytest.approx(-2.3660254, abs=1e-7)
    assert len(body["energies"]) == 16


def test_correlation(client):
    params = {"x": 0, "y": 1, "twice_S": 1, "ell": 1, "beta_q": 50}
    assert client.get("/api/diagonalization/correlation", params=params).json()["value"] == pytest.approx(-0.25)
    params["y"] = 4
    assert client.get("/api/diagonalization/correlation", params=params).status_code == 400


# ---------- contours ----------

def test_loops(client):
    body = client.post("/api/contours/loops", json={"ell": 2, "beta": 1, "n": 4, "bars": FIVE_BARS}).json()
    assert body["total_loops"] == 3


def test_census(client):
    body = client.post("/api/contours", json={"ell": 2, "beta": 1, "n": 4, "bars": FIVE_BARS}).json()
    assert len(body["contours"]) == 1
    assert body["contours"][0]["int1_size"] == 8
    assert body["omega_alpha"] == [-1]


def test_census_rejects_invalid_configuration(client):
    response = client.post("/api/contours", json={"ell": 2, "beta": 1, "n": 4, "bars": [[0, 0], [5, 1]]})
    assert response.status_code == 422
    assert len(response.json()["detail"]) == 2


def test_census_rejects_winding_loops(client):
    response = client.post("/api/contours", json={"ell": 2, "beta": 1, "n": 4, "bars": []})
    assert response.status_code == 400


# ---------- simulations ----------

def test_simulation_lifecycle(client):
    payload = {
        "params": {"twice_S": 1, "ell": 1, "beta": 1, "n": 2, "n_sweeps": 200, "n_burnin": 20, "seed": 3},
        "observables": {"pairs": [[0, 1]]},
    }
    response = client.post("/api/simulations", json=payload)
    assert response.status_code == 200
    record = response.json()
    assert record["command"] == "simulate"
    assert record["seed"] == 3
    assert record["result"]["n_measurements"] == 180

    fetched = client.get(f"/api/simulations/{record['id']}").json()
    assert fetched["result"] == record["result"]
    assert any(r["id"] == record["id"] for r in client.get("/api/simulations").json())


def test_simulation_too_long(client):
    payload = {"params": {"twice_S": 1, "ell": 4, "beta": 8, "n": 64, "n_sweeps": 10 ** 6, "seed": 1}}
    assert client.post("/api/simulations", json=payload).status_code == 400


def test_unknown_simulation(client):
    assert client.get("/api/simulations/999999").status_code == 404


def test_run_record_response_reads_orm_rows():
    record = RunRecord(
        id=7, command="simulate", seed="18446744073709551615",
        config={"ell": 1}, result={"value": {}}, created_at=datetime(2024, 1, 1),
    )
    response = RunRecordResponse.model_validate(record)
    assert response.seed == 2 ** 64 - 1
    assert response.config == {"ell": 1}
    assert RunRecordResponse.model_config["from_attributes"] is True
