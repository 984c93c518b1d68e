import pytest
from fastapi.testclient import TestClient

from src.api.server import app
from tests.integration.data_factory import DataFactory

client = TestClient(app)


@pytest.fixture(autouse=True)
def isolated_runs(output_dir):
    return output_dir


api_test_cases = [
    {
        "name": "Root",
        "method": "GET",
        "url": "/",
        "payload": None,
        "expected_status": 200,
        "check_fn": lambda r: "message" in r.json()
    },
    {
        "name": "Solve Modular",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload(DataFactory.modular_instance()),
        "expected_status": 200,
        "check_fn": lambda r: r.json()["minimizer"] == [1] and r.json()["final_rejection_ratio"] == 1.0
    },
    {
        "name": "Solve Cut",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload(DataFactory.cut_instance()),
        "expected_status": 200,
        "check_fn": lambda r: r.json()["minimizer"] == [0] and abs(r.json()["value"] + 2.0) < 1e-9
    },
    {
        "name": "Solve Iwata Frank-Wolfe Unscreened",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload(DataFactory.iwata_instance(6), solver="frank_wolfe",
                                             screening="none", eps=1e-6),
        "expected_status": 200,
        "check_fn": lambda r: r.json()["n_triggers"] == 0 and r.json()["screening"] == "none"
    },
    {
        "name": "Solve Random Family",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload(DataFactory.random_instance("grid_cut", p=12, seed=4)),
        "expected_status": 200,
        "check_fn": lambda r: r.json()["instance"] == "grid_cut-12-4"
    },
    {
        "name": "Solve Rejects Data Files",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload({**DataFactory.iwata_instance(4), "data_paths": {"image": "x.pgm"}}),
        "expected_status": 422,
        "check_fn": None
    },
    {
        "name": "Solve Invalid Rho",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload(DataFactory.iwata_instance(4), rho=1.5),
        "expected_status": 422,
        "check_fn": None
    },
    {
        "name": "Solve Missing Weights",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload({"name": "m", "kind": "modular", "p": 2}),
        "expected_status": 422,
        "check_fn": lambda r: "weights" in r.json()["detail"]
    },
    {
        "name": "Solve Concave Weight Length Mismatch",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload(DataFactory.concave_instance(p=3, weights=(1.0, 2.0))),
        "expected_status": 422,
        "check_fn": lambda r: "length 3" in r.json()["detail"]
    },
    {
        "name": "Solve Rejects Path In Instance Name",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload(DataFactory.iwata_instance(4, name="../../escaped/x"), persist=True),
        "expected_status": 422,
        "check_fn": None
    },
    {
        "name": "Solve Negative Edge Weight",
        "method": "POST",
        "url": "/api/solve",
        "payload": DataFactory.solve_payload(DataFactory.cut_instance(edges=((0, 1, -1.0),))),
        "expected_status": 400,
        "check_fn": None
    },
    {
        "name": "Verify Small Audit",
        "method": "POST",
        "url": "/api/verify",
        "payload": {"trials": 4, "p_max": 5, "seed": 3},
        "expected_status": 200,
        "check_fn": lambda r: r.json()["passed"] is True and r.json()["instances"] == 4
    },
    {
        "name": "Verify Ground Set Too Large",
        "method": "POST",
        "url": "/api/verify",
        "payload": {"trials": 1, "p_max": 30},
        "expected_status": 422,
        "check_fn": None
    },
    {
        "name": "Verify Too Many Trials",
        "method": "POST",
        "url": "/api/verify",
        "payload": {"trials": 100000},
        "expected_status": 422,
        "check_fn": None
    },
    {
        "name": "List Runs (Empty)",
        "method": "GET",
        "url": "/api/runs",
        "payload": None,
        "expected_status": 200,
        "check_fn": lambda r: r.json() == []
    },
    {
        "name": "Get Missing Run",
        "method": "GET",
        "url": "/api/runs/does-not-exist",
        "payload": None,
        "expected_status": 404,
        "check_fn": None
    },
    {
        "name": "Get Hidden Run Name",
        "method": "GET",
        "url": "/api/runs/.hidden",
        "payload": None,
        "expected_status": 400,
        "check_fn": None
    },
]


@pytest.mark.parametrize("case", api_test_cases, ids=lambda c: c["name"])
def test_universal_api(case):
    """
    Universal parameterized test for API endpoints.
    Covers happy paths, error states and schema validation.
    """
    if case["method"] == "GET":
        response = client.get(case["url"])
    else:
        response = client.post(case["url"], json=case["payload"])

    assert response.status_code == case["expected_status"], response.text
    if case["check_fn"]:
        assert case["check_fn"](response)


def test_persisted_run_is_listed():
    payload = DataFactory.solve_payload(DataFactory.iwata_instance(8), persist=True)
    solved = client.post("/api/solve", json=payload)
    assert solved.status_code == 200

    runs = client.get("/api/runs").json()
    assert len(runs) == 1
    name = runs[0]["name"]
    assert name.startswith("iwata-8-")
    assert runs[0]["summary"] == solved.json()

    detail = client.get(f"/api/runs/{name}")
    assert detail.status_code == 200
    assert detail.json()["minimizer"] == solved.json()["minimizer"]


def test_escaping_instance_name_writes_nothing(output_dir):
    payload = DataFactory.solve_payload(DataFactory.iwata_instance(4, name="../../escaped/x"), persist=True)
    assert client.post("/api/solve", json=payload).status_code == 422
    assert not (output_dir.parent.parent / "escaped").exists()
    assert not (output_dir.parent / "escaped").exists()
    assert client.get("/api/runs").json() == []
