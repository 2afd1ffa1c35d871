import base64

import pytest
from fastapi.testclient import TestClient

from apps.api.main import app, cors_settings

client = TestClient(app)


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json().get("ok") is True
    assert r.json()["scenarios"] == 16


def test_cors_settings():
    assert cors_settings("*") == (["*"], False)
    assert cors_settings(" ") == (["*"], False)
    assert cors_settings("http://a.example, http://b.example") == (["http://a.example", "http://b.example"], True)
    with pytest.raises(ValueError):
        cors_settings("*,http://a.example")


def test_catalog_endpoint():
    r = client.get("/scenarios/catalog")
    assert r.status_code == 200
    scenarios = r.json()["scenarios"]
    assert len(scenarios) == 16
    assert scenarios[0]["slug"] == "retail_30_fit_8"
    assert scenarios[0]["tariff"]["feed_in_rate"] == 0.08


def test_validate_endpoint():
    ok = client.post("/scenarios/validate", json={"config": {"name": "mine", "tariff.feed_in_rate": 0.05}})
    assert ok.status_code == 200
    assert ok.json() == {"ok": True, "diagnostics": []}

    bad = client.post("/scenarios/validate", json={"config": {"name": "mine", "tariff.other_charge": -0.1}})
    assert bad.status_code == 200
    body = bad.json()
    assert body["ok"] is False
    assert body["diagnostics"][0]["field"] == "tariff.other_charge"


def test_run_endpoint():
    payload = {"scenario": "Retail_30 FIT_8", "start_hour": 4080, "hours": 48}
    r = client.post("/scenarios/run", json=payload)
    assert r.status_code == 200
    body = r.json()
    assert body["scenario"] == "Retail_30 FIT_8"
    assert body["status"] == "ok"
    assert abs(body["capacities"]["n_pv_kw"] - 10.0) < 1e-6
    assert body["kkt"]["ok"] is True
    assert body["kkt"]["coupling"] is None
    assert 0.0 <= body["metrics"]["sc_rate"] <= 1.0


def test_run_endpoint_rejects_bad_requests():
    unknown = client.post("/scenarios/run", json={"scenario": "Retail_99 FIT_1", "hours": 24})
    assert unknown.status_code == 400
    invalid = client.post(
        "/scenarios/run", json={"scenario": "Retail_30 FIT_8", "hours": 24, "config": {"tariff.other_charge": -1}}
    )
    assert invalid.status_code == 400


def test_report_endpoint():
    payload = {
        "scenario": "Retail_30 FIT_8",
        "metrics": {"pv_capacity": 10.0, "sc_rate": 0.38, "regime": "F", "flags": "", "mean_wholesale_price": None},
        "note": "synthetic profiles",
    }
    r = client.post("/report", json=payload)
    assert r.status_code == 200
    pdf = base64.b64decode(r.json()["pdf_base64"])
    assert pdf.startswith(b"%PDF")

    empty = client.post("/report", json={"scenario": "x", "metrics": {}})
    assert empty.status_code == 400
