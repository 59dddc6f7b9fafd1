"""HTTP service tests against the packaged two-unit bench deployment."""

import json
from dataclasses import replace
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from smartstat.dataio import WeatherProvider
from smartstat.errors import InvalidParameter
from smartstat.service import create_app, load_config
from smartstat.service.registry import ServiceConfig, UnitConfig

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
CONFIG = FIXTURES / "service.yaml"
DAY_CSV = (FIXTURES / "bench_day.csv").read_text()
META = json.loads((FIXTURES / "bench_day.meta.json").read_text())


def make_client(tmp_path) -> TestClient:
    cfg = replace(load_config(CONFIG), data_dir=tmp_path)
    return TestClient(create_app(cfg))


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    return make_client(tmp_path_factory.mktemp("service-data"))


@pytest.fixture(scope="module")
def ingested(client):
    resp = client.post("/api/units/unit-a/observations", content=DAY_CSV)
    assert resp.status_code == 200
    return resp.json()


class TestConfig:
    def test_loads_fixture_deployment(self):
        cfg = load_config(CONFIG)
        assert [u.unit_id for u in cfg.units] == ["unit-a", "unit-b"]
        assert cfg.provider.kind == "file"
        assert cfg.units[0].fit_snapshot.endswith("fit_single_zone.json")
        assert cfg.units[1].fit_snapshot is None

    def test_listen_env_override(self):
        cfg = load_config(CONFIG, env={"SMARTSTAT_LISTEN": "0.0.0.0:9001"})
        assert (cfg.host, cfg.port) == ("0.0.0.0", 9001)

    def test_provider_url_env_override(self):
        cfg = load_config(
            CONFIG, env={"SMARTSTAT_PROVIDER_URL": "http://wx/{lat}/{lon}/{hours}"}
        )
        assert cfg.provider.kind == "http"
        assert cfg.provider.url_template == "http://wx/{lat}/{lon}/{hours}"

    def test_duplicate_unit_ids_refused(self):
        provider = WeatherProvider(kind="file", path=str(FIXTURES / "weather_hot_day.csv"))
        units = (UnitConfig(unit_id="u1"), UnitConfig(unit_id="u1"))
        with pytest.raises(InvalidParameter, match="unique"):
            ServiceConfig(units=units, provider=provider, data_dir=Path("unused"))


class TestUnits:
    def test_listing_names_both_units(self, client):
        resp = client.get("/api/units")
        assert resp.status_code == 200
        rows = {r["unit_id"]: r for r in resp.json()}
        assert rows["unit-a"]["fitted"] is True
        assert rows["unit-b"]["fitted"] is False

    def test_unknown_unit_is_404(self, client):
        for verb, url, kwargs in [
            ("get", "/api/units/ghost/state", {}),
            ("put", "/api/units/ghost/knob", {"json": {"alpha": 0.5}}),
            ("post", "/api/units/ghost/observations", {"content": "x"}),
        ]:
            assert getattr(client, verb)(url, **kwargs).status_code == 404


class TestObservations:
    def test_first_batch_accepted(self, ingested):
        assert ingested == {"accepted": 1441, "rejected": 0, "duplicates": 0}

    def test_resubmission_accepts_nothing(self, client, ingested):
        resp = client.post("/api/units/unit-a/observations", content=DAY_CSV)
        assert resp.status_code == 200
        body = resp.json()
        assert body["accepted"] == 0
        assert body["duplicates"] == 1441

    def test_garbage_body_is_422(self, client):
        resp = client.post("/api/units/unit-a/observations", content="not,a,contract\n1,2,3\n")
        assert resp.status_code == 422
        assert "missing" in resp.json()["detail"]


class TestIngestValidation:
    # own deployment: the bad batch moves the unit clock forward

    def test_bad_rows_counted_rejected(self, tmp_path):
        client = make_client(tmp_path)
        csv_text = (
            "timestamp,room_temp_c,outdoor_temp_c,set_temp_c\n"
            "2026-06-03T00:00:00Z,26.0,33.0,\n"
            "2026-06-03T00:01:00Z,95.0,33.0,\n"
        )
        body = client.post("/api/units/unit-a/observations", content=csv_text).json()
        assert body == {"accepted": 1, "rejected": 1, "duplicates": 0}


class TestState:
    def test_state_reflects_latest_record(self, client, ingested):
        body = client.get("/api/units/unit-a/state").json()
        assert body["observed_at"] == "2026-06-02T00:00:00Z"
        assert 25.0 < body["temperatures"]["room"] < 40.0
        assert body["model"]["fitted"] is True
        assert body["model"]["expired"] is False
        assert body["model"]["age_days"] == pytest.approx(1.0, abs=0.01)

    def test_unfitted_unit_still_reports_state(self, client):
        body = client.get("/api/units/unit-b/state").json()
        assert body["model"]["fitted"] is False
        assert body["observed_at"] is None
        assert body["temperatures"] == {}


class TestKnob:
    def test_out_of_range_alpha_is_422_with_field(self, client):
        resp = client.put("/api/units/unit-a/knob", json={"alpha": 1.2})
        assert resp.status_code == 422
        detail = resp.json()["detail"]
        assert detail[0]["loc"] == ["body", "alpha"]

    def test_knob_change_returns_replanned_schedule(self, client, ingested):
        resp = client.put("/api/units/unit-a/knob", json={"alpha": 1.0})
        assert resp.status_code == 200
        body = resp.json()
        assert body["control"]["alpha"] == 1.0
        assert len(body["schedule"]["entries"]) == 4  # 2 h horizon / 30 min slots
        assert body["diagnostics"]["method"] == "exhaustive"

    def test_alpha_extremes_trade_energy_for_comfort(self, client, ingested):
        energy = {}
        for alpha in (0.0, 1.0):
            body = client.put("/api/units/unit-a/knob", json={"alpha": alpha}).json()
            energy[alpha] = body["diagnostics"]["predicted_energy_kwh"]
        assert energy[1.0] <= energy[0.0]

    def test_active_set_temp_follows_new_plan(self, client, ingested):
        planned = client.put("/api/units/unit-a/knob", json={"alpha": 0.5}).json()
        state = client.get("/api/units/unit-a/state").json()
        assert state["active_set_temp"] == planned["schedule"]["entries"][0]["set_temp"]


class TestPreference:
    def test_negative_band_is_422(self, client):
        resp = client.put(
            "/api/units/unit-a/preference",
            json={"preferred_temp": 24.0, "band": -1.0},
        )
        assert resp.status_code == 422

    def test_preference_change_replans(self, client, ingested):
        resp = client.put(
            "/api/units/unit-a/preference",
            json={"preferred_temp": 25.0, "band": 1.0},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["control"]["preferred_temp"] == 25.0
        assert body["control"]["band"] == 1.0
        assert len(body["schedule"]["entries"]) == 4


class TestWhatIf:
    def test_hotter_settings_cost_no_more(self, client, ingested):
        resp = client.get(
            "/api/units/unit-a/whatif",
            params={"duration_h": 2, "set": [24, 26, 28]},
        )
        assert resp.status_code == 200
        entries = resp.json()["entries"]
        assert [e["set_temp"] for e in entries] == [24.0, 26.0, 28.0]
        kwh = [e["energy_kwh"] for e in entries]
        assert all(a >= b for a, b in zip(kwh, kwh[1:]))

    def test_missing_candidates_is_422(self, client):
        resp = client.get("/api/units/unit-a/whatif", params={"duration_h": 2})
        assert resp.status_code == 422

    def test_duplicate_candidates_is_422(self, client):
        resp = client.get(
            "/api/units/unit-a/whatif",
            params={"duration_h": 2, "set": [24, 24]},
        )
        assert resp.status_code == 422

    def test_unfitted_unit_is_409(self, client):
        resp = client.get(
            "/api/units/unit-b/whatif",
            params={"duration_h": 2, "set": [24, 26]},
        )
        assert resp.status_code == 409
        assert resp.json()["error"] == "StaleModel"


class TestPlan:
    def test_plan_returns_active_schedule(self, client, ingested):
        resp = client.get("/api/units/unit-a/plan")
        assert resp.status_code == 200
        body = resp.json()
        sched = body["schedule"]
        assert len(sched["entries"]) == 4
        assert sched["start"] <= sched["entries"][0]["start"]
        assert body["diagnostics"]["predicted_energy_kwh"] >= 0.0

    def test_unfitted_unit_is_409(self, client):
        assert client.get("/api/units/unit-b/plan").status_code == 409


class TestEnergy:
    def test_estimate_matches_recorded_truth(self, client, ingested):
        resp = client.get(
            "/api/units/unit-a/energy",
            params={"from": "2026-06-01T08:00:00Z", "to": "2026-06-01T20:00:00Z"},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["method"] == "estimated"
        assert body["cycles"] >= 1
        actual = META["actual_kwh"]
        band = META["tolerance_pct"] / 100.0
        assert abs(body["energy_kwh"] - actual) <= band * actual

    def test_empty_window_is_422(self, client, ingested):
        resp = client.get(
            "/api/units/unit-a/energy",
            params={"from": "2026-07-01T00:00:00Z", "to": "2026-07-02T00:00:00Z"},
        )
        assert resp.status_code == 422

    def test_backwards_window_is_422(self, client, ingested):
        resp = client.get(
            "/api/units/unit-a/energy",
            params={"from": "2026-06-02T00:00:00Z", "to": "2026-06-01T00:00:00Z"},
        )
        assert resp.status_code == 422


class TestTrace:
    def test_trace_serves_decoded_compressor_flags(self, client, ingested):
        resp = client.get("/api/units/unit-a/trace", params={"hours": 14})
        assert resp.status_code == 200
        points = resp.json()["points"]
        assert len(points) == 14 * 60 + 1
        flags = [p["compressor_on"] for p in points]
        assert any(flags) and not all(flags)
        active = [p for p in points if p["set_temp_c"] is not None]
        assert active and all(p["set_temp_c"] == 24.0 for p in active)


class TestHealth:
    def test_one_complete_day_monitored(self, client, ingested):
        body = client.get("/api/units/unit-a/health").json()
        assert body["days_seen"] == 1
        assert body["armed"] is False  # far from warmed up
        assert body["detector_state"] == "healthy"
        assert body["alerts"] == []
        latest = body["latest"]
        assert latest["valid"] is True
        assert 0.0 < latest["duty_cycle"] < 1.0
        assert latest["qhat"] == pytest.approx(3500.0, rel=0.1)

    def test_unfitted_unit_reports_empty_history(self, client):
        body = client.get("/api/units/unit-b/health").json()
        assert body["days_seen"] == 0
        assert body["latest"] is None
        assert body["history"] == []


class TestStaleModel:
    def test_observations_far_future_expire_the_model(self, tmp_path):
        client = make_client(tmp_path)
        # 20 days past the fit: the unit clock moves with its data
        csv_text = (
            "timestamp,room_temp_c,outdoor_temp_c,set_temp_c\n"
            "2026-06-21T00:00:00Z,27.0,33.0,\n"
            "2026-06-21T00:01:00Z,27.0,33.0,\n"
        )
        assert client.post("/api/units/unit-a/observations", content=csv_text).status_code == 200
        resp = client.get(
            "/api/units/unit-a/whatif", params={"duration_h": 2, "set": [24, 26]}
        )
        assert resp.status_code == 409
        assert resp.json()["error"] == "StaleModel"
        state = client.get("/api/units/unit-a/state").json()
        assert state["model"]["expired"] is True


class TestPersistence:
    def test_restart_resumes_where_it_stopped(self, tmp_path):
        first = make_client(tmp_path)
        assert first.post("/api/units/unit-a/observations", content=DAY_CSV).status_code == 200
        planned = first.put("/api/units/unit-a/knob", json={"alpha": 0.75}).json()

        second = make_client(tmp_path)
        state = second.get("/api/units/unit-a/state").json()
        assert state["control"]["alpha"] == 0.75
        assert state["observed_at"] == "2026-06-02T00:00:00Z"
        health = second.get("/api/units/unit-a/health").json()
        assert health["days_seen"] == 1
        plan = second.get("/api/units/unit-a/plan").json()
        assert plan["schedule"] == planned["schedule"]
        resub = second.post("/api/units/unit-a/observations", content=DAY_CSV).json()
        assert resub["accepted"] == 0
