"""Command line contract tests: outputs, artifacts, exit codes."""

import csv
import json
import re
from pathlib import Path

import pytest

from smartstat.benchmarks import synthesize_monitoring_day
from smartstat.cli import main
from smartstat.control import SetpointSchedule
from smartstat.dataio import format_timestamp, from_doc

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
MODEL = str(FIXTURES / "fit_single_zone.json")
WEATHER = str(FIXTURES / "weather_hot_day.csv")
BENCH_DAY = str(FIXTURES / "bench_day.csv")
META = json.loads((FIXTURES / "bench_day.meta.json").read_text())


def write_days_csv(path: Path, n_days: int, q_scale_of) -> None:
    """Concatenated monitored days rendered the way a logger would dump them."""
    rows = []
    for day in range(n_days):
        _, obs = synthesize_monitoring_day(
            day, q_scale=q_scale_of(day), seed=5, weather_seed=9,
            include_compressor=False,
        )
        records = list(obs)
        if day < n_days - 1:
            records = records[:-1]  # the boundary sample opens the next day
        rows.extend(records)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "room_temp_c", "outdoor_temp_c", "set_temp_c"])
        for r in rows:
            w.writerow([
                format_timestamp(r.timestamp),
                f"{r.sensed_temps['room']:.4f}",
                f"{r.outdoor_temp:.4f}",
                "" if r.set_temp is None else f"{r.set_temp:.1f}",
            ])


class TestUsage:
    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "Subcommands" not in capsys.readouterr().err

    def test_unknown_option_exits_one_with_usage(self, capsys):
        assert main(["plan", "--bogus"]) == 1
        err = capsys.readouterr().err
        assert "usage error" in err
        assert "Usage: smartstat plan" in err

    def test_missing_required_option_exits_one(self, capsys):
        assert main(["estimate"]) == 1
        assert "usage error" in capsys.readouterr().err


class TestSimulate:
    def test_writes_trace_csv(self, tmp_path, capsys):
        out = tmp_path / "trace.csv"
        code = main([
            "simulate", "--duration-h", "2", "--set", "24", "--out", str(out),
        ])
        assert code == 0
        with out.open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 121
        assert set(rows[0]) == {
            "timestamp", "room_temp_c", "wall_temp_c", "outdoor_temp_c",
            "set_temp_c", "compressor_on",
        }
        assert rows[0]["compressor_on"] in ("true", "false")

    def test_idle_room_never_cools(self, capsys):
        assert main(["simulate", "--duration-h", "2", "--idle"]) == 0
        assert "compressor on 0.0%" in capsys.readouterr().out


class TestFit:
    def test_constant_file_exits_one_with_reason(self, capsys):
        code = main(["fit", "--observations", str(FIXTURES / "constant_temp.csv")])
        assert code == 1
        assert "nothing to identify" in capsys.readouterr().err

    def test_fit_then_plan_round_trip(self, tmp_path, capsys):
        model = tmp_path / "fit.json"
        code = main([
            "fit", "--observations", BENCH_DAY, "--out", str(model),
            "--rated-cooling", "3500", "--multi-start", "1",
        ])
        assert code == 0
        assert "rmse" in capsys.readouterr().out
        code = main([
            "plan", "--model", str(model), "--weather", WEATHER,
            "--alpha", "0.5", "--horizon-h", "2",
        ])
        assert code == 0


class TestPlan:
    def test_energy_only_hot_day_holds_max_candidate(self, capsys):
        code = main(["plan", "--model", MODEL, "--weather", WEATHER, "--alpha", "1"])
        assert code == 0
        out = capsys.readouterr().out
        entries = re.findall(r"^\S+ +(\d+\.\d)$", out, flags=re.M)
        assert len(entries) == 16  # 8 h horizon, 30 min slots
        assert set(entries) == {"30.0"}

    def test_comfort_only_holds_preferred(self, capsys):
        code = main([
            "plan", "--model", MODEL, "--weather", WEATHER,
            "--alpha", "0", "--preferred", "24",
        ])
        assert code == 0
        entries = re.findall(r"^\S+ +(\d+\.\d)$", capsys.readouterr().out, flags=re.M)
        assert set(entries) == {"24.0"}

    def test_schedule_artifact_round_trips(self, tmp_path, capsys):
        out = tmp_path / "schedule.json"
        code = main([
            "plan", "--model", MODEL, "--weather", WEATHER, "--alpha", "1",
            "--horizon-h", "3", "--out", str(out),
        ])
        assert code == 0
        schedule = from_doc(json.loads(out.read_text()))
        assert isinstance(schedule, SetpointSchedule)
        assert len(schedule.entries) == 6

    def test_bad_candidate_list_exits_one(self, capsys):
        code = main([
            "plan", "--model", MODEL, "--weather", WEATHER, "--alpha", "1",
            "--candidates", "26,aардварк",
        ])
        assert code == 1


class TestEstimate:
    def test_fixture_estimate_lands_in_recorded_band(self, capsys):
        assert main(["estimate", "--model", MODEL, "--observations", BENCH_DAY]) == 0
        out = capsys.readouterr().out
        kwh = float(re.search(r"estimated (\d+\.\d+) kWh", out).group(1))
        actual = META["actual_kwh"]
        assert abs(kwh - actual) <= META["tolerance_pct"] / 100.0 * actual

    def test_actual_adds_accuracy_line(self, capsys):
        code = main([
            "estimate", "--model", MODEL, "--observations", BENCH_DAY,
            "--actual-kwh", str(META["actual_kwh"]),
        ])
        assert code == 0
        out = capsys.readouterr().out
        pct = float(re.search(r"accuracy (\d+\.\d)%", out).group(1))
        assert pct >= 100.0 - META["tolerance_pct"]

    def test_missing_model_file_exits_one(self, capsys):
        code = main([
            "estimate", "--model", "no-such.json", "--observations", BENCH_DAY,
        ])
        assert code == 1


class TestPredict:
    def test_warmer_candidates_need_no_more_energy(self, capsys):
        code = main([
            "predict", "--model", MODEL, "--weather", WEATHER,
            "--candidates", "22,25,28", "--duration-h", "6",
        ])
        assert code == 0
        out = capsys.readouterr().out
        rows = [line.split() for line in out.splitlines()[1:] if line.strip()]
        kwh = [float(r[1]) for r in rows]
        assert [float(r[0]) for r in rows] == [22.0, 25.0, 28.0]
        assert all(a >= b for a, b in zip(kwh, kwh[1:]))


class TestFaults:
    def test_healthy_days_no_alerts(self, tmp_path, capsys):
        obs = tmp_path / "days.csv"
        write_days_csv(obs, 3, lambda day: 1.0)
        code = main([
            "faults", "--model", MODEL, "--observations", str(obs),
            "--warmup-days", "99",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "no alerts over 3 monitored days" in out
        assert out.count("warmup") == 3

    def test_capacity_decay_raises_alert_with_cost(self, tmp_path, capsys):
        obs = tmp_path / "days.csv"
        write_days_csv(
            obs, 24, lambda day: max(0.5, (1.0 - 0.04) ** max(0, day - 8))
        )
        code = main([
            "faults", "--model", MODEL, "--observations", str(obs),
            "--warmup-days", "5",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "ALERT" in out
        assert "beyond a healthy" in out


class TestCampaign:
    def test_named_campaigns_pass(self, capsys):
        assert main(["campaign", "analytic_rc", "persistence"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 2

    def test_unknown_campaign_exits_one(self, capsys):
        assert main(["campaign", "not_a_campaign"]) == 1
        assert "unknown campaigns" in capsys.readouterr().err


class TestServe:
    def test_help_lists_overrides(self, capsys):
        assert main(["serve", "--help"]) == 0
        out = capsys.readouterr().out
        assert "--host" in out and "--port" in out
