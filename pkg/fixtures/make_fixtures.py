"""Regenerate the packaged fixtures.

Run from the repo root:

    python3 fixtures/make_fixtures.py

Everything is seeded, so reruns rewrite the same bytes. The fixtures are:

  fit_single_zone.json   fitted model from two synthetic days ending 2026-06-01
  bench_day.csv          one observed day (no compressor column) on that unit
  bench_day.meta.json    ground-truth electrical kWh for the day, with the
                         tolerance band estimates are held to
  weather_hot_day.csv    48 h hourly forecast file for the weather provider
  constant_temp.csv      8 h of flat temperatures; fitting this must refuse
"""

import csv
import json
import math
from pathlib import Path

import numpy as np

from smartstat.benchmarks import (
    default_ac,
    default_hysteresis,
    diurnal_outdoor,
    observations_from_trace,
    single_zone_network,
    synthesize_observations,
    uniform_state,
)
from smartstat.dataio import format_timestamp, parse_timestamp, to_doc
from smartstat.energy import decode_cycles, estimate_energy
from smartstat.fitting import FitOptions, fit_params
from smartstat.series import TimeSeries
from smartstat.thermal import ZonePreset, simulate

HERE = Path(__file__).resolve().parent
DAY_START = parse_timestamp("2026-06-01T00:00:00Z")
FIT_SEED = 3
DAY_SEED = 11
SET_TEMP = 24.0
ACTIVE_HOURS = (8.0, 20.0)
TOLERANCE_PCT = 15.0


def write_observations_csv(path: Path, obs) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "room_temp_c", "outdoor_temp_c", "set_temp_c"])
        for rec in obs:
            w.writerow([
                format_timestamp(rec.timestamp),
                f"{rec.sensed_temps['room']:.4f}",
                f"{rec.outdoor_temp:.4f}",
                "" if rec.set_temp is None else f"{rec.set_temp:.1f}",
            ])


def make_fit() -> None:
    """Two days of compressor-logged behaviour ending where the bench day starts."""
    obs = synthesize_observations(
        ZonePreset.SINGLE_ZONE,
        t0=DAY_START - 48 * 3600.0,
        duration_s=48 * 3600.0,
        set_temp=26.0,
        obs_sigma_c=0.05,
        seed=FIT_SEED,
        include_compressor=True,
    )
    ac = default_ac()
    fit = fit_params(
        ZonePreset.SINGLE_ZONE,
        obs,
        opts=FitOptions(seed=FIT_SEED),
        rated_cooling_power=ac.rated_cooling_power,
        now=obs.end,
    )
    assert fit.rmse < 0.15, f"fixture fit should be tight, rmse {fit.rmse:.3f}"
    out = HERE / "fit_single_zone.json"
    out.write_text(json.dumps(to_doc(fit), indent=2, sort_keys=True) + "\n")
    print(f"{out.name}: rmse {fit.rmse:.4f}, created_at {fit.created_at:.0f}")


def make_bench_day() -> None:
    """One monitored day: thermostat holds 24 degC between 08:00 and 20:00."""
    network = single_zone_network()
    ac = default_ac()
    dt = 60.0
    times = DAY_START + dt * np.arange(1441)
    outdoor = TimeSeries(times, diurnal_outdoor(times, mean_c=36.0, swing_c=5.0))
    hours = (times[:-1] % 86400.0) / 3600.0
    sets = np.where(
        (hours >= ACTIVE_HOURS[0]) & (hours < ACTIVE_HOURS[1]), SET_TEMP, np.nan
    )
    trace = simulate(
        network,
        uniform_state(network, DAY_START, 28.0),
        outdoor,
        sets,
        ac,
        default_hysteresis(),
        None,
        horizon_s=86400.0,
        dt=dt,
    )
    obs = observations_from_trace(
        trace, ("room",), obs_sigma_c=0.1, seed=DAY_SEED, include_compressor=False
    )
    write_observations_csv(HERE / "bench_day.csv", obs)

    active_s = dt * np.count_nonzero(~np.isnan(trace.set_temps))
    actual_kwh = (
        ac.rated_electrical_power * trace.on_seconds + ac.fan_power * active_s
    ) / 3.6e6
    meta = {
        "actual_kwh": round(actual_kwh, 4),
        "tolerance_pct": TOLERANCE_PCT,
        "set_temp": SET_TEMP,
        "active_hours": list(ACTIVE_HOURS),
    }
    (HERE / "bench_day.meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )

    # the packaged estimate must actually land inside its own band
    fit_doc = json.loads((HERE / "fit_single_zone.json").read_text())
    from smartstat.dataio import from_doc, parse_observations

    fit = from_doc(fit_doc)
    parsed = parse_observations((HERE / "bench_day.csv").read_text())
    seg = decode_cycles(parsed.series, fit)
    report = estimate_energy(seg, ac, actual_kwh=actual_kwh)
    assert report.accuracy_pct >= 100.0 - TOLERANCE_PCT, (
        f"packaged estimate off by {100 - report.accuracy_pct:.1f}%"
    )
    print(
        f"bench_day.csv: actual {actual_kwh:.3f} kWh, "
        f"estimated {report.energy_kwh:.3f} kWh "
        f"(accuracy {report.accuracy_pct:.1f}%)"
    )


def make_weather() -> None:
    times = DAY_START + 3600.0 * np.arange(49)
    temps = diurnal_outdoor(times, mean_c=38.0, swing_c=4.0)
    out = HERE / "weather_hot_day.csv"
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "temp_c"])
        for t, v in zip(times, temps):
            w.writerow([format_timestamp(t), f"{v:.2f}"])
    print(f"{out.name}: {len(times)} hourly rows, peak {temps.max():.1f} degC")


def make_constant() -> None:
    times = DAY_START + 300.0 * np.arange(97)
    out = HERE / "constant_temp.csv"
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "room_temp_c", "outdoor_temp_c", "set_temp_c"])
        for t in times:
            w.writerow([format_timestamp(t), "25.0000", "30.0000", ""])
    print(f"{out.name}: {len(times)} flat rows over 8 h")


def main() -> None:
    make_fit()
    make_bench_day()
    make_weather()
    make_constant()


if __name__ == "__main__":
    main()
