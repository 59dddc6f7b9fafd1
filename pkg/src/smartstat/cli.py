"""Command line client over the core package and the HTTP service.

Subcommands mirror the engine's workflow: simulate a unit, fit its thermal
parameters, plan setpoints, estimate or predict energy, watch for fault
symptoms, run the verification campaigns, or serve the HTTP API.

Exit codes: 0 on success, 1 when the input or configuration is at fault,
2 when something failed at runtime.
"""

import csv
import json
import math
from pathlib import Path

import click
import numpy as np

from . import __version__
from .benchmarks import (
    benchmark_network,
    default_ac,
    default_hysteresis,
    diurnal_outdoor,
    uniform_state,
)
from .campaigns import CAMPAIGNS, run_campaign
from .control import CETConfig, PlantModel
from .control import plan as plan_setpoints
from .dataio import (
    format_timestamp,
    from_doc,
    parse_observations,
    parse_timestamp,
    to_doc,
)
from .energy import DecodeConfig, decode_cycles, estimate_energy, predict_energy
from .errors import SmartstatError, ValidationError
from .fitting import FitOptions, FitResult, ObservationSeries, fit_params
from .health import (
    DEFAULT_WARMUP_DAYS,
    MonitorState,
    counterfactual_report,
    daily_features,
    monitor_day,
)
from .series import TimeSeries
from .thermal import ThermalState, ZonePreset, simulate

PRESETS = [p.value for p in ZonePreset]


def _load_fit(path: str) -> FitResult:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read model file {path}: {exc}") from exc
    fit = from_doc(doc)
    if not isinstance(fit, FitResult):
        raise ValidationError(f"{path} does not hold a fitted model")
    return fit


def _load_observations(path: str, preset: ZonePreset) -> ObservationSeries:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read observations {path}: {exc}") from exc
    parsed = parse_observations(text, zone=preset.primary_zone)
    if parsed.rejects:
        click.echo(f"note: {len(parsed.rejects)} rejected rows in {path}", err=True)
    return parsed.series


def _load_weather(path: str) -> TimeSeries:
    """Forecast CSV: timestamp plus temp_c (or outdoor_temp_c) columns."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ValidationError(f"cannot read weather {path}: {exc}") from exc
    if not rows:
        raise ValidationError(f"weather file {path} has no rows")
    col = "temp_c" if "temp_c" in rows[0] else "outdoor_temp_c"
    if "timestamp" not in rows[0] or col not in rows[0]:
        raise ValidationError(f"weather file {path} needs timestamp and temp_c columns")
    times = np.array([parse_timestamp(r["timestamp"]) for r in rows])
    temps = np.array([float(r[col]) for r in rows])
    return TimeSeries(times, temps)


def _parse_candidates(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ValidationError(f"bad candidate list {text!r}: {exc}") from exc


@click.group()
@click.version_option(__version__, prog_name="smartstat")
def cli():
    """Thermostat engine: model fitting, planning, energy, fault watch."""


@cli.command(name="simulate")
@click.option("--preset", type=click.Choice(PRESETS), default="single_zone", show_default=True)
@click.option("--set", "set_temp", type=float, default=26.0, show_default=True,
              help="Held set temperature; use --idle for a free-running room.")
@click.option("--idle", is_flag=True, help="Thermostat off for the whole run.")
@click.option("--duration-h", type=float, default=24.0, show_default=True)
@click.option("--init-temp", type=float, default=30.0, show_default=True)
@click.option("--outdoor-mean", type=float, default=33.0, show_default=True)
@click.option("--outdoor-swing", type=float, default=5.0, show_default=True)
@click.option("--weather", "weather_path", type=str, default=None,
              help="Forecast CSV; replaces the synthetic sinusoidal day.")
@click.option("--out", "out_path", type=str, default=None, help="Write the trace CSV here.")
def simulate_cmd(preset, set_temp, idle, duration_h, init_temp, outdoor_mean,
                 outdoor_swing, weather_path, out_path):
    """Roll the benchmark unit forward under a fixed set temperature."""
    zone_preset = ZonePreset(preset)
    network = benchmark_network(zone_preset)
    horizon_s = duration_h * 3600.0
    if weather_path is not None:
        outdoor = _load_weather(weather_path)
        t0 = float(outdoor.times[0])
    else:
        t0 = 0.0
        grid = t0 + 60.0 * np.arange(int(horizon_s // 60) + 1)
        outdoor = TimeSeries(grid, diurnal_outdoor(grid, outdoor_mean, outdoor_swing))
    ac = default_ac()
    trace = simulate(
        network,
        uniform_state(network, t0, init_temp),
        outdoor,
        None if idle else set_temp,
        ac,
        default_hysteresis(),
        None,
        horizon_s=horizon_s,
        dt=60.0,
    )
    on_share = float(np.mean(trace.compressor)) if len(trace.compressor) else 0.0
    final = ", ".join(
        f"{z} {trace.temps[-1, i]:.2f}" for i, z in enumerate(trace.zone_ids)
    )
    click.echo(
        f"simulated {duration_h:g} h ({len(trace.times)} samples), "
        f"compressor on {100 * on_share:.1f}% of steps"
    )
    click.echo(f"final temperatures (degC): {final}")
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["timestamp", *(f"{z}_temp_c" for z in trace.zone_ids),
                 "outdoor_temp_c", "set_temp_c", "compressor_on"]
            )
            for i, t in enumerate(trace.times):
                k = min(i, len(trace.times) - 2)
                sp = trace.set_temps[k]
                w.writerow([
                    format_timestamp(float(t)),
                    *(f"{trace.temps[i, j]:.4f}" for j in range(trace.temps.shape[1])),
                    f"{trace.outdoor[k]:.4f}",
                    "" if math.isnan(sp) else f"{sp:.1f}",
                    str(bool(trace.compressor[k])).lower(),
                ])
        click.echo(f"wrote {out_path}")


@cli.command()
@click.option("--preset", type=click.Choice(PRESETS), default="single_zone", show_default=True)
@click.option("--observations", "obs_path", type=str, required=True)
@click.option("--out", "out_path", type=str, default=None, help="Write the model JSON here.")
@click.option("--rated-cooling", type=float, default=None,
              help="Pin cooling power to this rating instead of fitting it.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--multi-start", type=int, default=8, show_default=True)
def fit(preset, obs_path, out_path, rated_cooling, seed, multi_start):
    """Fit thermal parameters to an observation CSV."""
    zone_preset = ZonePreset(preset)
    series = _load_observations(obs_path, zone_preset)
    result = fit_params(
        zone_preset,
        series,
        opts=FitOptions(seed=seed, multi_start=multi_start),
        rated_cooling_power=rated_cooling,
        now=series.end,
    )
    click.echo(
        f"fit {preset}: rmse {result.rmse:.4f} degC, "
        f"cooling {result.cooling_power:.0f} W, "
        f"{result.iterations} iterations"
        + ("" if result.converged else " (not converged)")
    )
    for name, value in sorted(result.params.items()):
        click.echo(f"  {name} = {value:.6g}")
    if out_path is not None:
        Path(out_path).write_text(json.dumps(to_doc(result), indent=2, sort_keys=True) + "\n")
        click.echo(f"wrote {out_path}")


@cli.command()
@click.option("--model", "model_path", type=str, required=True)
@click.option("--weather", "weather_path", type=str, required=True)
@click.option("--alpha", type=float, required=True, help="0 = comfort only, 1 = energy only.")
@click.option("--preferred", type=float, default=24.0, show_default=True)
@click.option("--band", type=float, default=0.5, show_default=True)
@click.option("--candidates", type=str, default=None,
              help="Comma-separated set temperatures; defaults to 16..30.")
@click.option("--slot-min", type=float, default=30.0, show_default=True)
@click.option("--horizon-h", type=float, default=8.0, show_default=True)
@click.option("--start", "start_text", type=str, default=None,
              help="RFC 3339 planning start; defaults to the weather start.")
@click.option("--init-temp", type=float, default=None,
              help="Starting room temperature; defaults to --preferred.")
@click.option("--out", "out_path", type=str, default=None, help="Write the schedule JSON here.")
def plan(model_path, weather_path, alpha, preferred, band, candidates, slot_min,
         horizon_h, start_text, init_temp, out_path):
    """Plan a setpoint schedule under the comfort-energy trade-off knob."""
    fit_result = _load_fit(model_path)
    forecast = _load_weather(weather_path)
    cfg_kwargs = dict(
        alpha=alpha, preferred_temp=preferred, band=band,
        slot_s=slot_min * 60.0, horizon_s=horizon_h * 3600.0,
    )
    if candidates is not None:
        cfg_kwargs["candidates"] = _parse_candidates(candidates)
    cfg = CETConfig(**cfg_kwargs)
    plant = PlantModel.from_fit(fit_result, default_ac(), default_hysteresis())
    start = float(forecast.times[0]) if start_text is None else parse_timestamp(start_text)
    temp0 = preferred if init_temp is None else init_temp
    init = ThermalState(
        time=start, temperatures={z: temp0 for z in plant.network.zone_ids}
    )
    schedule, diag = plan_setpoints(plant, forecast, cfg, init)
    for t, v in schedule.entries:
        click.echo(f"{format_timestamp(t)}  {v:.1f}")
    click.echo(
        f"predicted {diag.predicted_energy_kwh:.2f} kWh, "
        f"discomfort {diag.predicted_discomfort_degh:.2f} degC h "
        f"({diag.method}, {diag.nodes_expanded} nodes)"
    )
    if out_path is not None:
        Path(out_path).write_text(json.dumps(to_doc(schedule), indent=2) + "\n")
        click.echo(f"wrote {out_path}")


@cli.command()
@click.option("--model", "model_path", type=str, required=True)
@click.option("--observations", "obs_path", type=str, required=True)
@click.option("--actual-kwh", type=float, default=None,
              help="Metered truth; adds an accuracy line.")
@click.option("--switch-penalty", type=float, default=None)
@click.option("--residual-sigma", type=float, default=None)
def estimate(model_path, obs_path, actual_kwh, switch_penalty, residual_sigma):
    """Estimate consumed energy from temperatures alone."""
    fit_result = _load_fit(model_path)
    series = _load_observations(obs_path, ZonePreset(fit_result.preset_id))
    decode_kwargs = {}
    if switch_penalty is not None:
        decode_kwargs["switch_penalty"] = switch_penalty
    if residual_sigma is not None:
        decode_kwargs["residual_sigma"] = residual_sigma
    seg = decode_cycles(series, fit_result, DecodeConfig(**decode_kwargs) if decode_kwargs else None)
    report = estimate_energy(seg, default_ac(), actual_kwh=actual_kwh)
    click.echo(
        f"estimated {report.energy_kwh:.2f} kWh across {report.cycles} cycles "
        f"({report.on_hours:.1f} compressor hours)"
    )
    if report.accuracy_pct is not None:
        click.echo(f"accuracy {report.accuracy_pct:.1f}% against {actual_kwh:.2f} kWh metered")


@cli.command()
@click.option("--model", "model_path", type=str, required=True)
@click.option("--weather", "weather_path", type=str, required=True)
@click.option("--candidates", type=str, default="22,24,26,28", show_default=True)
@click.option("--duration-h", type=float, default=24.0, show_default=True)
@click.option("--init-temp", type=float, default=27.0, show_default=True)
@click.option("--start", "start_text", type=str, default=None)
def predict(model_path, weather_path, candidates, duration_h, init_temp, start_text):
    """Predicted energy for each candidate set temperature."""
    fit_result = _load_fit(model_path)
    forecast = _load_weather(weather_path)
    cands = _parse_candidates(candidates)
    if not cands:
        raise ValidationError("need at least one candidate set temperature")
    start = float(forecast.times[0]) if start_text is None else parse_timestamp(start_text)
    network = fit_result.network()
    init = ThermalState(
        time=start, temperatures={z: init_temp for z in network.zone_ids}
    )
    entries = predict_energy(
        fit_result, forecast, cands, duration_h * 3600.0, init, default_ac(),
        default_hysteresis(),
    )
    click.echo("set_temp_c  energy_kwh  cycles")
    for e in entries:
        click.echo(f"{e.set_temp:10.1f}  {e.energy_kwh:10.2f}  {e.cycles:6d}")


@cli.command()
@click.option("--model", "model_path", type=str, required=True)
@click.option("--observations", "obs_path", type=str, required=True)
@click.option("--warmup-days", type=int, default=DEFAULT_WARMUP_DAYS, show_default=True)
def faults(model_path, obs_path, warmup_days):
    """Scan a multi-day record for refrigerant-leak symptoms."""
    fit_result = _load_fit(model_path)
    preset = ZonePreset(fit_result.preset_id)
    series = _load_observations(obs_path, preset)
    ac = default_ac()
    first_day = int(math.floor(series.start / 86400.0))
    last_day = int(math.floor(series.end / 86400.0))
    state = MonitorState(warmup_days=warmup_days)
    qhat_days, qhat_vals, alerts = [], [], []
    for day in range(first_day, last_day + 1):
        day_series = series.window(day * 86400.0, (day + 1) * 86400.0)
        if len(day_series) == 0:
            continue
        f = daily_features(day_series, fit_result, ac)
        state, z, alert = monitor_day(state, f)
        if f.valid:
            qhat_days.append(f.date)
            qhat_vals.append(f.qhat)
            z_text = "warmup" if z is None else f"z {z:+.2f}"
            click.echo(
                f"{format_timestamp(f.date)[:10]}  duty {f.duty_cycle:.2f}  "
                f"qhat {f.qhat:7.0f} W  {z_text}  cusum {state.detector.cusum:.2f}"
            )
        else:
            click.echo(f"{format_timestamp(day * 86400.0)[:10]}  no usable coverage")
        if alert is not None:
            alerts.append(alert)
            click.echo(f"ALERT {format_timestamp(alert.date)[:10]}: {alert.message}")
    if not alerts:
        click.echo(f"no alerts over {state.days_seen} monitored days")
        return
    if len(qhat_days) >= 2:
        report = counterfactual_report(
            series, fit_result, TimeSeries(np.array(qhat_days), np.array(qhat_vals)),
            ac, state.detector,
        )
        click.echo(
            f"since the alarm: {report.excess_energy_kwh:.1f} kWh beyond a healthy "
            f"unit, rooms {report.mean_temp_shortfall_c:.2f} degC short of target"
        )


@cli.command()
@click.argument("names", nargs=-1)
@click.pass_context
def campaign(ctx, names):
    """Run the self-checking verification campaigns (all by default)."""
    unknown = [n for n in names if n not in CAMPAIGNS]
    if unknown:
        raise ValidationError(
            f"unknown campaigns {unknown}; choose from {', '.join(CAMPAIGNS)}"
        )
    failed = 0
    for name in names or CAMPAIGNS:
        result = run_campaign(name)
        verdict = "PASS" if result.passed else "FAIL"
        click.echo(f"{verdict}  {name:<24s} {result.duration_s:6.1f}s  {result.detail}")
        failed += 0 if result.passed else 1
    if failed:
        click.echo(f"{failed} campaign(s) failed", err=True)
        ctx.exit(2)


@cli.command()
@click.option("--config", "config_path", type=str, required=True)
@click.option("--host", type=str, default=None, help="Override the configured bind host.")
@click.option("--port", type=int, default=None, help="Override the configured bind port.")
def serve(config_path, host, port):
    """Serve the HTTP API for the units in a deployment config."""
    import uvicorn

    from .service import create_app, load_config

    cfg = load_config(config_path)
    app = create_app(cfg)
    uvicorn.run(app, host=host or cfg.host, port=port or cfg.port, log_level="info")


def main(argv: list[str] | None = None) -> int:
    """Console entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, prog_name="smartstat", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return 1
    except click.Abort:
        return 130
    except SmartstatError as exc:
        # ValidationError carries exit code 1, runtime faults carry 2
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
