"""Desk benchmark rooms shared by tests, campaigns and fixtures.

The constants are plausible magnitudes for a small conditioned room; every
check that uses them is oracle-relative, so their exact values only need to
be self-consistent and held fixed.
"""

from __future__ import annotations

import numpy as np

from .fitting import ObservationRecord, ObservationSeries
from .thermal import (
    ACUnit,
    HysteresisConfig,
    NoiseModel,
    RCNetwork,
    SimulationTrace,
    ThermalState,
    ZonePreset,
    build_room_model,
    simulate,
)

THREE_REGION_PARAMS: dict[str, float] = {
    "c_hir": 2.0e5,
    "c_mir": 4.0e5,
    "c_lir": 2.0e5,
    "c_wall": 8.0e5,
    "r_hir_mir": 0.02,
    "r_mir_lir": 0.02,
    "r_hir_wall": 0.05,
    "r_mir_wall": 0.05,
    "r_lir_wall": 0.05,
    "r_wall_ambient": 0.02,
}

# second-order room: one air node, one wall node; sized so a hot afternoon
# lands near 40-50% duty with ~12 minute cycles
SINGLE_ZONE_PARAMS: dict[str, float] = {
    "c_room": 6.0e5,
    "c_wall": 8.0e5,
    "r_room_wall": 0.004,
    "r_wall_ambient": 0.004,
}

RATED_COOLING_W = 3500.0
RATED_ELECTRICAL_W = 1200.0
FAN_W = 50.0


def default_ac() -> ACUnit:
    return ACUnit(
        rated_cooling_power=RATED_COOLING_W,
        rated_electrical_power=RATED_ELECTRICAL_W,
        fan_power=FAN_W,
        min_on_s=180.0,
        min_off_s=180.0,
    )


def default_hysteresis(sensing_zone: str | None = None) -> HysteresisConfig:
    return HysteresisConfig(delta_high=0.5, delta_low=0.5, sensing_zone=sensing_zone)


def _params_to_build_args(preset: ZonePreset, params: dict[str, float]):
    caps = {}
    res = {}
    for name, v in params.items():
        parts = name.split("_")
        if parts[0] == "c":
            caps[parts[1]] = v
        else:
            res[(parts[1], parts[2])] = v
    return caps, res


def three_region_network(params: dict[str, float] | None = None) -> RCNetwork:
    caps, res = _params_to_build_args(
        ZonePreset.THREE_REGION, params or THREE_REGION_PARAMS
    )
    return build_room_model(
        ZonePreset.THREE_REGION, caps, res,
        ZonePreset.THREE_REGION.default_ac_fractions,
    )


def single_zone_network(params: dict[str, float] | None = None) -> RCNetwork:
    caps, res = _params_to_build_args(
        ZonePreset.SINGLE_ZONE, params or SINGLE_ZONE_PARAMS
    )
    return build_room_model(
        ZonePreset.SINGLE_ZONE, caps, res,
        ZonePreset.SINGLE_ZONE.default_ac_fractions,
    )


def benchmark_network(preset: ZonePreset) -> RCNetwork:
    if preset is ZonePreset.SINGLE_ZONE:
        return single_zone_network()
    return three_region_network()


def benchmark_params(preset: ZonePreset) -> dict[str, float]:
    if preset is ZonePreset.SINGLE_ZONE:
        return dict(SINGLE_ZONE_PARAMS)
    return dict(THREE_REGION_PARAMS)


def uniform_state(network: RCNetwork, t0: float, temp_c: float) -> ThermalState:
    return ThermalState(time=t0, temperatures={z: temp_c for z in network.zone_ids})


def diurnal_outdoor(t: np.ndarray, mean_c: float = 33.0, swing_c: float = 5.0,
                    phase_s: float = 0.0) -> np.ndarray:
    """Sinusoidal day: peak mid-afternoon when phase_s aligns t=0 to midnight."""
    day = 86400.0
    return mean_c + swing_c * np.sin(2 * np.pi * (t + phase_s - 9.5 * 3600) / day)


def observations_from_trace(
    trace: SimulationTrace,
    sensed_zones: tuple[str, ...],
    obs_sigma_c: float = 0.0,
    seed: int = 0,
    include_compressor: bool = True,
    include_power: ACUnit | None = None,
    door_open: np.ndarray | None = None,
) -> ObservationSeries:
    """Turn a simulated trace into per-minute sensing records.

    Temperatures pick up iid gaussian measurement noise; the last trace row
    reuses the final interval's set temperature and flag so record count
    matches the sample count.
    """
    rng = np.random.default_rng(seed)
    n = len(trace.times)
    temps = trace.temps.copy()
    if obs_sigma_c > 0:
        temps = temps + rng.normal(0.0, obs_sigma_c, size=temps.shape)
    cols = {z: trace.zone_ids.index(z) for z in sensed_zones}
    records = []
    for i in range(n):
        k = min(i, n - 2)  # interval index for stepwise fields
        sp = trace.set_temps[k]
        on = bool(trace.compressor[k])
        rec = ObservationRecord(
            timestamp=float(trace.times[i]),
            sensed_temps={z: float(temps[i, j]) for z, j in cols.items()},
            outdoor_temp=float(trace.outdoor[k]),
            set_temp=None if np.isnan(sp) else float(sp),
            door_open=bool(door_open[i]) if door_open is not None else False,
            compressor_on=on if include_compressor else None,
            electrical_power=(
                (include_power.rated_electrical_power if on else 0.0) + include_power.fan_power
                if include_power is not None
                else None
            ),
        )
        records.append(rec)
    return ObservationSeries(records)


def synthesize_observations(
    preset: ZonePreset,
    t0: float = 0.0,
    duration_s: float = 48 * 3600.0,
    set_temp: float | None = 26.0,
    outdoor_mean: float = 33.0,
    outdoor_swing: float = 5.0,
    init_temp: float = 30.0,
    process_noise: NoiseModel | None = None,
    obs_sigma_c: float = 0.05,
    seed: int = 0,
    include_compressor: bool = True,
    network: RCNetwork | None = None,
    ac: ACUnit | None = None,
    dt: float = 60.0,
) -> ObservationSeries:
    """Simulated benchmark day(s) rendered as observations.

    Sensed zones are every non-wall zone; the wall stays latent the way a
    real deployment leaves it.
    """
    network = network or benchmark_network(preset)
    ac = ac or default_ac()
    steps = int(round(duration_s / dt))
    times = t0 + dt * np.arange(steps)
    outdoor_vals = diurnal_outdoor(times, outdoor_mean, outdoor_swing)
    from .series import TimeSeries

    outdoor = TimeSeries(
        np.concatenate([times, [t0 + steps * dt]]),
        np.concatenate([outdoor_vals, [outdoor_vals[-1]]]),
    )
    trace = simulate(
        network,
        uniform_state(network, t0, init_temp),
        outdoor,
        set_temp,
        ac,
        default_hysteresis(),
        process_noise,
        horizon_s=duration_s,
        dt=dt,
    )
    sensed = tuple(z for z in network.zone_ids if z != "wall")
    return observations_from_trace(
        trace,
        sensed,
        obs_sigma_c=obs_sigma_c,
        seed=seed + 1,
        include_compressor=include_compressor,
    )


def synthesize_monitoring_day(
    day_index: int,
    *,
    q_scale: float = 1.0,
    set_temp: float = 26.0,
    active_hours: tuple[float, float] = (8.0, 20.0),
    obs_sigma_c: float = 0.1,
    seed: int = 0,
    weather_seed: int | None = None,
    include_compressor: bool = False,
    door_open: np.ndarray | None = None,
    network: RCNetwork | None = None,
    ac: ACUnit | None = None,
) -> tuple[SimulationTrace, ObservationSeries]:
    """One monitored day on the single-zone bench, weather drawn per day.

    The thermostat runs between active_hours; the idle night lets the room
    settle so decoding starts from quasi-equilibrium. q_scale derates the
    unit's true cooling capacity (1.0 = healthy) while the rated constants
    stay untouched, which is exactly what a slow leak looks like from the
    outside. Weather depends only on (weather_seed, day_index) so a fleet
    sharing a city shares its days.
    """
    network = network or single_zone_network()
    ac = ac or default_ac()
    t0 = day_index * 86400.0
    dt = 60.0
    times = t0 + dt * np.arange(1441)
    wrng = np.random.default_rng(
        (weather_seed if weather_seed is not None else 0) * 100003 + day_index
    )
    mean_c = 33.0 + wrng.uniform(-2.5, 2.5)
    swing_c = 5.0 + wrng.uniform(-1.5, 1.5)
    from .series import TimeSeries

    outdoor = TimeSeries(times, diurnal_outdoor(times, mean_c, swing_c))
    hours = (times[:-1] % 86400.0) / 3600.0
    sets = np.where(
        (hours >= active_hours[0]) & (hours < active_hours[1]), set_temp, np.nan
    )
    true_ac = ACUnit(
        rated_cooling_power=ac.rated_cooling_power * q_scale,
        rated_electrical_power=ac.rated_electrical_power,
        fan_power=ac.fan_power,
        min_on_s=ac.min_on_s,
        min_off_s=ac.min_off_s,
    )
    trace = simulate(
        network,
        uniform_state(network, t0, 27.0),
        outdoor,
        sets,
        true_ac,
        default_hysteresis(),
        None,
        horizon_s=86400.0,
        dt=dt,
    )
    obs = observations_from_trace(
        trace,
        ("room",),
        obs_sigma_c=obs_sigma_c,
        seed=seed * 7919 + day_index,
        include_compressor=include_compressor,
        door_open=door_open,
    )
    return trace, obs


def active_duty_cycle(trace: SimulationTrace) -> float:
    """Fraction of thermostat-active time the compressor ran, from the trace."""
    active = ~np.isnan(trace.set_temps)
    if not active.any():
        return 0.0
    return float(trace.compressor[active].sum() / active.sum())
