"""Temperature-only AC energy accounting.

Two halves share one power model. The estimation half looks backwards: it
decodes when the compressor must have been running from the shape of a room
temperature trace, using a fitted single-zone model to score ON vs OFF
dynamics sample by sample. The prediction half looks forwards: it rolls the
fitted model against a weather forecast once per candidate set temperature
and prices each rollout. Neither half ever touches a power meter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence, Union

import numpy as np

from .control import energy_of
from .errors import (
    GridError,
    InvalidParameter,
    ModelMismatch,
    StaleModel,
    ZeroActual,
)
from .fitting import FitResult, GriddedObservations, ObservationSeries, is_expired
from .series import TimeSeries
from .thermal import ACUnit, HysteresisConfig, ThermalState, ZonePreset, simulate

DEFAULT_SWITCH_PENALTY = 4.0
DEFAULT_MIN_RUN = 3
# scale floor keeps noiseless traces from dividing by ~zero
SIGMA_FLOOR_C = 1e-4

ESTIMATED = "estimated"
PREDICTED = "predicted"


def count_cycles(flags: np.ndarray) -> int:
    """Number of distinct ON runs, treating the pre-window state as OFF."""
    f = np.asarray(flags, dtype=bool)
    if len(f) == 0:
        return 0
    rising = int(np.sum(f[1:] & ~f[:-1]))
    return rising + int(f[0])


@dataclass(frozen=True)
class CycleSegmentation:
    """Per-sample compressor flags on a uniform observation grid.

    flags[i] is the state over [times[i], times[i+1]); the final flag exists
    for completeness but covers no time. session[i] marks intervals where the
    thermostat was engaged (set temperature present, or the compressor on).
    """

    times: np.ndarray
    flags: np.ndarray
    session: np.ndarray
    dt: float

    def __post_init__(self):
        if self.dt <= 0:
            raise InvalidParameter("dt must be positive")
        n = len(self.times)
        if len(self.flags) != n or len(self.session) != n:
            raise InvalidParameter("flags and session must match the grid")
        if n >= 2:
            gaps = np.diff(self.times)
            if not np.allclose(gaps, self.dt, rtol=0, atol=1e-6):
                raise GridError("segmentation grid is not uniform")

    @property
    def cycles(self) -> int:
        return count_cycles(self.flags)

    @property
    def on_seconds(self) -> float:
        if len(self.flags) < 2:
            return 0.0
        return float(np.sum(self.flags[:-1])) * self.dt

    @property
    def session_seconds(self) -> float:
        if len(self.session) < 2:
            return 0.0
        return float(np.sum(self.session[:-1])) * self.dt


@dataclass(frozen=True)
class DecodeConfig:
    """Knobs for the two-state duty decoder.

    residual_sigma of None means: estimate the noise scale from the trace
    itself, preferring passive stretches where the thermostat was idle.
    """

    switch_penalty: float = DEFAULT_SWITCH_PENALTY
    residual_sigma: float | None = None
    min_run: int = DEFAULT_MIN_RUN

    def __post_init__(self):
        if self.switch_penalty < 0:
            raise InvalidParameter("switch_penalty must be >= 0")
        if self.residual_sigma is not None and self.residual_sigma <= 0:
            raise InvalidParameter("residual_sigma must be positive")
        if self.min_run < 1:
            raise InvalidParameter("min_run must be >= 1")


@dataclass(frozen=True)
class EnergyReport:
    energy_kwh: float
    cycles: int
    on_hours: float
    method: str
    accuracy_pct: float | None = None

    def __post_init__(self):
        if self.energy_kwh < 0 or self.on_hours < 0 or self.cycles < 0:
            raise InvalidParameter("report quantities must be non-negative")
        if self.method not in (ESTIMATED, PREDICTED):
            raise InvalidParameter(f"unknown method {self.method!r}")
        if self.accuracy_pct is not None and not 0 <= self.accuracy_pct <= 100:
            raise InvalidParameter("accuracy_pct must lie in [0, 100]")


class PredictionEntry(NamedTuple):
    set_temp: float
    energy_kwh: float
    cycles: int


def merge_short_runs(flags: np.ndarray, min_run: int) -> np.ndarray:
    """Flip runs shorter than min_run into their neighbours.

    Shortest run first, earliest on ties; a lone run is left alone however
    short it is. Each flip merges three runs into one, so this terminates.
    """
    f = np.asarray(flags, dtype=bool).copy()
    if min_run <= 1 or len(f) == 0:
        return f
    while True:
        edges = np.flatnonzero(np.diff(f.astype(np.int8))) + 1
        starts = np.concatenate(([0], edges))
        ends = np.concatenate((edges, [len(f)]))
        if len(starts) <= 1:
            return f
        lengths = ends - starts
        short = [(int(l), int(s), int(e)) for l, s, e in zip(lengths, starts, ends) if l < min_run]
        if not short:
            return f
        _, s, e = min(short)
        f[s:e] = ~f[s:e]


def _decode_min_cost(emissions: np.ndarray, switch_penalty: float) -> np.ndarray:
    """Exact two-state decode, lexicographically smallest optimum (OFF first).

    emissions[k, s] is the cost of spending sample k in state s (0=off).
    """
    n = len(emissions)
    suffix = np.zeros((n + 1, 2))
    for k in range(n - 1, -1, -1):
        for s in (0, 1):
            suffix[k, s] = emissions[k, s] + min(
                suffix[k + 1, s], suffix[k + 1, 1 - s] + switch_penalty
            )
    flags = np.zeros(n, dtype=bool)
    prev = 0 if suffix[0, 0] <= suffix[0, 1] else 1
    flags[0] = bool(prev)
    for k in range(1, n):
        cost_off = suffix[k, 0] + (switch_penalty if prev != 0 else 0.0)
        cost_on = suffix[k, 1] + (switch_penalty if prev != 1 else 0.0)
        prev = 0 if cost_off <= cost_on else 1
        flags[k] = bool(prev)
    return flags


def _reconstruct_wall(
    room: np.ndarray, outdoor: np.ndarray, dt: float,
    c_wall: float, r_rw: float, r_wa: float,
) -> np.ndarray:
    """Hidden wall trajectory, driven by the observed room temperature.

    The AC couples only into the room node, so this filter is independent
    of the compressor state being decoded. Substeps keep Euler stable even
    on coarse observation grids.
    """
    g = 1.0 / r_rw + 1.0 / r_wa
    n_sub = max(1, int(math.ceil(dt / (0.5 * c_wall / g))))
    h = dt / n_sub
    w = np.empty(len(room))
    # start from the static balance of the first sample
    w[0] = (room[0] / r_rw + outdoor[0] / r_wa) / g
    for k in range(len(room) - 1):
        wk = w[k]
        for _ in range(n_sub):
            wk += h / c_wall * ((room[k] - wk) / r_rw + (outdoor[k] - wk) / r_wa)
        w[k + 1] = wk
    return w


def _as_uniform_grid(series: Union[ObservationSeries, GriddedObservations]) -> GriddedObservations:
    if isinstance(series, GriddedObservations):
        return series
    times = np.array([r.timestamp for r in series])
    if len(times) < 2:
        raise GridError("need at least two samples to decode")
    gaps = np.diff(times)
    dt = float(gaps[0])
    if dt <= 0 or not np.allclose(gaps, dt, rtol=0, atol=1e-6):
        raise GridError("observation series is not on a uniform grid")
    return series.to_grid(dt, max_gap_s=dt * 1.5)


def _estimate_sigma(
    resid_off: np.ndarray, resid_on: np.ndarray, passive: np.ndarray
) -> float:
    """Robust residual scale, from thermostat-idle stretches when available."""
    if passive.any():
        r = np.abs(resid_off[passive])
    else:
        # no passive data: score each sample under its better hypothesis
        r = np.minimum(np.abs(resid_off), np.abs(resid_on))
    return max(SIGMA_FLOOR_C, 1.4826 * float(np.median(r)))


def decode_cycles(
    series: Union[ObservationSeries, GriddedObservations],
    params: FitResult,
    cfg: DecodeConfig | None = None,
) -> CycleSegmentation:
    """Infer per-sample compressor flags from a room temperature trace.

    Each sample is scored by its one-step prediction residual under the
    fitted ON dynamics versus the OFF dynamics; switches between states pay
    cfg.switch_penalty. The decode is the exact minimum-cost flag sequence,
    then runs shorter than cfg.min_run are merged away.
    """
    cfg = cfg or DecodeConfig()
    if params.preset_id != ZonePreset.SINGLE_ZONE.value:
        raise ModelMismatch(
            f"duty decoding needs single-zone parameters, got {params.preset_id!r}"
        )
    grid = _as_uniform_grid(series)
    room_col = grid.zone_ids.index(ZonePreset.SINGLE_ZONE.primary_zone)
    room = grid.temps[:, room_col]
    dt = grid.dt

    p = params.params
    c_room, c_wall = p["c_room"], p["c_wall"]
    r_rw, r_wa = p["r_room_wall"], p["r_wall_ambient"]
    wall = _reconstruct_wall(room, grid.outdoor, dt, c_wall, r_rw, r_wa)

    # teacher-forced one-step predictions from each observed sample
    drift = (wall[:-1] - room[:-1]) / r_rw
    pred_off = room[:-1] + dt / c_room * drift
    resid_off = room[1:] - pred_off
    resid_on = resid_off + dt * params.cooling_power / c_room

    passive = np.isnan(grid.set_temps[:-1])
    sigma = cfg.residual_sigma or _estimate_sigma(resid_off, resid_on, passive)

    n = len(room)
    emissions = np.zeros((n, 2))
    emissions[:-1, 0] = (resid_off / sigma) ** 2
    emissions[:-1, 1] = (resid_on / sigma) ** 2
    # the last sample has no successor to predict; both states score zero

    flags = _decode_min_cost(emissions, cfg.switch_penalty)
    flags = merge_short_runs(flags, cfg.min_run)
    session = ~np.isnan(grid.set_temps) | flags
    return CycleSegmentation(times=grid.times, flags=flags, session=session, dt=dt)


def estimate_energy(
    seg: CycleSegmentation, ac: ACUnit, actual_kwh: float | None = None
) -> EnergyReport:
    """Price a segmentation: compressor draw while ON, fan draw in session."""
    energy = (
        ac.rated_electrical_power * seg.on_seconds + ac.fan_power * seg.session_seconds
    ) / 3.6e6
    pct = None if actual_kwh is None else accuracy(energy, actual_kwh)
    return EnergyReport(
        energy_kwh=energy,
        cycles=seg.cycles,
        on_hours=seg.on_seconds / 3600.0,
        method=ESTIMATED,
        accuracy_pct=pct,
    )


def accuracy(estimated: float, actual: float) -> float:
    """100·(1 − relative error), floored at zero."""
    if actual <= 0:
        raise ZeroActual("actual energy must be positive")
    return max(0.0, 100.0 * (1.0 - abs(estimated - actual) / actual))


def predict_energy(
    fit: FitResult,
    forecast: Union[float, TimeSeries],
    candidates: Sequence[float],
    duration_s: float,
    init: ThermalState,
    ac: ACUnit,
    cfg: HysteresisConfig | None = None,
    *,
    now: float | None = None,
    dt: float = 60.0,
) -> list[PredictionEntry]:
    """Predicted energy per candidate set temperature over a forecast window.

    One deterministic closed-loop rollout per candidate. Thermal response and
    cooling capacity come from the fit; electrical draw, fan draw and lockout
    times come from ac.
    """
    if now is not None and is_expired(fit, now):
        raise StaleModel(
            f"fit from t={fit.created_at:.0f} is too old to predict with at t={now:.0f}"
        )
    if duration_s < 0:
        raise InvalidParameter("duration_s must be non-negative")
    if duration_s == 0:
        return [PredictionEntry(float(t), 0.0, 0) for t in candidates]
    cfg = cfg or HysteresisConfig()
    network = fit.network()
    effective_ac = replace(ac, rated_cooling_power=fit.cooling_power)
    out = []
    for temp in candidates:
        trace = simulate(
            network, init, forecast, float(temp), effective_ac, cfg, None,
            horizon_s=duration_s, dt=dt,
        )
        out.append(
            PredictionEntry(
                float(temp),
                energy_of(trace, effective_ac),
                count_cycles(trace.compressor),
            )
        )
    return out
