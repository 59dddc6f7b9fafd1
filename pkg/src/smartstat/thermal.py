"""RC lumped-parameter room model, explicit simulation, compressor hysteresis.

A room is a small thermal network: capacitive zone nodes exchange heat through
resistive edges with each other and with boundary nodes whose temperature is
imposed from outside. The AC removes heat from zones according to per-zone
coupling fractions while the compressor is on; a hysteresis thermostat with
anti-short-cycling lockouts drives the compressor.

Integration is forward Euler, guarded by :func:`stable_dt`. The hot loop is
compiled in :mod:`._kernel`; :func:`step` and :func:`simulate` both go through
it so single steps are bit-identical to full traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import _kernel
from .errors import (
    InvalidParameter,
    InvalidTopology,
    StateOutOfRange,
    UnknownZone,
    UnstableStep,
)
from .series import TimeSeries

AMBIENT = "ambient"

TEMP_MIN = _kernel.TEMP_MIN
TEMP_MAX = _kernel.TEMP_MAX


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


class ZonePreset(Enum):
    """Built-in room topologies."""

    SINGLE_ZONE = "single_zone"
    THREE_REGION = "three_region"

    @property
    def zone_ids(self) -> tuple[str, ...]:
        if self is ZonePreset.SINGLE_ZONE:
            return ("room", "wall")
        return ("hir", "mir", "lir", "wall")

    @property
    def edge_pairs(self) -> tuple[tuple[str, str], ...]:
        """Exact edge set required by the preset (order-normalized pairs)."""
        if self is ZonePreset.SINGLE_ZONE:
            pairs = [("room", "wall"), ("wall", AMBIENT)]
        else:
            pairs = [
                ("hir", "mir"),
                ("mir", "lir"),
                ("hir", "wall"),
                ("mir", "wall"),
                ("lir", "wall"),
                ("wall", AMBIENT),
            ]
        return tuple(_pair(a, b) for a, b in pairs)

    @property
    def primary_zone(self) -> str:
        """Zone that must receive the largest share of AC cooling."""
        return "room" if self is ZonePreset.SINGLE_ZONE else "hir"

    @property
    def default_sensing_zone(self) -> str:
        # inbuilt sensors sit at the unit, i.e. where the cold air lands
        return self.primary_zone

    @property
    def comfort_zone(self) -> str:
        """Where occupants actually are; used for discomfort accounting."""
        return "room" if self is ZonePreset.SINGLE_ZONE else "mir"

    @property
    def default_ac_fractions(self) -> dict[str, float]:
        if self is ZonePreset.SINGLE_ZONE:
            return {"room": 1.0}
        return {"hir": 0.7, "mir": 0.25, "lir": 0.05}


@dataclass(frozen=True)
class RCNetwork:
    """Validated thermal network.

    zones: ordered (zone_id, capacitance J/degC) pairs.
    boundaries: temperature-source node ids (presets use a single "ambient").
    edges: (node_a, node_b, resistance degC/W) with at most one edge per pair.
    ac_coupling: zone_id -> fraction of AC cooling delivered there; sums to 1.
    """

    zones: tuple[tuple[str, float], ...]
    boundaries: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]
    ac_coupling: Mapping[str, float]
    preset_id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "zones", tuple((z, float(c)) for z, c in self.zones))
        object.__setattr__(self, "boundaries", tuple(self.boundaries))
        object.__setattr__(
            self, "edges", tuple((a, b, float(r)) for a, b, r in self.edges)
        )
        object.__setattr__(self, "ac_coupling", dict(self.ac_coupling))
        self._validate()

    def _validate(self) -> None:
        if not self.zones:
            raise InvalidTopology("network needs at least one zone")
        ids = [z for z, _ in self.zones]
        nodes = set(ids) | set(self.boundaries)
        if len(nodes) < len(ids) + len(self.boundaries):
            raise InvalidTopology("duplicate node ids")
        for z, c in self.zones:
            if not (c > 0) or not np.isfinite(c):
                raise InvalidParameter(f"capacitance of {z} must be > 0, got {c}")
        seen: set[tuple[str, str]] = set()
        for a, b, r in self.edges:
            if a == b:
                raise InvalidTopology(f"self-edge on {a}")
            if a not in nodes or b not in nodes:
                raise InvalidTopology(f"edge {a}-{b} references unknown node")
            if a in self.boundaries and b in self.boundaries:
                raise InvalidTopology(f"edge {a}-{b} joins two boundary nodes")
            if not (r > 0) or not np.isfinite(r):
                raise InvalidParameter(f"resistance {a}-{b} must be > 0, got {r}")
            p = _pair(a, b)
            if p in seen:
                raise InvalidTopology(f"duplicate edge {a}-{b}")
            seen.add(p)
        # connectivity over zones + boundaries
        adj: dict[str, set[str]] = {nd: set() for nd in nodes}
        for a, b, _ in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        stack = [next(iter(nodes))]
        reached: set[str] = set()
        while stack:
            nd = stack.pop()
            if nd in reached:
                continue
            reached.add(nd)
            stack.extend(adj[nd] - reached)
        if reached != nodes:
            raise InvalidTopology(f"disconnected nodes: {sorted(nodes - reached)}")
        total = 0.0
        for z, f in self.ac_coupling.items():
            if z not in set(ids):
                raise InvalidTopology(f"ac_coupling references unknown zone {z}")
            if f < 0:
                raise InvalidTopology(f"ac_coupling fraction for {z} is negative")
            total += f
        if abs(total - 1.0) > 1e-9:
            raise InvalidTopology(f"ac_coupling fractions sum to {total}, expected 1")

    @cached_property
    def zone_ids(self) -> tuple[str, ...]:
        return tuple(z for z, _ in self.zones)

    @cached_property
    def zone_index(self) -> dict[str, int]:
        return {z: i for i, z in enumerate(self.zone_ids)}

    @cached_property
    def capacitances(self) -> np.ndarray:
        arr = np.array([c for _, c in self.zones])
        arr.setflags(write=False)
        return arr

    @cached_property
    def conductances(self) -> np.ndarray:
        """(n, n+1) matrix; column n folds every boundary edge together."""
        n = len(self.zones)
        g = np.zeros((n, n + 1))
        idx = self.zone_index
        for a, b, r in self.edges:
            if a in idx and b in idx:
                g[idx[a], idx[b]] += 1.0 / r
                g[idx[b], idx[a]] += 1.0 / r
            else:
                z = a if a in idx else b
                g[idx[z], n] += 1.0 / r
        g.setflags(write=False)
        return g

    def cooling_vector(self, ac: "ACUnit") -> np.ndarray:
        w = np.zeros(len(self.zones))
        for z, f in self.ac_coupling.items():
            w[self.zone_index[z]] = ac.rated_cooling_power * f
        return w

    @property
    def preset(self) -> ZonePreset | None:
        return ZonePreset(self.preset_id) if self.preset_id else None

    def require_zone(self, zone_id: str) -> int:
        try:
            return self.zone_index[zone_id]
        except KeyError:
            raise UnknownZone(f"no zone {zone_id!r} in {self.zone_ids}") from None


def build_room_model(
    preset: ZonePreset,
    capacitances: Mapping[str, float],
    resistances: Mapping[tuple[str, str], float],
    ac_fractions: Mapping[str, float],
) -> RCNetwork:
    """Assemble and validate a preset network.

    ``resistances`` is keyed by node pair, order-insensitive. The preset's
    edge set must be supplied exactly; the primary zone (room, or hir) must
    carry the largest AC fraction.
    """
    want = set(preset.edge_pairs)
    got = {_pair(a, b): r for (a, b), r in resistances.items()}
    if set(got) != want:
        missing = sorted(want - set(got))
        extra = sorted(set(got) - want)
        raise InvalidTopology(
            f"preset {preset.value} needs edges {missing or '[]'}, got extra {extra or '[]'}"
        )
    zones = []
    for z in preset.zone_ids:
        if z not in capacitances:
            raise InvalidTopology(f"missing capacitance for zone {z}")
        zones.append((z, capacitances[z]))
    fracs = dict(ac_fractions)
    primary = preset.primary_zone
    if fracs and max(fracs, key=fracs.get) != primary:
        raise InvalidTopology(f"{primary} must receive the largest AC fraction")
    return RCNetwork(
        zones=tuple(zones),
        boundaries=(AMBIENT,),
        edges=tuple((a, b, r) for (a, b), r in got.items()),
        ac_coupling=fracs,
        preset_id=preset.value,
    )


@dataclass(frozen=True)
class ThermalState:
    time: float
    temperatures: Mapping[str, float]

    def array(self, zone_ids: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self.temperatures[z] for z in zone_ids])
        except KeyError as e:
            raise UnknownZone(f"state is missing zone {e.args[0]!r}") from None


@dataclass(frozen=True)
class ACUnit:
    """Fixed-speed unit: thermal output, electrical draw, cycling lockouts."""

    rated_cooling_power: float  # W removed from the room while on
    rated_electrical_power: float
    fan_power: float = 0.0
    min_on_s: float = 180.0
    min_off_s: float = 180.0

    def __post_init__(self):
        if not self.rated_cooling_power > 0:
            raise InvalidParameter("rated_cooling_power must be > 0")
        for name in ("rated_electrical_power", "fan_power", "min_on_s", "min_off_s"):
            if getattr(self, name) < 0:
                raise InvalidParameter(f"{name} must be >= 0")


@dataclass(frozen=True)
class HysteresisConfig:
    """Thermostat band around the set temperature.

    sensing_zone None means "use the network preset's default".
    """

    delta_high: float = 0.5
    delta_low: float = 0.5
    sensing_zone: str | None = None

    def __post_init__(self):
        if self.delta_high < 0 or self.delta_low < 0:
            raise InvalidParameter("hysteresis offsets must be >= 0")
        if self.delta_high + self.delta_low <= 0:
            raise InvalidParameter("zero-width hysteresis band would chatter")

    def resolve_zone(self, network: RCNetwork) -> str:
        if self.sensing_zone is not None:
            return self.sensing_zone
        preset = network.preset
        if preset is None:
            raise UnknownZone("sensing_zone required for non-preset networks")
        return preset.default_sensing_zone


@dataclass(frozen=True)
class CompressorState:
    """on/off flag plus transition bookkeeping.

    ``since`` is the time of the last transition (lockouts measure from it).
    ``accrued_until`` marks how far cumulative_on has been counted, so
    repeated transition calls never double-count an open run.
    """

    on: bool
    since: float
    cumulative_on: float = 0.0
    accrued_until: float | None = field(default=None, compare=False)

    def accounted_to(self) -> float:
        return self.since if self.accrued_until is None else self.accrued_until


def initial_compressor(t0: float, ac: ACUnit) -> CompressorState:
    """Off, with lockouts already expired at t0."""
    return CompressorState(on=False, since=t0 - max(ac.min_on_s, ac.min_off_s))


def thermostat_transition(
    prev: CompressorState,
    sensed_t: float,
    set_t: float,
    cfg: HysteresisConfig,
    ac: ACUnit,
    now: float,
) -> CompressorState:
    """One thermostat decision at ``now``.

    Turns on above set+delta_high, off below set-delta_low, each deferred
    while the corresponding lockout is pending. Lockouts defer silently;
    the band itself keeps the state otherwise.
    """
    if now < prev.since:
        raise InvalidParameter("thermostat time must not run backwards")
    cum = prev.cumulative_on
    if prev.on:
        cum += now - prev.accounted_to()
        if sensed_t <= set_t - cfg.delta_low and now - prev.since >= ac.min_on_s:
            return CompressorState(False, now, cum, now)
    else:
        if sensed_t >= set_t + cfg.delta_high and now - prev.since >= ac.min_off_s:
            return CompressorState(True, now, cum, now)
    return CompressorState(prev.on, prev.since, cum, now)


@dataclass(frozen=True)
class NoiseModel:
    """Zone-wise disturbance power, piecewise constant per block, seeded."""

    sigma_w: float = 50.0
    block_s: float = 900.0
    seed: int = 0

    def sample(self, steps: int, n_zones: int, dt: float) -> np.ndarray:
        if self.sigma_w == 0:
            return np.zeros((steps, n_zones))
        rng = np.random.default_rng(self.seed)
        reps = max(1, int(round(self.block_s / dt)))
        blocks = -(-steps // reps)
        draws = rng.normal(0.0, self.sigma_w, size=(blocks, n_zones))
        return np.repeat(draws, reps, axis=0)[:steps]


@dataclass(frozen=True)
class SimulationTrace:
    """Uniform closed-loop record.

    ``temps[i]`` is the state at ``times[i]``; interval quantities
    (``compressor``, ``set_temps``, ``outdoor``) describe [times[i], times[i]+dt),
    so they are one row shorter than ``times``. NaN in set_temps means the
    schedule was idle (compressor held off).
    """

    times: np.ndarray            # (steps+1,)
    zone_ids: tuple[str, ...]
    temps: np.ndarray            # (steps+1, n)
    compressor: np.ndarray       # (steps,) bool
    set_temps: np.ndarray        # (steps,)
    outdoor: np.ndarray          # (steps,)
    dt: float
    final_compressor: CompressorState

    @property
    def steps(self) -> int:
        return len(self.compressor)

    def zone(self, zone_id: str) -> np.ndarray:
        try:
            return self.temps[:, self.zone_ids.index(zone_id)]
        except ValueError:
            raise UnknownZone(f"no zone {zone_id!r} in trace") from None

    @property
    def on_seconds(self) -> float:
        return float(self.compressor.sum()) * self.dt

    @property
    def duty_cycle(self) -> float:
        return float(self.compressor.mean()) if self.steps else 0.0

    @property
    def final_state(self) -> ThermalState:
        return ThermalState(
            time=float(self.times[-1]),
            temperatures=dict(zip(self.zone_ids, self.temps[-1])),
        )


def stable_dt(network: RCNetwork) -> float:
    """Largest admissible Euler step: 0.5 * min_i C_i / (sum_j 1/R_ij)."""
    return float(
        _kernel.stable_dt_bound(network.capacitances, network.conductances)
    )


def _single_boundary(network: RCNetwork) -> None:
    if len(network.boundaries) != 1:
        raise InvalidTopology(
            "simulation supports exactly one boundary node, got "
            f"{network.boundaries}"
        )


def _boundary_temp(network: RCNetwork, boundary_temps) -> float:
    if isinstance(boundary_temps, Mapping):
        b = network.boundaries[0]
        try:
            return float(boundary_temps[b])
        except KeyError:
            raise UnknownZone(f"missing boundary temperature for {b!r}") from None
    return float(boundary_temps)


def step(
    network: RCNetwork,
    state: ThermalState,
    boundary_temps,
    compressor_on: bool,
    ac: ACUnit,
    noise_w=None,
    dt: float = 60.0,
) -> ThermalState:
    """One forward-Euler update; bit-identical to one simulate() step."""
    _single_boundary(network)
    n = len(network.zones)
    temps0 = state.array(network.zone_ids)
    outdoor = np.array([_boundary_temp(network, boundary_temps)])
    if noise_w is None:
        noise = np.zeros((0, 0))
    else:
        noise = np.asarray(noise_w, dtype=np.float64).reshape(1, n)
    temps_out = np.empty((2, n))
    flags_out = np.empty(1, dtype=np.uint8)
    _, _, _, err, err_step = _kernel.run_sim(
        network.conductances,
        1.0 / network.capacitances,
        network.cooling_vector(ac),
        temps0,
        outdoor,
        np.array([np.nan]),
        noise,
        np.array([1 if compressor_on else 0], dtype=np.int8),
        0,
        0.0,
        0.0,
        0.0,
        0.0,
        False,
        state.time,
        0.0,
        state.time,
        float(dt),
        stable_dt(network),
        True,
        temps_out,
        flags_out,
    )
    _raise_kernel_error(err, err_step, dt, network)
    return ThermalState(
        time=state.time + dt,
        temperatures=dict(zip(network.zone_ids, temps_out[1])),
    )


def _raise_kernel_error(err: int, err_step: int, dt: float, network: RCNetwork):
    if err == _kernel.ERR_UNSTABLE:
        raise UnstableStep(
            f"dt={dt} s exceeds the stability bound {stable_dt(network):.1f} s"
        )
    if err == _kernel.ERR_RANGE:
        raise StateOutOfRange(
            f"temperature left [{TEMP_MIN}, {TEMP_MAX}] degC at step {err_step}"
        )


def _setpoint_array(schedule, step_times: np.ndarray) -> np.ndarray:
    if schedule is None:
        return np.full(step_times.shape, np.nan)
    if isinstance(schedule, (int, float, np.floating, np.integer)):
        return np.full(step_times.shape, float(schedule))
    if isinstance(schedule, np.ndarray):
        if schedule.shape != step_times.shape:
            raise InvalidParameter(
                f"setpoint array has {schedule.shape[0]} entries, need {step_times.shape[0]}"
            )
        return schedule.astype(np.float64)
    return np.asarray(schedule.setpoints_at(step_times), dtype=np.float64)


def simulate(
    network: RCNetwork,
    init: ThermalState,
    outdoor,
    schedule,
    ac: ACUnit,
    cfg: HysteresisConfig,
    noise_model=None,
    horizon_s: float = 0.0,
    dt: float = 60.0,
    *,
    forced_compressor: np.ndarray | None = None,
    init_compressor: CompressorState | None = None,
) -> SimulationTrace:
    """Closed-loop rollout over ``horizon_s``.

    outdoor: float or TimeSeries covering the window.
    schedule: None (idle), a fixed set temperature, a per-step array, or any
      object with setpoints_at(times). NaN entries hold the compressor off.
    noise_model: None, a NoiseModel, or a (steps, n) array of watts.
    forced_compressor: optional per-step override; entries 0/1 force the flag,
      -1 leaves the thermostat in charge.
    """
    _single_boundary(network)
    if horizon_s < dt:
        raise InvalidParameter(f"horizon {horizon_s} s is shorter than dt {dt} s")
    steps = int(round(horizon_s / dt))
    n = len(network.zones)
    t0 = init.time
    step_times = t0 + dt * np.arange(steps)

    if isinstance(outdoor, TimeSeries):
        outdoor.require_cover(t0, t0 + steps * dt, slack_s=dt)
        amb = outdoor.at(step_times)
    else:
        amb = np.full(steps, float(outdoor))

    setpoints = _setpoint_array(schedule, step_times)

    if noise_model is None:
        noise = np.zeros((0, 0))
    elif isinstance(noise_model, NoiseModel):
        noise = noise_model.sample(steps, n, dt)
    else:
        noise = np.asarray(noise_model, dtype=np.float64)
        if noise.shape != (steps, n):
            raise InvalidParameter(f"noise array must have shape ({steps}, {n})")

    if forced_compressor is None:
        forced = np.full(steps, -1, dtype=np.int8)
    else:
        forced = np.asarray(forced_compressor).astype(np.int8)
        if forced.shape != (steps,):
            raise InvalidParameter(f"forced_compressor must have {steps} entries")

    comp0 = init_compressor or initial_compressor(t0, ac)
    sense_i = network.require_zone(cfg.resolve_zone(network))

    temps_out = np.empty((steps + 1, n))
    flags_out = np.empty(steps, dtype=np.uint8)
    on, since, cum, err, err_step = _kernel.run_sim(
        network.conductances,
        1.0 / network.capacitances,
        network.cooling_vector(ac),
        init.array(network.zone_ids),
        amb,
        setpoints,
        noise,
        forced,
        sense_i,
        cfg.delta_high,
        cfg.delta_low,
        ac.min_on_s,
        ac.min_off_s,
        bool(comp0.on),
        float(comp0.since),
        float(comp0.cumulative_on),
        t0,
        float(dt),
        stable_dt(network),
        True,
        temps_out,
        flags_out,
    )
    _raise_kernel_error(err, err_step, dt, network)

    end = t0 + steps * dt
    return SimulationTrace(
        times=t0 + dt * np.arange(steps + 1),
        zone_ids=network.zone_ids,
        temps=temps_out,
        compressor=flags_out.astype(bool),
        set_temps=setpoints,
        outdoor=amb,
        dt=float(dt),
        final_compressor=CompressorState(bool(on), float(since), float(cum), end),
    )
