"""Comfort-energy trade-off planning and the receding-horizon loop.

One dial, alpha: 0 plans for pure comfort, 1 for pure energy saving. A plan
assigns one admissible set temperature per slot over the horizon and is scored
by J = alpha * E/E_max + (1 - alpha) * D/D_max, with E and D from a
deterministic closed-loop rollout of the fitted model. Small instances are
enumerated exactly; larger ones use a fixed-width beam over slots.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .errors import InvalidParameter, StaleModel, UnknownZone
from .fitting import FitResult, is_expired
from .series import TimeSeries
from .thermal import (
    ACUnit,
    CompressorState,
    HysteresisConfig,
    NoiseModel,
    RCNetwork,
    SimulationTrace,
    ThermalState,
    _raise_kernel_error,
    initial_compressor,
    simulate,
    stable_dt,
)

DEFAULT_CANDIDATES = tuple(float(c) for c in range(16, 31))
DEFAULT_SLOT_S = 1800.0
DEFAULT_HORIZON_S = 8 * 3600.0
EXHAUSTIVE_LIMIT = 4096
BEAM_WIDTH = 32
NORMALIZER_FLOOR = 1e-6


@dataclass(frozen=True)
class CETConfig:
    """Knob position plus the schedule search space."""

    alpha: float
    preferred_temp: float
    band: float = 0.5
    candidates: tuple[float, ...] = DEFAULT_CANDIDATES
    slot_s: float = DEFAULT_SLOT_S
    horizon_s: float = DEFAULT_HORIZON_S

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise InvalidParameter(f"alpha must be in [0, 1], got {self.alpha}")
        if self.band < 0:
            raise InvalidParameter("band must be >= 0")
        cands = tuple(float(c) for c in self.candidates)
        if not cands:
            raise InvalidParameter("need at least one candidate set temperature")
        if any(b <= a for a, b in zip(cands, cands[1:])):
            raise InvalidParameter("candidates must be strictly increasing")
        object.__setattr__(self, "candidates", cands)
        if self.slot_s <= 0:
            raise InvalidParameter("slot_s must be positive")
        slots = self.horizon_s / self.slot_s
        if abs(slots - round(slots)) > 1e-9 or round(slots) < 1:
            raise InvalidParameter("horizon must be a positive multiple of slot")

    @property
    def slots(self) -> int:
        return int(round(self.horizon_s / self.slot_s))

    def with_horizon(self, horizon_s: float) -> "CETConfig":
        return CETConfig(
            self.alpha, self.preferred_temp, self.band, self.candidates,
            self.slot_s, horizon_s,
        )


@dataclass(frozen=True)
class SetpointSchedule:
    """Contiguous slots of constant set temperature."""

    entries: tuple[tuple[float, float], ...]
    slot_s: float

    def __post_init__(self):
        if not self.entries:
            raise InvalidParameter("schedule needs at least one slot")
        entries = tuple((float(t), float(v)) for t, v in self.entries)
        object.__setattr__(self, "entries", entries)
        for (t0, _), (t1, _) in zip(entries, entries[1:]):
            if abs((t1 - t0) - self.slot_s) > 1e-6:
                raise InvalidParameter(
                    f"slots must be contiguous: {t0} -> {t1} with slot {self.slot_s}"
                )

    @property
    def start(self) -> float:
        return self.entries[0][0]

    @property
    def end(self) -> float:
        return self.entries[-1][0] + self.slot_s

    @property
    def set_temps(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.entries)

    def setpoints_at(self, times: np.ndarray) -> np.ndarray:
        """Step-hold lookup; NaN outside the scheduled span."""
        t = np.asarray(times, dtype=np.float64)
        starts = np.array([s for s, _ in self.entries])
        vals = np.array([v for _, v in self.entries])
        idx = np.searchsorted(starts, t, side="right") - 1
        out = np.where(
            (idx >= 0) & (t < self.end), vals[np.clip(idx, 0, len(vals) - 1)], np.nan
        )
        return out

    def mean_set(self) -> float:
        return float(np.mean([v for _, v in self.entries]))


@dataclass(frozen=True)
class PlanDiagnostics:
    predicted_energy_kwh: float
    predicted_discomfort_degh: float
    e_max: float
    d_max: float
    method: str  # "exhaustive" | "beam"
    nodes_expanded: int
    j_value: float


@dataclass(frozen=True)
class PlantModel:
    """Everything the planner needs about one unit."""

    network: RCNetwork
    ac: ACUnit
    hysteresis: HysteresisConfig = HysteresisConfig()
    comfort_zone: str | None = None
    fit: FitResult | None = None

    @classmethod
    def from_fit(
        cls,
        fit: FitResult,
        ac: ACUnit,
        hysteresis: HysteresisConfig | None = None,
        comfort_zone: str | None = None,
    ) -> "PlantModel":
        """Model a fitted room; thermal power comes from the fit."""
        network = fit.network()
        eff_ac = ACUnit(
            rated_cooling_power=fit.cooling_power,
            rated_electrical_power=ac.rated_electrical_power,
            fan_power=ac.fan_power,
            min_on_s=ac.min_on_s,
            min_off_s=ac.min_off_s,
        )
        return cls(network, eff_ac, hysteresis or HysteresisConfig(), comfort_zone, fit)

    def resolve_comfort_zone(self) -> str:
        if self.comfort_zone is not None:
            return self.comfort_zone
        preset = self.network.preset
        if preset is None:
            raise UnknownZone("comfort_zone required for non-preset networks")
        return preset.comfort_zone


def discomfort_of(
    trace: SimulationTrace,
    preferred_temp: float,
    band: float,
    comfort_zone: str,
) -> float:
    """Band-exceedance integral in degC hours, summed per step."""
    temps = trace.zone(comfort_zone)
    if trace.steps == 0:
        return 0.0
    exceed = np.maximum(np.abs(temps[:-1] - preferred_temp) - band, 0.0)
    return float(exceed.sum() * trace.dt / 3600.0)


def energy_of(trace: SimulationTrace, ac: ACUnit) -> float:
    """kWh drawn: compressor while on plus fan for the active-session span."""
    session_s = float(np.count_nonzero(~np.isnan(trace.set_temps))) * trace.dt
    joules = ac.rated_electrical_power * trace.on_seconds + ac.fan_power * session_s
    return joules / 3.6e6


class _Rollout:
    """Deterministic rollout engine with reusable buffers.

    All schedule evaluations inside one plan share the same drive arrays, so
    per-candidate cost is one kernel call and a few reductions.
    """

    def __init__(
        self,
        plant: PlantModel,
        forecast,
        cfg: CETConfig,
        init: ThermalState,
        init_compressor_state: CompressorState | None,
        dt: float,
    ):
        net = plant.network
        self.net = net
        self.n = len(net.zones)
        self.dt = float(dt)
        self.t0 = init.time
        self.slots = cfg.slots
        self.slot_steps = int(round(cfg.slot_s / dt))
        if self.slot_steps < 1 or abs(self.slot_steps * dt - cfg.slot_s) > 1e-6:
            raise InvalidParameter("slot_s must be a positive multiple of dt")
        self.steps = self.slots * self.slot_steps
        step_times = self.t0 + dt * np.arange(self.steps)
        if isinstance(forecast, TimeSeries):
            forecast.require_cover(self.t0, self.t0 + self.steps * dt, slack_s=dt)
            self.amb = forecast.at(step_times)
        else:
            self.amb = np.full(self.steps, float(forecast))
        self.G = net.conductances
        self.cinv = 1.0 / net.capacitances
        self.cool = net.cooling_vector(plant.ac)
        self.bound = stable_dt(net)
        self.sense_i = net.require_zone(plant.hysteresis.resolve_zone(net))
        self.comfort_i = net.require_zone(plant.resolve_comfort_zone())
        self.temps0 = init.array(net.zone_ids)
        comp = init_compressor_state or initial_compressor(self.t0, plant.ac)
        self.comp0 = (bool(comp.on), float(comp.since))
        self.ac = plant.ac
        self.cfg_h = plant.hysteresis
        self.pref = cfg.preferred_temp
        self.band = cfg.band
        self._noise = np.zeros((0, 0))
        self._forced = np.full(self.steps, -1, dtype=np.int8)
        self._temps_buf = np.empty((self.steps + 1, self.n))
        self._flags_buf = np.empty(self.steps, dtype=np.uint8)

    def _run(self, setpoints, temps0, on0, since0, t0, steps, temps_buf, flags_buf):
        on, since, _, err, err_step = _kernel.run_sim(
            self.G, self.cinv, self.cool, temps0,
            self._amb_slice(t0, steps),
            setpoints,
            self._noise,
            self._forced[:steps],
            self.sense_i,
            self.cfg_h.delta_high, self.cfg_h.delta_low,
            self.ac.min_on_s, self.ac.min_off_s,
            on0, since0, 0.0,
            t0, self.dt, self.bound,
            True, temps_buf, flags_buf,
        )
        _raise_kernel_error(err, err_step, self.dt, self.net)
        return on, since

    def _amb_slice(self, t0: float, steps: int) -> np.ndarray:
        k = int(round((t0 - self.t0) / self.dt))
        return self.amb[k : k + steps]

    def _discomfort(self, temps: np.ndarray, steps: int) -> float:
        col = temps[:steps, self.comfort_i]
        exceed = np.maximum(np.abs(col - self.pref) - self.band, 0.0)
        return float(exceed.sum() * self.dt / 3600.0)

    def evaluate(self, set_temps: tuple[float, ...]) -> tuple[float, float]:
        """(energy kWh, discomfort degC h) of a full-horizon assignment."""
        setpoints = np.repeat(np.asarray(set_temps, dtype=np.float64), self.slot_steps)
        self._run(
            setpoints, self.temps0, self.comp0[0], self.comp0[1],
            self.t0, self.steps, self._temps_buf, self._flags_buf,
        )
        on_s = float(self._flags_buf.sum()) * self.dt
        # association mirrors energy_of so planner J matches public accounting
        energy = (
            self.ac.rated_electrical_power * on_s
            + self.ac.fan_power * (float(self.steps) * self.dt)
        ) / 3.6e6
        return energy, self._discomfort(self._temps_buf, self.steps)

    def extend_slot(self, snapshot, set_temp: float):
        """Advance one slot from a beam node; returns the successor node."""
        temps0, on0, since0, t0, energy, disc = snapshot
        steps = self.slot_steps
        temps_buf = np.empty((steps + 1, self.n))
        flags_buf = np.empty(steps, dtype=np.uint8)
        setpoints = np.full(steps, float(set_temp))
        on, since = self._run(setpoints, temps0, on0, since0, t0, steps, temps_buf, flags_buf)
        on_s = float(flags_buf.sum()) * self.dt
        d_energy = (
            self.ac.rated_electrical_power * on_s
            + self.ac.fan_power * (float(steps) * self.dt)
        ) / 3.6e6
        return (
            temps_buf[-1].copy(),
            bool(on),
            float(since),
            t0 + steps * self.dt,
            energy + d_energy,
            disc + self._discomfort(temps_buf, steps),
        )

    def root(self):
        return (self.temps0, self.comp0[0], self.comp0[1], self.t0, 0.0, 0.0)


def normalizers(
    plant: PlantModel,
    forecast,
    cfg: CETConfig,
    init: ThermalState,
    init_compressor_state: CompressorState | None = None,
    dt: float = 60.0,
) -> tuple[float, float]:
    """(E_max, D_max): energy at the coldest candidate, discomfort at the warmest."""
    rollout = _Rollout(plant, forecast, cfg, init, init_compressor_state, dt)
    e_max, _ = rollout.evaluate((cfg.candidates[0],) * cfg.slots)
    _, d_max = rollout.evaluate((cfg.candidates[-1],) * cfg.slots)
    return max(e_max, NORMALIZER_FLOOR), max(d_max, NORMALIZER_FLOOR)


def _search_space(cfg: CETConfig) -> str:
    if cfg.slots * math.log(len(cfg.candidates)) <= math.log(EXHAUSTIVE_LIMIT) + 1e-12:
        return "exhaustive"
    return "beam"


def plan(
    plant: PlantModel,
    forecast,
    cfg: CETConfig,
    init: ThermalState,
    noise_seed: int | None = None,
    *,
    init_compressor_state: CompressorState | None = None,
    dt: float = 60.0,
    now: float | None = None,
    force_method: str | None = None,
    fixed_normalizers: tuple[float, float] | None = None,
) -> tuple[SetpointSchedule, PlanDiagnostics]:
    """Pick the J-minimal per-slot assignment of candidate set temperatures.

    Planning is deterministic: the model rolls out with zero noise regardless
    of noise_seed (robustness is the replanning loop's job). Ties break to
    lower discomfort, then to the higher mean set temperature.
    fixed_normalizers carries (E_max, D_max) from an enclosing loop so that
    successive replans keep optimizing the same weighted objective.
    """
    del noise_seed  # accepted for interface stability; planning is noise-free
    if now is not None and plant.fit is not None and is_expired(plant.fit, now):
        age_d = (now - plant.fit.created_at) / 86400.0
        raise StaleModel(f"fitted model is {age_d:.1f} days old; refit required")
    rollout = _Rollout(plant, forecast, cfg, init, init_compressor_state, dt)
    if fixed_normalizers is not None:
        e_max, d_max = fixed_normalizers
    else:
        e_max = max(rollout.evaluate((cfg.candidates[0],) * cfg.slots)[0], NORMALIZER_FLOOR)
        d_max = max(rollout.evaluate((cfg.candidates[-1],) * cfg.slots)[1], NORMALIZER_FLOOR)
    alpha = cfg.alpha
    method = force_method or _search_space(cfg)
    if method not in ("exhaustive", "beam"):
        raise InvalidParameter(f"unknown search method {method!r}")

    def score(energy: float, disc: float) -> float:
        return alpha * energy / e_max + (1.0 - alpha) * disc / d_max

    nodes = 0
    if method == "exhaustive":
        best = None
        for assignment in itertools.product(cfg.candidates, repeat=cfg.slots):
            energy, disc = rollout.evaluate(assignment)
            nodes += 1
            key = (score(energy, disc), disc, -float(np.mean(assignment)))
            if best is None or key < best[0]:
                best = (key, assignment, energy, disc)
        assert best is not None
        _, assignment, energy, disc = best
    else:
        beam = [((0.0, 0.0, 0.0), (), rollout.root())]
        for _ in range(cfg.slots):
            grown = []
            for _, partial, snap in beam:
                for c in cfg.candidates:
                    nxt = rollout.extend_slot(snap, c)
                    nodes += 1
                    assign = partial + (c,)
                    key = (
                        score(nxt[4], nxt[5]),
                        nxt[5],
                        -float(np.mean(assign)),
                    )
                    grown.append((key, assign, nxt))
            grown.sort(key=lambda g: g[0])
            beam = grown[:BEAM_WIDTH]
        _, assignment, snap = beam[0]
        energy, disc = snap[4], snap[5]

    entries = tuple(
        (init.time + i * cfg.slot_s, float(v)) for i, v in enumerate(assignment)
    )
    schedule = SetpointSchedule(entries, cfg.slot_s)
    diag = PlanDiagnostics(
        predicted_energy_kwh=energy,
        predicted_discomfort_degh=disc,
        e_max=e_max,
        d_max=d_max,
        method=method,
        nodes_expanded=nodes,
        j_value=score(energy, disc),
    )
    return schedule, diag


@dataclass(frozen=True)
class ClosedLoopReport:
    """Realized accounting on the true room plus the first plan's prediction."""

    alpha: float
    realized_energy_kwh: float
    realized_discomfort_degh: float
    predicted_energy_kwh: float
    predicted_discomfort_degh: float
    e_max: float
    d_max: float

    @property
    def realized_j(self) -> float:
        return (
            self.alpha * self.realized_energy_kwh / self.e_max
            + (1 - self.alpha) * self.realized_discomfort_degh / self.d_max
        )

    @property
    def predicted_j(self) -> float:
        return (
            self.alpha * self.predicted_energy_kwh / self.e_max
            + (1 - self.alpha) * self.predicted_discomfort_degh / self.d_max
        )


def _concat_traces(parts: list[SimulationTrace]) -> SimulationTrace:
    first = parts[0]
    temps = np.concatenate([p.temps[:-1] for p in parts] + [parts[-1].temps[-1:]])
    times = np.concatenate([p.times[:-1] for p in parts] + [parts[-1].times[-1:]])
    return SimulationTrace(
        times=times,
        zone_ids=first.zone_ids,
        temps=temps,
        compressor=np.concatenate([p.compressor for p in parts]),
        set_temps=np.concatenate([p.set_temps for p in parts]),
        outdoor=np.concatenate([p.outdoor for p in parts]),
        dt=first.dt,
        final_compressor=parts[-1].final_compressor,
    )


def run_closed_loop(
    plant: PlantModel,
    true_plant: PlantModel,
    forecast,
    cfg: CETConfig,
    init: ThermalState,
    duration_s: float,
    replan_every_s: float | None = None,
    noise_seed: int | None = None,
    *,
    noise_sigma_w: float = 0.0,
    dt: float = 60.0,
) -> tuple[SimulationTrace, ClosedLoopReport]:
    """Receding-horizon control of true_plant using plans built on plant.

    The planning model and the true room may differ (model error); realized
    energy and discomfort are accounted on the true room. Noise, when enabled,
    is drawn once for the whole duration so replan cadence does not change
    the disturbance path.
    """
    replan = float(replan_every_s if replan_every_s is not None else cfg.slot_s)
    if replan <= 0 or abs(replan / cfg.slot_s - round(replan / cfg.slot_s)) > 1e-9:
        raise InvalidParameter("replan_every must be a positive multiple of slot")
    n_segments = duration_s / replan
    if abs(n_segments - round(n_segments)) > 1e-9 or round(n_segments) < 1:
        raise InvalidParameter("duration must be a positive multiple of replan_every")
    n_segments = int(round(n_segments))

    total_steps = int(round(duration_s / dt))
    if noise_sigma_w > 0:
        noise_all = NoiseModel(
            sigma_w=noise_sigma_w, seed=0 if noise_seed is None else noise_seed
        ).sample(total_steps, len(true_plant.network.zones), dt)
    else:
        noise_all = None

    state = init
    comp = initial_compressor(init.time, true_plant.ac)
    parts: list[SimulationTrace] = []
    first_diag: PlanDiagnostics | None = None
    steps_per_segment = int(round(replan / dt))

    norms: tuple[float, float] | None = None
    for seg in range(n_segments):
        remaining = duration_s - seg * replan
        seg_cfg = cfg.with_horizon(min(cfg.horizon_s, remaining))
        schedule, diag = plan(
            plant, forecast, seg_cfg, state,
            init_compressor_state=comp, dt=dt,
            fixed_normalizers=norms,
        )
        if first_diag is None:
            first_diag = diag
            norms = (diag.e_max, diag.d_max)
        lo = seg * steps_per_segment
        seg_noise = noise_all[lo : lo + steps_per_segment] if noise_all is not None else None
        seg_trace = simulate(
            true_plant.network,
            state,
            forecast,
            schedule,
            true_plant.ac,
            true_plant.hysteresis,
            seg_noise,
            horizon_s=replan,
            dt=dt,
            init_compressor=comp,
        )
        parts.append(seg_trace)
        state = seg_trace.final_state
        comp = seg_trace.final_compressor

    trace = _concat_traces(parts)
    assert first_diag is not None
    report = ClosedLoopReport(
        alpha=cfg.alpha,
        realized_energy_kwh=energy_of(trace, true_plant.ac),
        realized_discomfort_degh=discomfort_of(
            trace, cfg.preferred_temp, cfg.band, true_plant.resolve_comfort_zone()
        ),
        predicted_energy_kwh=first_diag.predicted_energy_kwh,
        predicted_discomfort_degh=first_diag.predicted_discomfort_degh,
        e_max=first_diag.e_max,
        d_max=first_diag.d_max,
    )
    return trace, report
