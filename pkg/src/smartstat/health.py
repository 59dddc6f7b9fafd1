"""Online refrigerant-leak symptom detection.

A slow leak shows up in ambient data long before the unit dies: the daily
refitted cooling power drifts down, duty cycles stretch, pulldowns take
longer and the room stops reaching its set temperature. This module turns
one day of observations into a feature vector, tracks per-unit baselines
with exponential forgetting, scores each day against the baseline, and runs
a latched CUSUM detector on the score. Units with thin history borrow a
fleet prior through shrinkage so detection works from the first week.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .control import energy_of
from .energy import DecodeConfig, decode_cycles
from .errors import (
    ColdStart,
    CoverageError,
    IllConditioned,
    InvalidParameter,
    MissingDrive,
    NoAlarmWindow,
    OutOfOrderUpdate,
)
from .fitting import (
    Q_BOUNDS,
    FitResult,
    GriddedObservations,
    ObservationSeries,
    refit_cooling_power,
)
from .series import TimeSeries
from .thermal import ACUnit, HysteresisConfig, ThermalState, simulate

FEATURE_KEYS = (
    "duty_cycle",
    "cooling_rate",
    "attainment_gap",
    "pulldown_minutes",
    "qhat",
)

DEFAULT_DECAY = 1.0 / 14.0
DEFAULT_ALLOWANCE = 0.5
DEFAULT_THRESHOLD = 5.0
DEFAULT_SHRINKAGE_DAYS = 14.0
# arming gate: the EW variance starts from zero, so its effective sample
# count n = 14(1 - (13/14)^k) reaches only ~9 days by day 14 and the early
# std runs ~20% low, inflating z right after arming. Two decay constants
# of history puts the estimate within a few percent of converged.
DEFAULT_WARMUP_DAYS = 28
MIN_COVERAGE_S = 2 * 3600.0
VAR_FLOOR = 1e-6

HEALTHY = "healthy"
ALARMED = "alarmed"


@dataclass(frozen=True)
class HealthFeatures:
    """One day of health evidence; all feature fields absent when invalid."""

    date: float
    duty_cycle: float | None = None
    cooling_rate: float | None = None
    attainment_gap: float | None = None
    pulldown_minutes: float | None = None
    qhat: float | None = None
    valid: bool = False

    def __post_init__(self):
        if self.valid:
            missing = [k for k in FEATURE_KEYS if getattr(self, k) is None]
            if missing:
                raise InvalidParameter(f"valid features missing {missing}")
            if not 0.0 <= self.duty_cycle <= 1.0:
                raise InvalidParameter("duty_cycle must lie in [0, 1]")
            if self.pulldown_minutes < 0:
                raise InvalidParameter("pulldown_minutes must be >= 0")

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in FEATURE_KEYS}


@dataclass(frozen=True)
class Baseline:
    """Exponentially weighted per-feature mean and variance."""

    means: Mapping[str, float] = field(default_factory=dict)
    variances: Mapping[str, float] = field(default_factory=dict)
    n_days: float = 0.0
    from_prior: bool = False

    def __post_init__(self):
        if self.n_days < 0:
            raise InvalidParameter("n_days must be >= 0")
        if any(v < 0 for v in self.variances.values()):
            raise InvalidParameter("variances must be >= 0")

    def std(self, key: str, floor: float = VAR_FLOOR) -> float:
        return math.sqrt(max(self.variances.get(key, 0.0), floor))


def update_baseline(b: Baseline, f: HealthFeatures, decay: float = DEFAULT_DECAY) -> Baseline:
    """One EW mean/variance step per feature; invalid days are a no-op."""
    if not 0.0 < decay <= 1.0:
        raise InvalidParameter("decay must lie in (0, 1]")
    if not f.valid:
        return b
    x = f.as_dict()
    if b.n_days == 0:
        return Baseline(
            means=x, variances={k: 0.0 for k in x}, n_days=1.0,
            from_prior=b.from_prior,
        )
    means, variances = dict(b.means), dict(b.variances)
    for k, v in x.items():
        m0 = means.get(k, v)
        diff = v - m0
        incr = decay * diff
        means[k] = m0 + incr
        variances[k] = (1.0 - decay) * (variances.get(k, 0.0) + diff * incr)
    return Baseline(
        means=means, variances=variances,
        n_days=b.n_days * (1.0 - decay) + 1.0,
        from_prior=b.from_prior,
    )


def health_index(f: HealthFeatures, b: Baseline) -> float:
    """Capacity-loss score: how far today's qhat sits below the baseline.

    Positive and growing as the cooling power shrinks; roughly N(0,1) for a
    healthy unit once the baseline has settled.
    """
    if b.n_days < 1 and not b.from_prior:
        raise ColdStart("baseline has no history and no prior")
    if not f.valid or f.qhat is None:
        raise InvalidParameter("health_index needs a valid feature day")
    return (b.means["qhat"] - f.qhat) / b.std("qhat")


@dataclass(frozen=True)
class Alert:
    date: float
    z: float
    cusum: float
    message: str


@dataclass(frozen=True)
class DriftDetector:
    """One-sided latched CUSUM on the standardized health index."""

    cusum: float = 0.0
    k: float = DEFAULT_ALLOWANCE
    h: float = DEFAULT_THRESHOLD
    state: str = HEALTHY
    alarm_date: float | None = None
    last_date: float | None = None

    def __post_init__(self):
        if self.cusum < 0:
            raise InvalidParameter("cusum must be >= 0")
        if self.k < 0 or self.h <= 0:
            raise InvalidParameter("need k >= 0 and h > 0")
        if self.state not in (HEALTHY, ALARMED):
            raise InvalidParameter(f"unknown detector state {self.state!r}")


def detector_update(
    d: DriftDetector, z: float, date: float
) -> tuple[DriftDetector, Alert | None]:
    """Chronological CUSUM step; emits at most one Alert per latch."""
    if d.last_date is not None and date <= d.last_date:
        raise OutOfOrderUpdate(
            f"update for t={date:.0f} is not after t={d.last_date:.0f}"
        )
    cusum = max(0.0, d.cusum + z - d.k)
    if d.state == ALARMED:
        return replace(d, cusum=cusum, last_date=date), None
    if cusum >= d.h:
        nxt = replace(d, cusum=cusum, last_date=date, state=ALARMED, alarm_date=date)
        return nxt, Alert(
            date=date, z=z, cusum=cusum,
            message="sustained cooling-capacity loss; check refrigerant charge",
        )
    return replace(d, cusum=cusum, last_date=date), None


def reset_detector(d: DriftDetector) -> DriftDetector:
    """Back to healthy after maintenance; tuning survives, history does not."""
    return DriftDetector(k=d.k, h=d.h)


@dataclass(frozen=True)
class FleetPrior:
    """Pooled baseline over healthy fleet units, for shrinkage transfer."""

    baseline: Baseline
    unit_count: int
    n0: float = DEFAULT_SHRINKAGE_DAYS

    def __post_init__(self):
        if self.unit_count < 1:
            raise InvalidParameter("prior needs at least one unit")
        if self.n0 <= 0:
            raise InvalidParameter("n0 must be positive")


def build_fleet_prior(
    baselines: Sequence[Baseline], n0: float = DEFAULT_SHRINKAGE_DAYS
) -> FleetPrior:
    """Pool per-unit baselines; pass healthy (non-alarmed) units only.

    Pooled variance is within-unit plus between-unit spread, so a unit
    scored against the prior is not surprised by fleet diversity.
    """
    usable = [b for b in baselines if b.n_days >= 1]
    if not usable:
        raise InvalidParameter("no unit baseline with history to pool")
    keys = set(usable[0].means)
    means, variances = {}, {}
    for k in keys:
        unit_means = np.array([b.means[k] for b in usable])
        unit_vars = np.array([b.variances.get(k, 0.0) for b in usable])
        means[k] = float(unit_means.mean())
        variances[k] = float(unit_vars.mean() + unit_means.var())
    pooled = Baseline(means=means, variances=variances, n_days=0.0, from_prior=True)
    return FleetPrior(baseline=pooled, unit_count=len(usable), n0=n0)


def blend_prior(prior: FleetPrior, local: Baseline) -> Baseline:
    """Shrink the local baseline toward the fleet, weighted by history."""
    w = local.n_days / (local.n_days + prior.n0)
    means, variances = {}, {}
    for k in prior.baseline.means:
        means[k] = w * local.means.get(k, 0.0) + (1 - w) * prior.baseline.means[k]
        variances[k] = (
            w * local.variances.get(k, 0.0) + (1 - w) * prior.baseline.variances[k]
        )
    return Baseline(
        means=means, variances=variances, n_days=local.n_days, from_prior=True
    )


def _runs_of(mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open [start, end) spans of the True stretches in mask."""
    if len(mask) == 0:
        return []
    edges = np.flatnonzero(np.diff(mask.astype(np.int8)))
    bounds = np.concatenate(([0], edges + 1, [len(mask)]))
    return [(int(s), int(e)) for s, e in zip(bounds[:-1], bounds[1:]) if mask[s]]


def _window_flags(
    grid: GriddedObservations, model: FitResult, decode_cfg: DecodeConfig | None
) -> np.ndarray:
    """Per-sample compressor flags: recorded when complete, decoded otherwise."""
    if (grid.compressor >= 0).all():
        return grid.compressor.astype(bool)
    seg = decode_cycles(grid, model, decode_cfg)
    return seg.flags


def daily_features(
    day: ObservationSeries,
    model: FitResult,
    ac: ACUnit,
    *,
    decode_cfg: DecodeConfig | None = None,
    band_entry_c: float = 0.5,
    dt: float = 60.0,
) -> HealthFeatures:
    """Compress one day of records into a health feature vector.

    Features use door-closed intervals only; a day with under two hours of
    door-closed thermostat-active coverage, or with no compressor runtime,
    comes back with valid=False instead of raising.

    When flags come from a decode, the decode and the capacity refit run a
    second pass against each other: flags decoded with the published healthy
    capacity undercount runtime once a unit degrades, so the first qhat is
    fed back into a re-decode before anything is reported.
    """
    date = float(day.start) if len(day) else 0.0
    invalid = HealthFeatures(date=date, valid=False)
    try:
        grid = day.to_grid(dt)
    except (CoverageError, MissingDrive):
        return invalid

    closed = ~grid.door_open[:-1]
    active = ~np.isnan(grid.set_temps[:-1])
    usable = closed & active
    if usable.sum() * dt < MIN_COVERAGE_S:
        return invalid

    decoded = not (grid.compressor >= 0).all()
    flags = _window_flags(grid, model, decode_cfg)[:-1]
    if not (flags & usable).any():
        return invalid
    try:
        qhat = refit_cooling_power(
            model.params, model.preset, day, dt, forced=flags.astype(np.int8)
        )
        if decoded:
            # a leak only shrinks capacity: never re-decode above the
            # published healthy value, or an undercounting first pass
            # would feed itself
            ref = min(qhat, model.cooling_power)
            flags = _window_flags(
                grid, replace(model, cooling_power=ref), decode_cfg
            )[:-1]
            if not (flags & usable).any():
                return invalid
            qhat = refit_cooling_power(
                model.params, model.preset, day, dt, forced=flags.astype(np.int8)
            )
    except (IllConditioned, CoverageError):
        return invalid
    if not Q_BOUNDS[0] * 1.01 <= qhat <= Q_BOUNDS[1] * 0.99:
        return invalid  # estimate pinned at a bound: day not identifiable

    on = flags & usable
    duty = float(on.sum() / usable.sum())

    room_col = grid.zone_ids.index(model.preset.primary_zone)
    room = grid.temps[:, room_col]
    drops = room[:-1][on] - room[1:][on]
    gap = max(0.1, float(np.mean(grid.outdoor[:-1][on] - room[:-1][on])))
    cooling_rate = float(np.mean(drops)) / dt * 3600.0 / gap

    last_hour = max(1, int(round(3600.0 / dt)))
    gap_samples = []
    pulldowns = []
    for s, e in _runs_of(active):
        tail = np.arange(max(s, e - last_hour), e)
        tail = tail[closed[tail]]
        if len(tail):
            gap_samples.append(room[tail] - grid.set_temps[tail])
        if not closed[s]:
            continue  # door open at session start: pulldown not attributable
        target = grid.set_temps[s] + band_entry_c
        inside = np.flatnonzero(room[s:e] <= target)
        reached = int(inside[0]) if len(inside) else e - s
        pulldowns.append(reached * dt / 60.0)

    if not gap_samples or not pulldowns:
        return invalid
    attainment = float(np.mean(np.concatenate(gap_samples)))
    pulldown = float(np.mean(pulldowns))

    return HealthFeatures(
        date=date,
        duty_cycle=duty,
        cooling_rate=cooling_rate,
        attainment_gap=attainment,
        pulldown_minutes=pulldown,
        qhat=qhat,
        valid=True,
    )


@dataclass(frozen=True)
class MonitorState:
    """Single-writer per-unit monitoring state, advanced one day at a time."""

    baseline: Baseline = field(default_factory=Baseline)
    detector: DriftDetector = field(default_factory=DriftDetector)
    prior: FleetPrior | None = None
    days_seen: int = 0
    warmup_days: int = DEFAULT_WARMUP_DAYS

    @property
    def armed(self) -> bool:
        """Scoring starts once history suffices, or immediately with a prior."""
        return self.prior is not None or self.days_seen >= self.warmup_days

    def effective_baseline(self) -> Baseline:
        if self.prior is not None:
            return blend_prior(self.prior, self.baseline)
        return self.baseline


def monitor_day(
    state: MonitorState, f: HealthFeatures, decay: float = DEFAULT_DECAY
) -> tuple[MonitorState, float | None, Alert | None]:
    """Score today against yesterday's baseline, then absorb today.

    Invalid days pass through untouched. Returns the advanced state, the
    health index (None while warming up) and an Alert on a fresh latch.
    """
    if not f.valid:
        return state, None, None
    z, alert, detector = None, None, state.detector
    if state.armed:
        z = health_index(f, state.effective_baseline())
        detector, alert = detector_update(detector, z, f.date)
    baseline = update_baseline(state.baseline, f, decay)
    nxt = replace(
        state, baseline=baseline, detector=detector, days_seen=state.days_seen + 1
    )
    return nxt, z, alert


@dataclass(frozen=True)
class CounterfactualReport:
    """What the fault cost, against a healthy twin on the same days."""

    excess_energy_kwh: float
    mean_temp_shortfall_c: float
    window: tuple[float, float]


def counterfactual_report(
    observations: ObservationSeries,
    healthy_model: FitResult,
    faulty_qhat: TimeSeries,
    ac: ACUnit,
    detector: DriftDetector,
    *,
    hysteresis: HysteresisConfig | None = None,
    decode_cfg: DecodeConfig | None = None,
    dt: float = 60.0,
) -> CounterfactualReport:
    """Price the alarm window against a simulated healthy twin.

    The twin serves the same setpoints and weather with the healthy model's
    capacity; realized flags come from records when present, otherwise from
    decoding each day with that day's estimated cooling power.
    """
    if detector.state != ALARMED or detector.alarm_date is None:
        raise NoAlarmWindow("detector has no active alarm")
    window = observations.window(detector.alarm_date, float("inf"))
    if len(window) < 2:
        raise NoAlarmWindow("no observations after the alarm date")
    grid = window.to_grid(dt)

    if (grid.compressor >= 0).all():
        flags = grid.compressor.astype(bool)
    else:
        flags = np.zeros(len(grid.times), dtype=bool)
        day0 = math.floor(grid.times[0] / 86400.0)
        day1 = math.floor(grid.times[-1] / 86400.0)
        for d in range(int(day0), int(day1) + 1):
            sel = (grid.times >= d * 86400.0) & (grid.times < (d + 1) * 86400.0)
            if sel.sum() < 2:
                continue
            day_model = replace(
                healthy_model, cooling_power=float(faulty_qhat.at(d * 86400.0))
            )
            sub = GriddedObservations(
                times=grid.times[sel], zone_ids=grid.zone_ids,
                temps=grid.temps[sel], outdoor=grid.outdoor[sel],
                set_temps=grid.set_temps[sel], door_open=grid.door_open[sel],
                compressor=grid.compressor[sel], dt=dt,
            )
            flags[sel] = decode_cycles(sub, day_model, decode_cfg).flags

    session = ~np.isnan(grid.set_temps[:-1])
    on_s = float(np.sum(flags[:-1])) * dt
    session_s = float(np.sum(session)) * dt
    realized_kwh = (
        ac.rated_electrical_power * on_s + ac.fan_power * session_s
    ) / 3.6e6

    network = healthy_model.network()
    room_col = grid.zone_ids.index(healthy_model.preset.primary_zone)
    init = ThermalState(
        time=float(grid.times[0]),
        temperatures={z: float(grid.temps[0, room_col]) for z in network.zone_ids},
    )
    twin_ac = replace(ac, rated_cooling_power=healthy_model.cooling_power)
    outdoor = TimeSeries(grid.times, grid.outdoor)
    twin = simulate(
        network, init, outdoor, grid.set_temps[:-1], twin_ac,
        hysteresis or HysteresisConfig(), None,
        horizon_s=float(grid.times[-1] - grid.times[0]), dt=dt,
    )
    twin_kwh = energy_of(twin, twin_ac)

    twin_room = twin.temps[:, twin.zone_ids.index(healthy_model.preset.primary_zone)]
    shortfall = float(
        np.mean(grid.temps[:-1, room_col][session] - twin_room[:-1][session])
    ) if session.any() else 0.0

    return CounterfactualReport(
        excess_energy_kwh=realized_kwh - twin_kwh,
        mean_temp_shortfall_c=shortfall,
        window=(float(grid.times[0]), float(grid.times[-1])),
    )
