"""Grey-box parameter identification from observed room traces.

The tuned quantities are the RC values of a preset network plus, optionally,
the AC cooling power. The objective simulates the network forward from the
first observed state, driving the compressor with observed flags where
available and with a thermostat emulation over the observed sensed-zone
temperature otherwise, and scores mean squared error against every sensed
zone. Optimization runs in log-parameter space (R, C, Q are positive scale
quantities) with multi-start local search.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import _kernel
from .errors import (
    CoverageError,
    IllConditioned,
    InvalidParameter,
    MissingDrive,
)
from .thermal import (
    ACUnit,
    HysteresisConfig,
    RCNetwork,
    ZonePreset,
    build_room_model,
    stable_dt,
)

COOLING_PARAM = "q_ac"

DEFAULT_DT_S = 60.0
MIN_WINDOW_S = 6 * 3600.0
MIN_DRIFT_C = 2.0
DEFAULT_WINDOW_DAYS = 7
STALE_AFTER_DAYS = 14
OBJECTIVE_MAX_GAP_S = 900.0

# objective value used to steer the optimizer away from unstable parameter
# corners without raising inside a line search
_UNSTABLE_PENALTY = 1.0e9


@dataclass(frozen=True)
class ObservationRecord:
    """One sensing sample.

    set_temp None means the AC was idle; compressor_on None means the flag
    was not observed (inbuilt thermostat without telemetry).
    """

    timestamp: float
    sensed_temps: Mapping[str, float]
    outdoor_temp: float | None
    set_temp: float | None = None
    door_open: bool = False
    compressor_on: bool | None = None
    electrical_power: float | None = None

    def __post_init__(self):
        if not self.sensed_temps:
            raise InvalidParameter("record needs at least one sensed zone")
        object.__setattr__(self, "sensed_temps", dict(self.sensed_temps))


class ObservationSeries:
    """Strictly time-ordered records with array access helpers."""

    def __init__(self, records: Iterable[ObservationRecord]):
        recs = list(records)
        if any(
            recs[i + 1].timestamp <= recs[i].timestamp for i in range(len(recs) - 1)
        ):
            recs.sort(key=lambda r: r.timestamp)
            for a, b in zip(recs, recs[1:]):
                if b.timestamp <= a.timestamp:
                    raise InvalidParameter(
                        f"duplicate observation timestamp {b.timestamp}"
                    )
        self.records = recs

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return ObservationSeries(self.records[i])
        return self.records[i]

    @property
    def start(self) -> float:
        return self.records[0].timestamp

    @property
    def end(self) -> float:
        return self.records[-1].timestamp

    @property
    def span_s(self) -> float:
        return self.end - self.start if self.records else 0.0

    def window(self, t0: float, t1: float) -> "ObservationSeries":
        return ObservationSeries(
            [r for r in self.records if t0 <= r.timestamp <= t1]
        )

    def zone_ids(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for r in self.records:
            for z in r.sensed_temps:
                seen.setdefault(z)
        return tuple(seen)

    def to_grid(self, dt: float, max_gap_s: float = OBJECTIVE_MAX_GAP_S) -> "GriddedObservations":
        """Resample onto a uniform dt grid anchored at the first record.

        Temperatures interpolate linearly; set_temp, door and compressor
        flags hold the most recent value. Gaps beyond max_gap_s refuse.
        """
        if not self.records:
            raise CoverageError("empty observation series")
        if len(self.records) < 2:
            raise CoverageError("need at least two observations")
        times = np.array([r.timestamp for r in self.records])
        gaps = np.diff(times)
        if gaps.max() > max_gap_s:
            i = int(np.argmax(gaps))
            raise CoverageError(
                f"observation gap of {gaps[i]:.0f} s at t={times[i]:.0f} "
                f"exceeds {max_gap_s:.0f} s"
            )
        zones = self.zone_ids()
        raw = np.full((len(times), len(zones)), np.nan)
        for k, r in enumerate(self.records):
            for j, z in enumerate(zones):
                if z in r.sensed_temps:
                    raw[k, j] = r.sensed_temps[z]
        outdoor_raw = np.array(
            [np.nan if r.outdoor_temp is None else r.outdoor_temp for r in self.records]
        )
        if np.isnan(outdoor_raw).all():
            raise MissingDrive("no outdoor temperature in observations")

        steps = int(math.floor((times[-1] - times[0]) / dt))
        grid = times[0] + dt * np.arange(steps + 1)

        temps = np.empty((steps + 1, len(zones)))
        for j in range(len(zones)):
            col = raw[:, j]
            ok = ~np.isnan(col)
            if ok.sum() < 2:
                raise CoverageError(f"zone {zones[j]!r} has fewer than 2 samples")
            temps[:, j] = np.interp(grid, times[ok], col[ok])
        ok = ~np.isnan(outdoor_raw)
        outdoor = np.interp(grid, times[ok], outdoor_raw[ok])

        # previous-sample hold for stepwise quantities
        idx = np.searchsorted(times, grid, side="right") - 1
        idx = np.clip(idx, 0, len(times) - 1)
        set_raw = np.array(
            [np.nan if r.set_temp is None else r.set_temp for r in self.records]
        )
        set_temps = set_raw[idx]
        door = np.array([r.door_open for r in self.records], dtype=bool)[idx]
        comp_raw = np.array(
            [-1 if r.compressor_on is None else int(r.compressor_on) for r in self.records],
            dtype=np.int8,
        )
        comp = comp_raw[idx]
        return GriddedObservations(
            times=grid, zone_ids=zones, temps=temps, outdoor=outdoor,
            set_temps=set_temps, door_open=door, compressor=comp, dt=float(dt),
        )


@dataclass(frozen=True)
class GriddedObservations:
    """Uniform-grid view of a series; sample i sits at times[i]."""

    times: np.ndarray
    zone_ids: tuple[str, ...]
    temps: np.ndarray
    outdoor: np.ndarray
    set_temps: np.ndarray
    door_open: np.ndarray
    compressor: np.ndarray  # int8, -1 where unobserved
    dt: float

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    def compressor_cycles(self) -> int:
        """OFF-to-ON edges among observed-or-emulated flags."""
        flags = self.compressor[self.compressor >= 0]
        if len(flags) < 2:
            return 0
        return int(np.sum((flags[1:] == 1) & (flags[:-1] == 0)))


@dataclass(frozen=True)
class ParamBound:
    name: str
    lower: float
    upper: float
    initial: float
    log: bool = True

    def __post_init__(self):
        if not self.lower < self.upper:
            raise InvalidParameter(f"{self.name}: lower must be < upper")
        if not (self.lower <= self.initial <= self.upper):
            raise InvalidParameter(f"{self.name}: initial outside bounds")
        if self.log and self.lower <= 0:
            raise InvalidParameter(f"{self.name}: log transform needs lower > 0")


@dataclass(frozen=True)
class ParamSpec:
    """Ordered parameter bounds; R, C and cooling power use log transform."""

    entries: tuple[ParamBound, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def entry(self, name: str) -> ParamBound:
        for e in self.entries:
            if e.name == name:
                return e
        raise InvalidParameter(f"unknown parameter {name!r}")

    def to_internal(self, values: Mapping[str, float]) -> np.ndarray:
        out = np.empty(len(self.entries))
        for i, e in enumerate(self.entries):
            v = float(values[e.name])
            out[i] = math.log(v) if e.log else v
        return out

    def from_internal(self, x: np.ndarray) -> dict[str, float]:
        return {
            e.name: (math.exp(x[i]) if e.log else float(x[i]))
            for i, e in enumerate(self.entries)
        }

    def internal_bounds(self) -> list[tuple[float, float]]:
        out = []
        for e in self.entries:
            if e.log:
                out.append((math.log(e.lower), math.log(e.upper)))
            else:
                out.append((e.lower, e.upper))
        return out

    def clip_interior(self, values: Mapping[str, float], margin: float = 1e-9) -> dict[str, float]:
        """Pull values strictly inside bounds (bound respect on reporting)."""
        out = {}
        for e in self.entries:
            lo = e.lower * (1 + margin) if e.log else e.lower + margin
            hi = e.upper * (1 - margin) if e.log else e.upper - margin
            out[e.name] = min(max(float(values[e.name]), lo), hi)
        return out


R_BOUNDS = (1e-4, 1.0)
C_BOUNDS = (1e3, 1e7)
Q_BOUNDS = (500.0, 10000.0)


def param_names(template: ZonePreset) -> tuple[str, ...]:
    if template is ZonePreset.SINGLE_ZONE:
        return ("c_room", "c_wall", "r_room_wall", "r_wall_ambient")
    return (
        "c_hir", "c_mir", "c_lir", "c_wall",
        "r_hir_mir", "r_mir_lir",
        "r_hir_wall", "r_mir_wall", "r_lir_wall",
        "r_wall_ambient",
    )


def default_param_spec(
    template: ZonePreset,
    fit_cooling: bool = False,
    initial: Mapping[str, float] | None = None,
) -> ParamSpec:
    """Bounds for every preset parameter; geometric-middle initial guesses."""
    entries = []
    for name in param_names(template):
        lo, hi = C_BOUNDS if name.startswith("c_") else R_BOUNDS
        guess = math.sqrt(lo * hi)
        if initial and name in initial:
            guess = float(initial[name])
        entries.append(ParamBound(name, lo, hi, guess))
    if fit_cooling:
        lo, hi = Q_BOUNDS
        guess = float(initial.get(COOLING_PARAM, math.sqrt(lo * hi))) if initial else math.sqrt(lo * hi)
        entries.append(ParamBound(COOLING_PARAM, lo, hi, guess))
    return ParamSpec(tuple(entries))


def network_from_params(
    template: ZonePreset,
    params: Mapping[str, float],
    ac_fractions: Mapping[str, float] | None = None,
) -> RCNetwork:
    """Named parameter dict -> validated preset network.

    AC fractions are structural, not fitted; defaults come from the preset.
    """
    caps = {}
    res = {}
    for name, v in params.items():
        if name == COOLING_PARAM:
            continue
        parts = name.split("_")
        if parts[0] == "c" and len(parts) == 2:
            caps[parts[1]] = v
        elif parts[0] == "r" and len(parts) == 3:
            res[(parts[1], parts[2])] = v
        else:
            raise InvalidParameter(f"unrecognized parameter name {name!r}")
    return build_room_model(
        template, caps, res, ac_fractions or template.default_ac_fractions
    )


@dataclass(frozen=True)
class FitResult:
    """Published outcome of a parameter fit."""

    preset_id: str
    params: dict[str, float]
    cooling_power: float
    rmse: float
    window: tuple[float, float]
    iterations: int
    converged: bool
    created_at: float
    objective_value: float = field(default=0.0, compare=False)

    def network(self, ac_fractions: Mapping[str, float] | None = None) -> RCNetwork:
        return network_from_params(ZonePreset(self.preset_id), self.params, ac_fractions)

    @property
    def preset(self) -> ZonePreset:
        return ZonePreset(self.preset_id)


def emulated_flags(
    grid: GriddedObservations,
    sensing_zone: str,
    cfg: HysteresisConfig | None = None,
    ac: ACUnit | None = None,
) -> np.ndarray:
    """Per-step compressor flags over the observed sensed-zone temperature.

    Observed flags win; gaps are filled by running the hysteresis rule on the
    recorded temperatures, which keeps the result independent of any model
    parameters.
    """
    cfg = cfg or HysteresisConfig()
    lock_on = ac.min_on_s if ac else 180.0
    lock_off = ac.min_off_s if ac else 180.0
    try:
        col = grid.zone_ids.index(sensing_zone)
    except ValueError:
        col = 0
    temps = grid.temps[:, col]
    n = grid.steps
    flags = np.zeros(n, dtype=np.int8)
    on = False
    since = grid.times[0] - max(lock_on, lock_off)
    for s in range(n):
        t = grid.times[s]
        obs = grid.compressor[s]
        if obs >= 0:
            want = obs == 1
            if want != on:
                on = want
                since = t
        else:
            sp = grid.set_temps[s]
            if np.isnan(sp):
                if on:
                    on = False
                    since = t
            elif on:
                if temps[s] <= sp - cfg.delta_low and t - since >= lock_on:
                    on = False
                    since = t
            else:
                if temps[s] >= sp + cfg.delta_high and t - since >= lock_off:
                    on = True
                    since = t
        flags[s] = 1 if on else 0
    return flags


def _initial_temps(network: RCNetwork, grid: GriddedObservations) -> np.ndarray:
    first = grid.temps[0]
    fallback = float(np.mean(first))
    temps0 = np.full(len(network.zones), fallback)
    for j, z in enumerate(grid.zone_ids):
        if z in network.zone_index:
            temps0[network.zone_index[z]] = first[j]
    return temps0


def _grid_for_objective(
    template: ZonePreset, observations: ObservationSeries, dt: float
) -> tuple[GriddedObservations, np.ndarray, np.ndarray]:
    grid = observations.to_grid(dt)
    known = [z for z in grid.zone_ids if z in set(template.zone_ids)]
    if not known:
        raise CoverageError(
            f"no observed zone matches the {template.value} preset"
        )
    forced = emulated_flags(grid, template.default_sensing_zone)
    mask = (~grid.door_open).astype(np.uint8)
    if mask.sum() == 0:
        raise CoverageError("no scoreable samples (door open throughout)")
    return grid, forced, mask


def _objective_on_grid(
    params: Mapping[str, float],
    template: ZonePreset,
    grid: GriddedObservations,
    forced: np.ndarray,
    mask: np.ndarray,
) -> float:
    network = network_from_params(template, params)
    q = float(params.get(COOLING_PARAM, 0.0))
    if q <= 0:
        raise InvalidParameter("objective needs a positive cooling power (q_ac)")
    cool = np.zeros(len(network.zones))
    for z, f in network.ac_coupling.items():
        cool[network.zone_index[z]] = q * f
    bound = stable_dt(network)
    if grid.dt > bound:
        return _UNSTABLE_PENALTY * (grid.dt / bound)
    cols = np.array(
        [network.zone_index[z] for z in grid.zone_ids if z in network.zone_index],
        dtype=np.int64,
    )
    obs = grid.temps[:, [j for j, z in enumerate(grid.zone_ids) if z in network.zone_index]]
    sse, count = _kernel.sse_vs_observed(
        network.conductances,
        1.0 / network.capacitances,
        cool,
        _initial_temps(network, grid),
        grid.outdoor[:-1],
        grid.set_temps[:-1],
        forced,
        0, 0.5, 0.5, 0.0, 0.0,
        False, grid.times[0], grid.times[0], grid.dt,
        np.ascontiguousarray(obs),
        cols,
        np.ascontiguousarray(mask),
    )
    if count == 0:
        # simulation left the sanity envelope under these parameters
        return _UNSTABLE_PENALTY
    return float(sse / count)


def objective(
    params: Mapping[str, float],
    template: ZonePreset,
    observations: ObservationSeries,
    dt: float = DEFAULT_DT_S,
) -> float:
    """Mean squared simulation error (degC^2) over all sensed zones."""
    grid, forced, mask = _grid_for_objective(template, observations, dt)
    return _objective_on_grid(params, template, grid, forced, mask)


def check_excitation(grid: GriddedObservations, forced: np.ndarray) -> None:
    span = grid.times[-1] - grid.times[0]
    if span < MIN_WINDOW_S:
        raise IllConditioned(
            f"window of {span / 3600:.1f} h is shorter than {MIN_WINDOW_S / 3600:.0f} h"
        )
    cycles = int(np.sum((forced[1:] == 1) & (forced[:-1] == 0)))
    if forced[0] == 1:
        cycles += 1
    drift = float(grid.temps.max(axis=0).max() - grid.temps.min(axis=0).min())
    if cycles < 1 and drift < MIN_DRIFT_C:
        raise IllConditioned(
            f"no compressor cycle and only {drift:.2f} degC of drift; "
            "nothing to identify"
        )


def _lhs_pool(spec: ParamSpec, seed: int, size: int = 64) -> np.ndarray:
    """Fixed pool of Latin-hypercube starts in internal coordinates.

    Taking the first k rows for k starts keeps best-of-(k+1) at least as
    good as best-of-k under a shared seed.
    """
    rng = np.random.default_rng(seed)
    d = len(spec.entries)
    u = np.empty((size, d))
    for j in range(d):
        perm = rng.permutation(size)
        u[:, j] = (perm + rng.random(size)) / size
    lo = np.array([b[0] for b in spec.internal_bounds()])
    hi = np.array([b[1] for b in spec.internal_bounds()])
    return lo + u * (hi - lo)


@dataclass(frozen=True)
class FitOptions:
    multi_start: int = 8
    max_iter: int = 200
    tol: float = 1e-9
    seed: int = 0
    dt: float = DEFAULT_DT_S


def fit_params(
    template: ZonePreset,
    observations: ObservationSeries,
    spec: ParamSpec | None = None,
    opts: FitOptions | None = None,
    *,
    rated_cooling_power: float | None = None,
    extra_starts: Sequence[Mapping[str, float]] = (),
    now: float | None = None,
) -> FitResult:
    """Best-of-multi-start minimization of the simulation MSE.

    When rated_cooling_power is given, cooling power is pinned to the rating
    and only R/C are fitted; otherwise q_ac joins the parameter vector.
    """
    opts = opts or FitOptions()
    fit_cooling = rated_cooling_power is None
    spec = spec or default_param_spec(template, fit_cooling=fit_cooling)
    grid, forced, mask = _grid_for_objective(template, observations, opts.dt)
    check_excitation(grid, forced)

    fixed_q = {} if fit_cooling else {COOLING_PARAM: float(rated_cooling_power)}

    def f(x: np.ndarray) -> float:
        params = spec.from_internal(x)
        params.update(fixed_q)
        return _objective_on_grid(params, template, grid, forced, mask)

    starts = [spec.to_internal({e.name: e.initial for e in spec.entries})]
    for extra in extra_starts:
        merged = {e.name: extra.get(e.name, e.initial) for e in spec.entries}
        starts.append(spec.to_internal(spec.clip_interior(merged)))
    pool = _lhs_pool(spec, opts.seed)
    need = max(0, opts.multi_start - len(starts))
    starts.extend(pool[:need])

    bounds = spec.internal_bounds()
    best = None
    iterations = 0
    for x0 in starts:
        res = minimize(
            f,
            np.asarray(x0),
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": opts.max_iter, "ftol": opts.tol, "gtol": 1e-12},
        )
        iterations += int(res.nit)
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None

    params = spec.clip_interior(spec.from_internal(best.x))
    params.update(fixed_q)
    mse = _objective_on_grid(params, template, grid, forced, mask)
    return FitResult(
        preset_id=template.value,
        params={k: v for k, v in params.items() if k != COOLING_PARAM},
        cooling_power=params[COOLING_PARAM],
        rmse=math.sqrt(mse),
        window=(float(grid.times[0]), float(grid.times[-1])),
        iterations=iterations,
        converged=bool(best.success),
        created_at=float(now if now is not None else _time.time()),
        objective_value=mse,
    )


@dataclass(frozen=True)
class RefitOutcome:
    result: FitResult
    accepted: bool
    reason: str


def refit(
    previous: FitResult,
    template: ZonePreset,
    window: ObservationSeries,
    spec: ParamSpec | None = None,
    opts: FitOptions | None = None,
    *,
    rated_cooling_power: float | None = None,
    now: float | None = None,
) -> RefitOutcome:
    """Warm-started re-fit; keeps the incumbent unless the window rmse improves.

    The incumbent is rescored on the new window so the comparison is
    apples-to-apples.
    """
    opts = opts or FitOptions()
    warm = dict(previous.params)
    warm[COOLING_PARAM] = previous.cooling_power
    try:
        candidate = fit_params(
            template,
            window,
            spec,
            opts,
            rated_cooling_power=rated_cooling_power,
            extra_starts=[warm],
            now=now,
        )
    except (IllConditioned, CoverageError, MissingDrive) as e:
        return RefitOutcome(previous, False, f"window rejected: {e}")

    prev_all = dict(previous.params)
    prev_all[COOLING_PARAM] = previous.cooling_power
    prev_mse = objective(prev_all, template, window, dt=opts.dt)
    if candidate.objective_value <= prev_mse:
        return RefitOutcome(candidate, True, "window rmse improved or held")
    return RefitOutcome(previous, False, "incumbent scored better on window")


def residual_series(
    params: Mapping[str, float],
    template: ZonePreset,
    observations: ObservationSeries,
    dt: float = DEFAULT_DT_S,
) -> list[tuple[float, str, float]]:
    """(timestamp, zone_id, observed - simulated) for every scoreable sample."""
    from .thermal import ThermalState, simulate

    grid, forced, mask = _grid_for_objective(template, observations, dt)
    network = network_from_params(template, params)
    q = float(params.get(COOLING_PARAM, 0.0))
    if q <= 0:
        raise InvalidParameter("residuals need a positive cooling power (q_ac)")
    ac = ACUnit(rated_cooling_power=q, rated_electrical_power=0.0)
    temps0 = _initial_temps(network, grid)
    init = ThermalState(
        time=float(grid.times[0]),
        temperatures=dict(zip(network.zone_ids, temps0)),
    )
    from .series import TimeSeries

    outdoor = TimeSeries(grid.times, grid.outdoor)
    trace = simulate(
        network,
        init,
        outdoor,
        grid.set_temps[:-1],
        ac,
        HysteresisConfig(sensing_zone=network.zone_ids[0]),
        None,
        horizon_s=grid.steps * grid.dt,
        dt=grid.dt,
        forced_compressor=forced,
    )
    out: list[tuple[float, str, float]] = []
    for j, z in enumerate(grid.zone_ids):
        if z not in network.zone_index:
            continue
        sim = trace.temps[:, network.zone_index[z]]
        for i in range(len(grid.times)):
            if mask[i]:
                out.append((float(grid.times[i]), z, float(grid.temps[i, j] - sim[i])))
    out.sort(key=lambda r: (r[0], r[1]))
    return out


def refit_cooling_power(
    params: Mapping[str, float],
    template: ZonePreset,
    observations: ObservationSeries,
    dt: float = DEFAULT_DT_S,
    forced: np.ndarray | None = None,
) -> float:
    """One-dimensional re-estimate of cooling power with R/C frozen.

    Used as a daily health feature: a shrinking value with stable R/C is the
    capacity-loss signature. Callers with better per-step compressor flags
    than the hysteresis emulation (a decode, say) can pass them as forced.
    """
    grid, emulated, mask = _grid_for_objective(template, observations, dt)
    forced = emulated if forced is None else np.asarray(forced, dtype=np.int8)
    if len(forced) != grid.steps:
        raise InvalidParameter(
            f"forced flags length {len(forced)} != grid steps {grid.steps}"
        )
    if not (forced == 1).any():
        raise IllConditioned("no compressor-on samples; cooling power unobservable")
    base = {k: v for k, v in params.items() if k != COOLING_PARAM}

    def f(q: float) -> float:
        return _objective_on_grid(
            {**base, COOLING_PARAM: q}, template, grid, forced, mask
        )

    res = minimize_scalar(f, bounds=Q_BOUNDS, method="bounded", options={"xatol": 1.0})
    return float(res.x)


def is_expired(fit: FitResult, now: float, max_age_days: float = STALE_AFTER_DAYS) -> bool:
    return (now - fit.created_at) > max_age_days * 86400.0


def sliding_window(observations: ObservationSeries, now: float, days: float = DEFAULT_WINDOW_DAYS) -> ObservationSeries:
    return observations.window(now - days * 86400.0, now)
