"""Deployment config and per-unit runtime state.

One process serves every configured unit. Each unit serializes its mutations
behind a lock, actor style; reads come from whatever the unit last published.
Every mutation lands in the unit's event log or snapshot store before the
caller sees a response, so a restarted service resumes where it stopped.

The unit's clock is data-driven: "now" is the newest observation timestamp,
or the model's creation time before any data arrives. Wall time never enters
planning, which keeps replays and fixture-backed deployments deterministic.
"""

import json
import math
import os
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

import yaml

from ..benchmarks import default_ac
from ..control import CETConfig, PlanDiagnostics, PlantModel, SetpointSchedule, plan
from ..dataio import (
    ForecastClient,
    ObservationStore,
    RecordLog,
    SnapshotStore,
    WeatherProvider,
    from_doc,
    parse_observations,
    to_doc,
)
from ..energy import CycleSegmentation, decode_cycles, estimate_energy, predict_energy
from ..errors import CoverageError, InvalidParameter, SmartstatError, StaleModel
from ..fitting import FitResult, ObservationRecord, ObservationSeries, is_expired
from ..health import (
    Alert,
    Baseline,
    DriftDetector,
    HealthFeatures,
    MonitorState,
    daily_features,
    monitor_day,
)
from ..thermal import ACUnit, HysteresisConfig, ThermalState, ZonePreset

DEFAULT_LISTEN = "127.0.0.1:8032"
DEFAULT_REPLAN_EVERY_S = 3600.0
DEFAULT_FORECAST_HORIZON_H = 48
FEATURE_KEYS = ("duty_cycle", "cooling_rate", "attainment_gap", "pulldown_minutes", "qhat")


@dataclass(frozen=True)
class UnitConfig:
    """Static description of one conditioned unit."""

    unit_id: str
    preset: ZonePreset = ZonePreset.SINGLE_ZONE
    lat: float = 0.0
    lon: float = 0.0
    ac: ACUnit = field(default_factory=default_ac)
    hysteresis: HysteresisConfig = field(default_factory=HysteresisConfig)
    control: CETConfig = field(
        default_factory=lambda: CETConfig(alpha=0.5, preferred_temp=24.0)
    )
    fit_snapshot: str | None = None
    forecast_horizon_h: int = DEFAULT_FORECAST_HORIZON_H

    def __post_init__(self):
        if not self.unit_id or "/" in self.unit_id:
            raise InvalidParameter(f"bad unit_id {self.unit_id!r}")
        if self.forecast_horizon_h < 1:
            raise InvalidParameter("forecast_horizon_h must be >= 1")


@dataclass(frozen=True)
class ServiceConfig:
    units: tuple[UnitConfig, ...]
    provider: WeatherProvider
    data_dir: Path
    host: str = "127.0.0.1"
    port: int = 8032
    replan_every_s: float = DEFAULT_REPLAN_EVERY_S

    def __post_init__(self):
        if not self.units:
            raise InvalidParameter("config lists no units")
        ids = [u.unit_id for u in self.units]
        if len(set(ids)) != len(ids):
            raise InvalidParameter("unit_ids must be unique")
        if not 0 < self.port < 65536:
            raise InvalidParameter(f"port out of range: {self.port}")
        if self.replan_every_s <= 0:
            raise InvalidParameter("replan_every_s must be positive")


def _parse_listen(listen: str) -> tuple[str, int]:
    host, sep, port_s = listen.rpartition(":")
    if not sep or not host:
        raise InvalidParameter(f"listen must look like host:port, got {listen!r}")
    try:
        port = int(port_s)
    except ValueError:
        raise InvalidParameter(f"listen port is not an integer: {port_s!r}") from None
    return host, port


def _provider_from_doc(doc: Mapping, base: Path, url_override: str | None) -> WeatherProvider:
    common = {
        k: doc[k]
        for k in ("timestamp_field", "temperature_field", "timeout_s", "cache_ttl_s")
        if k in doc
    }
    if url_override:
        return WeatherProvider(kind="http", url_template=url_override, **common)
    kind = doc.get("kind", "file")
    if kind == "file":
        if "path" not in doc:
            raise InvalidParameter("file provider needs a path")
        return WeatherProvider(kind="file", path=str(base / doc["path"]), **common)
    return WeatherProvider(kind="http", url_template=doc.get("url_template"), **common)


def _unit_from_doc(doc: Mapping, base: Path) -> UnitConfig:
    if "unit_id" not in doc:
        raise InvalidParameter("every unit needs a unit_id")
    control_doc = doc.get("control", {})
    control = CETConfig(
        alpha=float(control_doc.get("alpha", 0.5)),
        preferred_temp=float(control_doc.get("preferred_temp", 24.0)),
        band=float(control_doc.get("band", 0.5)),
        **{
            k: (tuple(control_doc[k]) if k == "candidates" else float(control_doc[k]))
            for k in ("candidates", "slot_s", "horizon_s")
            if k in control_doc
        },
    )
    snapshot = doc.get("fit_snapshot")
    return UnitConfig(
        unit_id=str(doc["unit_id"]),
        preset=ZonePreset(doc.get("preset", "single_zone")),
        lat=float(doc.get("lat", 0.0)),
        lon=float(doc.get("lon", 0.0)),
        ac=ACUnit(**doc["ac"]) if "ac" in doc else default_ac(),
        hysteresis=HysteresisConfig(**doc["hysteresis"]) if "hysteresis" in doc else HysteresisConfig(),
        control=control,
        fit_snapshot=None if snapshot is None else str(base / snapshot),
        forecast_horizon_h=int(doc.get("forecast_horizon_h", DEFAULT_FORECAST_HORIZON_H)),
    )


def load_config(path: str | Path, env: Mapping[str, str] | None = None) -> ServiceConfig:
    """One YAML file describes the deployment; two env vars override it.

    SMARTSTAT_PROVIDER_URL swaps the weather provider for an HTTP one and
    SMARTSTAT_LISTEN moves the bind address, so a packaged config runs
    unedited in environments that differ only in those two ways. Relative
    paths resolve against the config file's own directory.
    """
    env = os.environ if env is None else env
    path = Path(path)
    if not path.exists():
        raise InvalidParameter(f"config file not found: {path}")
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise InvalidParameter("config root must be a mapping")
    base = path.resolve().parent
    host, port = _parse_listen(env.get("SMARTSTAT_LISTEN") or doc.get("listen", DEFAULT_LISTEN))
    provider = _provider_from_doc(
        doc.get("provider", {}), base, env.get("SMARTSTAT_PROVIDER_URL")
    )
    units = tuple(_unit_from_doc(u, base) for u in doc.get("units", []))
    return ServiceConfig(
        units=units,
        provider=provider,
        data_dir=base / doc.get("data_dir", "data"),
        host=host,
        port=port,
        replan_every_s=float(doc.get("replan_every_s", DEFAULT_REPLAN_EVERY_S)),
    )


def _features_doc(f: HealthFeatures, z: float | None, cusum: float) -> dict:
    doc = {"date": f.date, "valid": f.valid, "z": z, "cusum": cusum}
    for k in FEATURE_KEYS:
        v = getattr(f, k)
        doc[k] = None if v is None else float(v)
    return doc


def _monitor_doc(state: MonitorState, through_day: int | None) -> dict:
    d = state.detector
    return {
        "created_at": time.time(),
        "baseline": {
            "means": dict(state.baseline.means),
            "variances": dict(state.baseline.variances),
            "n_days": state.baseline.n_days,
            "from_prior": state.baseline.from_prior,
        },
        "detector": {
            "cusum": d.cusum, "k": d.k, "h": d.h, "state": d.state,
            "alarm_date": d.alarm_date, "last_date": d.last_date,
        },
        "days_seen": state.days_seen,
        "warmup_days": state.warmup_days,
        "through_day": through_day,
    }


def _monitor_from_doc(doc: Mapping) -> tuple[MonitorState, int | None]:
    b = doc["baseline"]
    d = doc["detector"]
    state = MonitorState(
        baseline=Baseline(
            means=dict(b["means"]), variances=dict(b["variances"]),
            n_days=float(b["n_days"]), from_prior=bool(b["from_prior"]),
        ),
        detector=DriftDetector(
            cusum=float(d["cusum"]), k=float(d["k"]), h=float(d["h"]),
            state=str(d["state"]),
            alarm_date=None if d["alarm_date"] is None else float(d["alarm_date"]),
            last_date=None if d["last_date"] is None else float(d["last_date"]),
        ),
        days_seen=int(doc["days_seen"]),
        warmup_days=int(doc["warmup_days"]),
    )
    through = doc.get("through_day")
    return state, None if through is None else int(through)


def _cet_doc(cet: CETConfig) -> dict:
    return {
        "created_at": time.time(),
        "alpha": cet.alpha,
        "preferred_temp": cet.preferred_temp,
        "band": cet.band,
        "candidates": list(cet.candidates),
        "slot_s": cet.slot_s,
        "horizon_s": cet.horizon_s,
    }


def _cet_from_doc(doc: Mapping) -> CETConfig:
    return CETConfig(
        alpha=float(doc["alpha"]),
        preferred_temp=float(doc["preferred_temp"]),
        band=float(doc["band"]),
        candidates=tuple(float(c) for c in doc["candidates"]),
        slot_s=float(doc["slot_s"]),
        horizon_s=float(doc["horizon_s"]),
    )


class Unit:
    """Runtime state of one unit: model, knob, records, plan, monitor."""

    def __init__(self, cfg: UnitConfig, data_dir: Path, forecast: ForecastClient):
        self.cfg = cfg
        self.forecast = forecast
        self.lock = threading.Lock()
        root = Path(data_dir) / cfg.unit_id
        root.mkdir(parents=True, exist_ok=True)
        self.log = RecordLog(root / "events.log")
        self.snapshots = SnapshotStore(root / "snapshots")

        self.store = ObservationStore()
        self.fit: FitResult | None = None
        self.cet: CETConfig = cfg.control
        self.schedule: SetpointSchedule | None = None
        self.diagnostics: PlanDiagnostics | None = None
        self.planned_at: float | None = None
        self._normalizers: tuple[float, float] | None = None
        self.monitor = MonitorState()
        self.health_rows: list[dict] = []
        self.alerts: list[Alert] = []
        self._monitored_through: int | None = None
        self._restore()

    # --- persistence ------------------------------------------------------

    def _restore(self) -> None:
        fit_doc = self.snapshots.load_latest("fit")
        if fit_doc is not None:
            self.fit = from_doc(fit_doc)
        elif self.cfg.fit_snapshot is not None:
            self.fit = from_doc(json.loads(Path(self.cfg.fit_snapshot).read_text()))

        cet_doc = self.snapshots.load_latest("cet")
        if cet_doc is not None:
            self.cet = _cet_from_doc(cet_doc)

        envelopes, _ = self.log.read_all()
        records = []
        for env in envelopes:
            kind, payload = env["kind"], env["payload"]
            if kind == "observation":
                payload = dict(payload)
                payload["sensed_temps"] = {
                    z: float(v) for z, v in payload["sensed_temps"].items()
                }
                records.append(ObservationRecord(**payload))
            elif kind == "health_row":
                self.health_rows.append(dict(payload))
            elif kind == "alert":
                self.alerts.append(from_doc(payload))
        self.store.add_batch(records)

        mon_doc = self.snapshots.load_latest("monitor")
        if mon_doc is not None:
            self.monitor, self._monitored_through = _monitor_from_doc(mon_doc)

        plan_doc = self.snapshots.load_latest("plan")
        if plan_doc is not None:
            self.schedule = from_doc(plan_doc["schedule"])
            self.planned_at = float(plan_doc["planned_at"])
            norms = plan_doc.get("normalizers")
            if norms is not None:
                self._normalizers = (float(norms[0]), float(norms[1]))

    # --- clock and model --------------------------------------------------

    def now(self) -> float:
        """Data time: newest observation, else the model's birth."""
        candidates = [self.store.latest_timestamp]
        if self.fit is not None:
            candidates.append(self.fit.created_at)
        known = [c for c in candidates if c is not None]
        if not known:
            raise StaleModel(f"unit {self.cfg.unit_id} has no model and no data yet")
        return max(known)

    def require_fit(self) -> FitResult:
        if self.fit is None:
            raise StaleModel(f"no fitted model published for unit {self.cfg.unit_id}")
        return self.fit

    def model_expired(self) -> bool:
        return self.fit is not None and is_expired(self.fit, self.now())

    def latest_record(self) -> ObservationRecord | None:
        if len(self.store) == 0:
            return None
        return self.store.series()[-1]

    # --- planning ---------------------------------------------------------

    def _init_state(self, now: float, network) -> ThermalState:
        rec = self.latest_record()
        zone = self.cfg.preset.primary_zone
        temp = self.cet.preferred_temp
        if rec is not None and zone in rec.sensed_temps:
            temp = rec.sensed_temps[zone]
        return ThermalState(time=now, temperatures={z: temp for z in network.zone_ids})

    def replan(self) -> tuple[SetpointSchedule, PlanDiagnostics]:
        """Re-optimize from the unit's current clock; caller holds the lock."""
        fit = self.require_fit()
        now = self.now()
        plant = PlantModel.from_fit(fit, self.cfg.ac, self.cfg.hysteresis)
        forecast = self.forecast.fetch(
            self.cfg.lat, self.cfg.lon, self.cfg.forecast_horizon_h
        )
        init = self._init_state(now, plant.network)
        schedule, diag = plan(
            plant, forecast, self.cet, init,
            now=now, fixed_normalizers=self._normalizers,
        )
        self._normalizers = (diag.e_max, diag.d_max)
        self.schedule, self.diagnostics, self.planned_at = schedule, diag, now
        self.snapshots.save("plan", {
            "created_at": time.time(),
            "planned_at": now,
            "schedule": to_doc(schedule),
            "normalizers": list(self._normalizers),
            "alpha": self.cet.alpha,
        })
        return schedule, diag

    def ensure_plan(self, replan_every_s: float) -> tuple[SetpointSchedule, PlanDiagnostics]:
        """Serve the active plan, replacing it when aged out or overrun."""
        with self.lock:
            now = self.now()
            stale = (
                self.schedule is None
                or self.diagnostics is None
                or self.planned_at is None
                or now - self.planned_at >= replan_every_s
                or now >= self.schedule.end
            )
            if stale:
                return self.replan()
            return self.schedule, self.diagnostics

    def set_knob(self, alpha: float) -> tuple[SetpointSchedule, PlanDiagnostics]:
        """Persist the new trade-off, then replan under it."""
        with self.lock:
            self.cet = replace(self.cet, alpha=float(alpha))
            self.snapshots.save("cet", _cet_doc(self.cet))
            self.log.append("knob", {"alpha": float(alpha)})
            return self.replan()

    def set_preference(self, preferred_temp: float, band: float) -> tuple[SetpointSchedule, PlanDiagnostics]:
        """New comfort definition; discomfort normalizers start over with it."""
        with self.lock:
            self.cet = replace(
                self.cet, preferred_temp=float(preferred_temp), band=float(band)
            )
            self.snapshots.save("cet", _cet_doc(self.cet))
            self.log.append(
                "preference", {"preferred_temp": float(preferred_temp), "band": float(band)}
            )
            self._normalizers = None
            return self.replan()

    # --- observations and monitoring --------------------------------------

    def ingest(self, body: str) -> tuple[int, int, int]:
        """Parse, deduplicate, persist, then advance the health monitor."""
        parsed = parse_observations(body, zone=self.cfg.preset.primary_zone)
        with self.lock:
            fresh = [r for r in parsed.series if r.timestamp not in self.store]
            accepted, duplicates = self.store.add_batch(parsed.series)
            for rec in fresh:
                self.log.append("observation", asdict(rec))
            self._advance_monitoring()
        return accepted, len(parsed.rejects), duplicates

    def _advance_monitoring(self) -> None:
        """Fold every newly completed day into the baseline and detector."""
        latest = self.store.latest_timestamp
        if self.fit is None or latest is None:
            return
        first = self.store.series().start
        start_day = (
            int(math.floor(first / 86400.0))
            if self._monitored_through is None
            else self._monitored_through + 1
        )
        last_complete = int(math.floor((latest + 60.0) / 86400.0)) - 1
        advanced = False
        for day in range(start_day, last_complete + 1):
            day_series = self.store.window(day * 86400.0, (day + 1) * 86400.0)
            if len(day_series) == 0:
                self._monitored_through = day
                continue
            f = daily_features(day_series, self.fit, self.cfg.ac)
            self.monitor, z, alert = monitor_day(self.monitor, f)
            row = _features_doc(f, z, self.monitor.detector.cusum)
            self.health_rows.append(row)
            self.log.append("health_row", row)
            if alert is not None:
                self.alerts.append(alert)
                self.log.append("alert", to_doc(alert))
            self._monitored_through = day
            advanced = True
        if advanced:
            self.snapshots.save("monitor", _monitor_doc(self.monitor, self._monitored_through))

    # --- reporting --------------------------------------------------------

    def energy_between(self, t0: float, t1: float):
        fit = self.require_fit()
        if t1 <= t0:
            raise InvalidParameter("energy window must end after it starts")
        window = self.store.window(t0, t1)
        if len(window) < 2:
            raise CoverageError("no observations in the requested window")
        seg = decode_cycles(window, fit)
        return estimate_energy(seg, self.cfg.ac)

    def what_if(self, duration_h: float, candidates: tuple[float, ...]):
        fit = self.require_fit()
        now = self.now()
        plant = PlantModel.from_fit(fit, self.cfg.ac, self.cfg.hysteresis)
        forecast = self.forecast.fetch(
            self.cfg.lat, self.cfg.lon, self.cfg.forecast_horizon_h
        )
        init = self._init_state(now, plant.network)
        return predict_energy(
            fit, forecast, candidates, duration_h * 3600.0, init,
            self.cfg.ac, self.cfg.hysteresis, now=now,
        )

    def trace_window(self, hours: float) -> tuple[ObservationSeries, CycleSegmentation | None]:
        """Recent records plus compressor flags, decoded when not recorded."""
        latest = self.store.latest_timestamp
        if latest is None:
            return ObservationSeries([]), None
        window = self.store.window(latest - hours * 3600.0, latest)
        recorded = any(r.compressor_on is not None for r in window)
        if recorded or self.fit is None or len(window) < 2:
            return window, None
        try:
            return window, decode_cycles(window, self.fit)
        except SmartstatError:
            # a gappy or misshapen tail degrades to an unshaded trace
            return window, None


class UnitRegistry:
    """All configured units, sharing one forecast client."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.forecast = ForecastClient(config.provider)
        self.units: dict[str, Unit] = {
            uc.unit_id: Unit(uc, config.data_dir, self.forecast)
            for uc in config.units
        }

    def get(self, unit_id: str) -> Unit:
        unit = self.units.get(unit_id)
        if unit is None:
            raise KeyError(unit_id)
        return unit
