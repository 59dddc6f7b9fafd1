"""Ingestion, weather clients and flat-file persistence.

Everything here is deliberately boring: CSV in, line-delimited JSON records
out, snapshots as whole files swapped atomically. A unit's state must be
reconstructable with a text editor.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .control import SetpointSchedule
from .energy import EnergyReport
from .errors import (
    CoverageError,
    EmptyInput,
    FormatError,
    InvalidParameter,
    ProviderUnavailable,
    SchemaError,
)
from .fitting import FitResult, ObservationRecord, ObservationSeries
from .health import Alert
from .series import TimeSeries

REQUIRED_COLUMNS = ("timestamp", "room_temp_c", "outdoor_temp_c")
OPTIONAL_COLUMNS = ("set_temp_c", "door_open", "compressor_on", "power_w")
TEMP_SANITY_C = (-40.0, 60.0)
DEFAULT_MAX_GAP_S = 3 * 3600.0

_TRUES = {"1", "true", "yes"}
_FALSES = {"0", "false", "no", ""}


def parse_timestamp(text: str) -> float:
    """RFC 3339 to epoch seconds; naive stamps are taken as UTC."""
    t = text.strip()
    if t.endswith(("Z", "z")):
        t = t[:-1] + "+00:00"
    dt = datetime.fromisoformat(t)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def format_timestamp(epoch_s: float) -> str:
    return (
        datetime.fromtimestamp(epoch_s, tz=timezone.utc)
        .isoformat()
        .replace("+00:00", "Z")
    )


def _parse_bool(text: str, column: str) -> bool:
    v = text.strip().lower()
    if v in _TRUES:
        return True
    if v in _FALSES:
        return False
    raise ValueError(f"{column} must be 0/1, got {text!r}")


def _parse_temp(text: str, column: str) -> float:
    v = float(text)
    lo, hi = TEMP_SANITY_C
    if not lo < v < hi:
        raise ValueError(f"{column}={v} outside sanity range ({lo}, {hi})")
    return v


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


@dataclass(frozen=True)
class ParseResult:
    series: ObservationSeries
    rejects: tuple[RejectedRow, ...]


def parse_observations(source, zone: str = "room") -> ParseResult:
    """Read an observation CSV; bad rows are reported, not fatal.

    Columns: timestamp, room_temp_c, outdoor_temp_c required; set_temp_c
    (empty = thermostat idle), door_open, compressor_on, power_w optional.
    room_temp_c lands in sensed_temps under the given zone id.
    """
    if isinstance(source, (str, bytes)):
        source = io.StringIO(source.decode() if isinstance(source, bytes) else source)
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise EmptyInput("no header row")
    header = [h.strip() for h in reader.fieldnames]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise FormatError(f"missing required columns: {', '.join(missing)}")

    records: list[ObservationRecord] = []
    seen: set[float] = set()
    rejects: list[RejectedRow] = []
    for line_no, row in enumerate(reader, start=2):
        try:
            ts = parse_timestamp(row["timestamp"] or "")
            if ts in seen:
                raise ValueError("duplicate timestamp")
            room = _parse_temp(row["room_temp_c"], "room_temp_c")
            outdoor = _parse_temp(row["outdoor_temp_c"], "outdoor_temp_c")
            set_text = (row.get("set_temp_c") or "").strip()
            set_temp = None if not set_text else _parse_temp(set_text, "set_temp_c")
            door = _parse_bool(row.get("door_open") or "", "door_open")
            comp_text = (row.get("compressor_on") or "").strip()
            comp = None if not comp_text else _parse_bool(comp_text, "compressor_on")
            power_text = (row.get("power_w") or "").strip()
            power = None if not power_text else float(power_text)
            if power is not None and power < 0:
                raise ValueError(f"power_w={power} is negative")
        except (ValueError, KeyError) as exc:
            rejects.append(RejectedRow(line=line_no, reason=str(exc)))
            continue
        seen.add(ts)
        records.append(
            ObservationRecord(
                timestamp=ts,
                sensed_temps={zone: room},
                outdoor_temp=outdoor,
                set_temp=set_temp,
                door_open=door,
                compressor_on=comp,
                electrical_power=power,
            )
        )
    return ParseResult(series=ObservationSeries(records), rejects=tuple(rejects))


def resample(series: TimeSeries, grid_dt: float, max_gap_s: float = DEFAULT_MAX_GAP_S) -> TimeSeries:
    """Linear interpolation onto the uniform grid spanning the input."""
    return series.resample(grid_dt, max_gap_s)


# --- weather ---------------------------------------------------------------


@dataclass(frozen=True)
class WeatherProvider:
    """File- or HTTP-backed hourly forecast source.

    The field mapping names the arrays/columns holding timestamps and
    temperatures, so any provider with a flat JSON or CSV shape works.
    """

    kind: str
    path: str | None = None
    url_template: str | None = None
    timestamp_field: str = "timestamp"
    temperature_field: str = "temp_c"
    timeout_s: float = 10.0
    cache_ttl_s: float = 1800.0

    def __post_init__(self):
        if self.kind not in ("file", "http"):
            raise InvalidParameter(f"unknown provider kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise InvalidParameter("file provider needs a path")
        if self.kind == "http" and not self.url_template:
            raise InvalidParameter("http provider needs a url_template")
        if self.cache_ttl_s < 0:
            raise InvalidParameter("cache_ttl_s must be >= 0")


def _http_get_json(url: str, timeout_s: float) -> dict:
    import requests

    resp = requests.get(url, timeout=timeout_s)
    resp.raise_for_status()
    return resp.json()


def _payload_from_file(path: str, provider: WeatherProvider) -> dict:
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(text)
    rows = list(csv.DictReader(io.StringIO(text)))
    return {
        provider.timestamp_field: [r.get(provider.timestamp_field) for r in rows],
        provider.temperature_field: [r.get(provider.temperature_field) for r in rows],
    }


class ForecastClient:
    """Caching forecast fetcher; inject fetch_fn and clock to test."""

    def __init__(
        self,
        provider: WeatherProvider,
        fetch_fn: Callable[[str, float], dict] | None = None,
        clock: Callable[[], float] = time.time,
    ):
        self.provider = provider
        self._fetch_fn = fetch_fn or _http_get_json
        self._clock = clock
        self.provider_hits = 0
        self._cache: tuple[float, str, TimeSeries] | None = None

    def _extract(self, payload: Mapping) -> TimeSeries:
        p = self.provider
        for name in (p.timestamp_field, p.temperature_field):
            if name not in payload or payload[name] is None:
                raise SchemaError(f"provider payload missing field {name!r}")
        raw_ts = payload[p.timestamp_field]
        raw_temp = payload[p.temperature_field]
        if any(v is None for v in raw_ts) or any(v is None for v in raw_temp):
            raise SchemaError("provider payload has empty mapped values")
        times = np.array(
            [parse_timestamp(v) if isinstance(v, str) else float(v) for v in raw_ts]
        )
        temps = np.array([float(v) for v in raw_temp])
        return TimeSeries(times, temps)

    def fetch(self, lat: float, lon: float, horizon_h: int) -> TimeSeries:
        """Hourly boundary series covering horizon_h from its first point."""
        key = f"{lat:.4f},{lon:.4f},{horizon_h}"
        now = self._clock()
        if self._cache is not None:
            at, cached_key, series = self._cache
            if cached_key == key and now - at <= self.provider.cache_ttl_s:
                return series
        p = self.provider
        try:
            if p.kind == "file":
                payload = _payload_from_file(p.path, p)
            else:
                url = p.url_template.format(lat=lat, lon=lon, hours=horizon_h)
                payload = self._fetch_fn(url, p.timeout_s)
        except SchemaError:
            raise
        except Exception as exc:
            raise ProviderUnavailable(f"forecast fetch failed: {exc}") from exc
        finally:
            self.provider_hits += 1
        series = self._extract(payload)
        span_h = (series.times[-1] - series.times[0]) / 3600.0
        if span_h + 1 < horizon_h:
            raise CoverageError(
                f"provider returned {span_h + 1:.0f} h, horizon needs {horizon_h} h"
            )
        keep = series.times < series.times[0] + horizon_h * 3600.0
        out = TimeSeries(series.times[keep], series.values[keep])
        self._cache = (now, key, out)
        return out


def fetch_forecast(
    provider: WeatherProvider,
    lat: float,
    lon: float,
    horizon_h: int,
    client: ForecastClient | None = None,
) -> TimeSeries:
    client = client or ForecastClient(provider)
    return client.fetch(lat, lon, horizon_h)


# --- documents -------------------------------------------------------------


def to_doc(obj) -> dict:
    """Primitive-field document for any persistable kind."""
    if isinstance(obj, FitResult):
        return {
            "kind": "fit_result",
            "preset_id": obj.preset_id,
            "params": dict(obj.params),
            "cooling_power": obj.cooling_power,
            "rmse": obj.rmse,
            "window": list(obj.window),
            "iterations": obj.iterations,
            "converged": obj.converged,
            "created_at": obj.created_at,
            "objective_value": obj.objective_value,
        }
    if isinstance(obj, SetpointSchedule):
        return {
            "kind": "setpoint_schedule",
            "entries": [[t, v] for t, v in obj.entries],
            "slot_s": obj.slot_s,
        }
    if isinstance(obj, Alert):
        return {
            "kind": "alert",
            "date": obj.date,
            "z": obj.z,
            "cusum": obj.cusum,
            "message": obj.message,
        }
    if isinstance(obj, EnergyReport):
        return {
            "kind": "energy_report",
            "energy_kwh": obj.energy_kwh,
            "cycles": obj.cycles,
            "on_hours": obj.on_hours,
            "method": obj.method,
            "accuracy_pct": obj.accuracy_pct,
        }
    raise InvalidParameter(f"no document form for {type(obj).__name__}")


def from_doc(doc: Mapping):
    kind = doc.get("kind")
    if kind == "fit_result":
        return FitResult(
            preset_id=doc["preset_id"],
            params={k: float(v) for k, v in doc["params"].items()},
            cooling_power=float(doc["cooling_power"]),
            rmse=float(doc["rmse"]),
            window=(float(doc["window"][0]), float(doc["window"][1])),
            iterations=int(doc["iterations"]),
            converged=bool(doc["converged"]),
            created_at=float(doc["created_at"]),
            objective_value=float(doc.get("objective_value", 0.0)),
        )
    if kind == "setpoint_schedule":
        return SetpointSchedule(
            entries=tuple((float(t), float(v)) for t, v in doc["entries"]),
            slot_s=float(doc["slot_s"]),
        )
    if kind == "alert":
        return Alert(
            date=float(doc["date"]), z=float(doc["z"]),
            cusum=float(doc["cusum"]), message=str(doc["message"]),
        )
    if kind == "energy_report":
        pct = doc.get("accuracy_pct")
        return EnergyReport(
            energy_kwh=float(doc["energy_kwh"]),
            cycles=int(doc["cycles"]),
            on_hours=float(doc["on_hours"]),
            method=str(doc["method"]),
            accuracy_pct=None if pct is None else float(pct),
        )
    raise InvalidParameter(f"unknown document kind {kind!r}")


# --- persistence -----------------------------------------------------------


class RecordLog:
    """Append-only line-JSON event log; one envelope per line."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)

    def append(self, kind: str, payload: Mapping, written_at: float | None = None) -> None:
        envelope = {
            "kind": kind,
            "written_at": time.time() if written_at is None else written_at,
            "payload": dict(payload),
        }
        line = json.dumps(envelope, separators=(",", ":"))
        if "\n" in line:
            raise InvalidParameter("payload serializes across lines")
        with open(self.path, "a") as f:
            f.write(line + "\n")
            f.flush()
            os.fsync(f.fileno())

    def read_all(self) -> tuple[list[dict], int]:
        """All intact envelopes in append order, plus the corrupt-line count."""
        if not self.path.exists():
            return [], 0
        envelopes, corrupt = [], 0
        with open(self.path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                    if not isinstance(doc, dict) or "kind" not in doc:
                        raise ValueError("not an envelope")
                except ValueError:
                    corrupt += 1
                    continue
                envelopes.append(doc)
        return envelopes, corrupt


class SnapshotStore:
    """Latest-wins snapshot files, one JSON document per write.

    Writes go to a temp file then rename into place, so readers only ever
    see whole documents; load picks the newest by the payload's created_at
    (write order breaks ties).
    """

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def save(self, name: str, doc: Mapping) -> Path:
        final = self.root / f"{name}-{uuid.uuid4().hex}.json"
        tmp = final.with_suffix(".tmp")
        tmp.write_text(json.dumps(dict(doc), indent=2, sort_keys=True))
        os.replace(tmp, final)
        return final

    def load_latest(self, name: str) -> dict | None:
        best, best_key = None, None
        for p in sorted(self.root.glob(f"{name}-*.json")):
            try:
                doc = json.loads(p.read_text())
            except ValueError:
                continue
            key = (doc.get("created_at", doc.get("date", 0.0)), p.stat().st_mtime)
            if best_key is None or key > best_key:
                best, best_key = doc, key
        return best


class ObservationStore:
    """Per-unit in-memory record set with timestamp-keyed deduplication."""

    def __init__(self, records: Iterable[ObservationRecord] = ()):
        self._by_time: dict[float, ObservationRecord] = {}
        self.add_batch(records)

    def __len__(self) -> int:
        return len(self._by_time)

    def __contains__(self, timestamp: float) -> bool:
        return timestamp in self._by_time

    def add_batch(self, records: Iterable[ObservationRecord]) -> tuple[int, int]:
        """(accepted, duplicates); re-submitting a batch accepts nothing."""
        accepted = duplicates = 0
        for r in records:
            if r.timestamp in self._by_time:
                duplicates += 1
            else:
                self._by_time[r.timestamp] = r
                accepted += 1
        return accepted, duplicates

    def series(self) -> ObservationSeries:
        return ObservationSeries(
            [self._by_time[t] for t in sorted(self._by_time)]
        )

    def window(self, t0: float, t1: float) -> ObservationSeries:
        return self.series().window(t0, t1)

    @property
    def latest_timestamp(self) -> float | None:
        return max(self._by_time) if self._by_time else None
