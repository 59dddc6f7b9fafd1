"""HTTP face of the engine.

Eight resource routes per unit, mapped onto the core package: state, knob,
preference, what-if, observations, energy, health, plan. Error contract:
unknown unit ids are 404, planning against a missing or expired model is
409, anything malformed is 422 with a message naming the offending field.
"""

import math

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .. import __version__
from ..control import PlanDiagnostics, SetpointSchedule
from ..dataio import format_timestamp, parse_timestamp
from ..errors import ProviderUnavailable, SmartstatError, StaleModel, ValidationError
from ..fitting import ObservationRecord
from . import schemas
from .registry import FEATURE_KEYS, ServiceConfig, Unit, UnitRegistry, load_config


def _control_out(unit: Unit) -> schemas.ControlOut:
    cet = unit.cet
    return schemas.ControlOut(
        alpha=cet.alpha,
        preferred_temp=cet.preferred_temp,
        band=cet.band,
        candidates=list(cet.candidates),
        slot_min=cet.slot_s / 60.0,
        horizon_h=cet.horizon_s / 3600.0,
    )


def _model_out(unit: Unit) -> schemas.ModelOut:
    fit = unit.fit
    if fit is None:
        return schemas.ModelOut(
            fitted=False, created_at=None, age_days=None, expired=False, rmse=None
        )
    now = unit.now()
    return schemas.ModelOut(
        fitted=True,
        created_at=format_timestamp(fit.created_at),
        age_days=round((now - fit.created_at) / 86400.0, 3),
        expired=unit.model_expired(),
        rmse=round(fit.rmse, 4),
    )


def _schedule_out(schedule: SetpointSchedule) -> schemas.ScheduleOut:
    return schemas.ScheduleOut(
        entries=[
            schemas.ScheduleEntryOut(start=format_timestamp(t), set_temp=v)
            for t, v in schedule.entries
        ],
        slot_min=schedule.slot_s / 60.0,
        start=format_timestamp(schedule.start),
        end=format_timestamp(schedule.end),
    )


def _plan_out(unit: Unit, schedule: SetpointSchedule, diag: PlanDiagnostics) -> schemas.PlanOut:
    return schemas.PlanOut(
        unit_id=unit.cfg.unit_id,
        planned_at=format_timestamp(unit.planned_at),
        control=_control_out(unit),
        schedule=_schedule_out(schedule),
        diagnostics=schemas.DiagnosticsOut(
            predicted_energy_kwh=round(diag.predicted_energy_kwh, 2),
            predicted_discomfort_degh=round(diag.predicted_discomfort_degh, 2),
            method=diag.method,
            nodes_expanded=diag.nodes_expanded,
            j_value=round(diag.j_value, 4),
        ),
    )


_FEATURE_DECIMALS = {
    "duty_cycle": 4,
    "cooling_rate": 4,
    "attainment_gap": 3,
    "pulldown_minutes": 1,
    "qhat": 1,
}


def _rounded(value: float | None, ndigits: int) -> float | None:
    return None if value is None else round(float(value), ndigits)


def _health_row_out(row: dict) -> schemas.HealthRowOut:
    return schemas.HealthRowOut(
        date=format_timestamp(row["date"]),
        valid=bool(row["valid"]),
        z=_rounded(row.get("z"), 3),
        cusum=round(float(row.get("cusum", 0.0)), 3),
        **{k: _rounded(row.get(k), n) for k, n in _FEATURE_DECIMALS.items()},
    )


def _active_set_temp(unit: Unit, now: float | None) -> float | None:
    if unit.schedule is not None and now is not None:
        v = float(unit.schedule.setpoints_at(np.array([now]))[0])
        if not math.isnan(v):
            return v
    rec = unit.latest_record()
    return None if rec is None else rec.set_temp


def create_app(config: ServiceConfig | str) -> FastAPI:
    cfg = config if isinstance(config, ServiceConfig) else load_config(config)
    registry = UnitRegistry(cfg)
    app = FastAPI(title="smartstat", version=__version__)
    app.state.registry = registry
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def unit_or_404(unit_id: str) -> Unit:
        try:
            return registry.get(unit_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown unit {unit_id!r}")

    @app.exception_handler(StaleModel)
    async def stale_model(request: Request, exc: StaleModel):
        return JSONResponse(status_code=409, content={"detail": str(exc), "error": "StaleModel"})

    @app.exception_handler(ValidationError)
    async def invalid(request: Request, exc: ValidationError):
        return JSONResponse(
            status_code=422, content={"detail": str(exc), "error": type(exc).__name__}
        )

    @app.exception_handler(ProviderUnavailable)
    async def provider_down(request: Request, exc: ProviderUnavailable):
        return JSONResponse(
            status_code=502, content={"detail": str(exc), "error": "ProviderUnavailable"}
        )

    @app.exception_handler(SmartstatError)
    async def runtime_fault(request: Request, exc: SmartstatError):
        return JSONResponse(
            status_code=500, content={"detail": str(exc), "error": type(exc).__name__}
        )

    @app.get("/api/units", response_model=list[schemas.UnitSummaryOut])
    def list_units():
        return [
            schemas.UnitSummaryOut(
                unit_id=uid, fitted=unit.fit is not None, alpha=unit.cet.alpha
            )
            for uid, unit in sorted(registry.units.items())
        ]

    @app.get("/api/units/{unit_id}/state", response_model=schemas.StateOut)
    def unit_state(unit_id: str):
        unit = unit_or_404(unit_id)
        rec: ObservationRecord | None = unit.latest_record()
        try:
            now = unit.now()
        except StaleModel:
            now = None
        return schemas.StateOut(
            unit_id=unit_id,
            observed_at=None if rec is None else format_timestamp(rec.timestamp),
            temperatures={} if rec is None else dict(rec.sensed_temps),
            outdoor_temp_c=None if rec is None else rec.outdoor_temp,
            compressor_on=None if rec is None else rec.compressor_on,
            active_set_temp=_active_set_temp(unit, now),
            control=_control_out(unit),
            model=_model_out(unit),
        )

    @app.put("/api/units/{unit_id}/knob", response_model=schemas.PlanOut)
    def put_knob(unit_id: str, body: schemas.KnobRequest):
        unit = unit_or_404(unit_id)
        schedule, diag = unit.set_knob(body.alpha)
        return _plan_out(unit, schedule, diag)

    @app.put("/api/units/{unit_id}/preference", response_model=schemas.PlanOut)
    def put_preference(unit_id: str, body: schemas.PreferenceRequest):
        unit = unit_or_404(unit_id)
        schedule, diag = unit.set_preference(body.preferred_temp, body.band)
        return _plan_out(unit, schedule, diag)

    @app.get("/api/units/{unit_id}/whatif", response_model=schemas.WhatIfOut)
    def what_if(
        unit_id: str,
        duration_h: float = Query(gt=0.0, le=48.0),
        set_temps: list[float] = Query(alias="set", min_length=1),
    ):
        unit = unit_or_404(unit_id)
        ordered = tuple(sorted(set_temps))
        if len(set(ordered)) != len(ordered):
            raise HTTPException(
                status_code=422, detail="set temperatures must be distinct"
            )
        entries = unit.what_if(duration_h, ordered)
        return schemas.WhatIfOut(
            unit_id=unit_id,
            duration_h=duration_h,
            entries=[
                schemas.WhatIfEntryOut(
                    set_temp=e.set_temp, energy_kwh=e.energy_kwh, cycles=e.cycles
                )
                for e in entries
            ],
        )

    @app.post("/api/units/{unit_id}/observations", response_model=schemas.IngestOut)
    async def post_observations(unit_id: str, request: Request):
        unit = unit_or_404(unit_id)
        body = (await request.body()).decode("utf-8", errors="replace")
        accepted, rejected, duplicates = unit.ingest(body)
        return schemas.IngestOut(
            accepted=accepted, rejected=rejected, duplicates=duplicates
        )

    @app.get("/api/units/{unit_id}/energy", response_model=schemas.EnergyOut)
    def energy(
        unit_id: str,
        window_from: str = Query(alias="from"),
        window_to: str = Query(alias="to"),
    ):
        unit = unit_or_404(unit_id)
        t0 = parse_timestamp(window_from)
        t1 = parse_timestamp(window_to)
        report = unit.energy_between(t0, t1)
        return schemas.EnergyOut(
            unit_id=unit_id,
            window_start=format_timestamp(t0),
            window_end=format_timestamp(t1),
            energy_kwh=report.energy_kwh,
            cycles=report.cycles,
            on_hours=report.on_hours,
            method=report.method,
        )

    @app.get("/api/units/{unit_id}/trace", response_model=schemas.TraceOut)
    def trace(unit_id: str, hours: float = Query(default=6.0, gt=0.0, le=168.0)):
        unit = unit_or_404(unit_id)
        window, seg = unit.trace_window(hours)
        flags = {}
        if seg is not None:
            flags = {t: bool(f) for t, f in zip(seg.times, seg.flags)}
        zone = unit.cfg.preset.primary_zone
        points = [
            schemas.TracePointOut(
                timestamp=format_timestamp(r.timestamp),
                room_temp_c=r.sensed_temps.get(zone, float("nan")),
                outdoor_temp_c=r.outdoor_temp,
                set_temp_c=r.set_temp,
                compressor_on=(
                    r.compressor_on
                    if r.compressor_on is not None
                    else flags.get(r.timestamp)
                ),
            )
            for r in window
        ]
        return schemas.TraceOut(unit_id=unit_id, points=points)

    @app.get("/api/units/{unit_id}/health", response_model=schemas.HealthOut)
    def health(unit_id: str, days: int = Query(default=90, ge=1, le=3650)):
        unit = unit_or_404(unit_id)
        rows = unit.health_rows[-days:]
        detector = unit.monitor.detector
        return schemas.HealthOut(
            unit_id=unit_id,
            days_seen=unit.monitor.days_seen,
            armed=unit.monitor.armed,
            cusum=round(detector.cusum, 3),
            detector_state=detector.state,
            alarm_date=(
                None if detector.alarm_date is None
                else format_timestamp(detector.alarm_date)
            ),
            latest=_health_row_out(rows[-1]) if rows else None,
            history=[_health_row_out(r) for r in rows],
            alerts=[
                schemas.AlertOut(
                    date=format_timestamp(a.date),
                    z=round(a.z, 3),
                    cusum=round(a.cusum, 3),
                    message=a.message,
                )
                for a in unit.alerts
            ],
        )

    @app.get("/api/units/{unit_id}/plan", response_model=schemas.PlanOut)
    def get_plan(unit_id: str):
        unit = unit_or_404(unit_id)
        schedule, diag = unit.ensure_plan(cfg.replan_every_s)
        return _plan_out(unit, schedule, diag)

    return app
