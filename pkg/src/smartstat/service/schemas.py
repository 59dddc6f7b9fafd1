"""Wire shapes for the HTTP API.

Timestamps travel as RFC 3339 strings so clients render them verbatim; the
server owns every derived quantity. Clients are expected to display these
fields, not to compute with them.
"""

from pydantic import BaseModel, Field


class KnobRequest(BaseModel):
    alpha: float = Field(ge=0.0, le=1.0, description="0 = comfort only, 1 = energy only")


class PreferenceRequest(BaseModel):
    preferred_temp: float = Field(ge=10.0, le=35.0)
    band: float = Field(ge=0.0, le=10.0)


class ControlOut(BaseModel):
    alpha: float
    preferred_temp: float
    band: float
    candidates: list[float]
    slot_min: float
    horizon_h: float


class ModelOut(BaseModel):
    fitted: bool
    created_at: str | None
    age_days: float | None
    expired: bool
    rmse: float | None


class StateOut(BaseModel):
    unit_id: str
    observed_at: str | None
    temperatures: dict[str, float]
    outdoor_temp_c: float | None
    compressor_on: bool | None
    active_set_temp: float | None
    control: ControlOut
    model: ModelOut


class ScheduleEntryOut(BaseModel):
    start: str
    set_temp: float


class ScheduleOut(BaseModel):
    entries: list[ScheduleEntryOut]
    slot_min: float
    start: str
    end: str


class DiagnosticsOut(BaseModel):
    predicted_energy_kwh: float
    predicted_discomfort_degh: float
    method: str
    nodes_expanded: int
    j_value: float


class PlanOut(BaseModel):
    unit_id: str
    planned_at: str
    control: ControlOut
    schedule: ScheduleOut
    diagnostics: DiagnosticsOut


class WhatIfEntryOut(BaseModel):
    set_temp: float
    energy_kwh: float
    cycles: int


class WhatIfOut(BaseModel):
    unit_id: str
    duration_h: float
    entries: list[WhatIfEntryOut]


class IngestOut(BaseModel):
    accepted: int
    rejected: int
    duplicates: int


class EnergyOut(BaseModel):
    unit_id: str
    window_start: str
    window_end: str
    energy_kwh: float
    cycles: int
    on_hours: float
    method: str


class TracePointOut(BaseModel):
    timestamp: str
    room_temp_c: float
    outdoor_temp_c: float
    set_temp_c: float | None
    compressor_on: bool | None


class TraceOut(BaseModel):
    unit_id: str
    points: list[TracePointOut]


class AlertOut(BaseModel):
    date: str
    z: float
    cusum: float
    message: str


class HealthRowOut(BaseModel):
    date: str
    valid: bool
    z: float | None
    cusum: float
    duty_cycle: float | None
    cooling_rate: float | None
    attainment_gap: float | None
    pulldown_minutes: float | None
    qhat: float | None


class HealthOut(BaseModel):
    unit_id: str
    days_seen: int
    armed: bool
    cusum: float
    detector_state: str
    alarm_date: str | None
    latest: HealthRowOut | None
    history: list[HealthRowOut]
    alerts: list[AlertOut]


class UnitSummaryOut(BaseModel):
    unit_id: str
    fitted: bool
    alpha: float
