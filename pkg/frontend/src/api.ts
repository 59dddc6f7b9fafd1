// Typed client for the smartstat HTTP API.
//
// This is a transport layer only: it moves JSON between the service and the
// panels. Every quantity the dashboard shows comes out of these response
// bodies untouched; nothing in the client derives energy, comfort or any
// other domain number on its own.

export interface UnitSummary {
  unit_id: string;
  fitted: boolean;
  alpha: number;
}

export interface ControlOut {
  alpha: number;
  preferred_temp: number;
  band: number;
  candidates: number[];
  slot_min: number;
  horizon_h: number;
}

export interface ModelOut {
  fitted: boolean;
  created_at: string | null;
  age_days: number | null;
  expired: boolean;
  rmse: number | null;
}

export interface StateOut {
  unit_id: string;
  observed_at: string | null;
  temperatures: Record<string, number>;
  outdoor_temp_c: number | null;
  compressor_on: boolean | null;
  active_set_temp: number | null;
  control: ControlOut;
  model: ModelOut;
}

export interface ScheduleEntry {
  start: string;
  set_temp: number;
}

export interface ScheduleOut {
  entries: ScheduleEntry[];
  slot_min: number;
  start: string;
  end: string;
}

export interface PlanDiagnostics {
  predicted_energy_kwh: number;
  predicted_discomfort_degh: number;
  method: string;
  nodes_expanded: number;
  j_value: number;
}

export interface PlanOut {
  unit_id: string;
  planned_at: string;
  control: ControlOut;
  schedule: ScheduleOut;
  diagnostics: PlanDiagnostics;
}

export interface WhatIfEntry {
  set_temp: number;
  energy_kwh: number;
  cycles: number;
}

export interface WhatIfOut {
  unit_id: string;
  duration_h: number;
  entries: WhatIfEntry[];
}

export interface TracePoint {
  timestamp: string;
  room_temp_c: number;
  outdoor_temp_c: number;
  set_temp_c: number | null;
  compressor_on: boolean | null;
}

export interface TraceOut {
  unit_id: string;
  points: TracePoint[];
}

export interface HealthRow {
  date: string;
  valid: boolean;
  z: number | null;
  cusum: number;
  duty_cycle: number | null;
  cooling_rate: number | null;
  attainment_gap: number | null;
  pulldown_minutes: number | null;
  qhat: number | null;
}

export interface AlertOut {
  date: string;
  z: number;
  cusum: number;
  message: string;
}

export interface HealthOut {
  unit_id: string;
  days_seen: number;
  armed: boolean;
  cusum: number;
  detector_state: string;
  alarm_date: string | null;
  latest: HealthRow | null;
  history: HealthRow[];
  alerts: AlertOut[];
}

/** Non-2xx response, with the service's own explanation attached. */
export class ApiError extends Error {
  status: number;
  /** machine-readable code ("StaleModel", ...) when the service sent one */
  code: string | null;

  constructor(status: number, message: string, code: string | null) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

interface FieldIssue {
  loc: (string | number)[];
  msg: string;
}

function detailMessage(body: unknown): string {
  if (typeof body !== "object" || body === null) return "request failed";
  const detail = (body as { detail?: unknown }).detail;
  if (typeof detail === "string") return detail;
  if (Array.isArray(detail)) {
    // field-level validation issues; name the field in each line
    return detail
      .map((issue: FieldIssue) => `${issue.loc.slice(1).join(".")}: ${issue.msg}`)
      .join("; ");
  }
  return "request failed";
}

export class ApiClient {
  base: string;

  constructor(base: string) {
    this.base = base.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    const body: unknown = await res.json();
    if (!res.ok) {
      const code = (body as { error?: string }).error ?? null;
      throw new ApiError(res.status, detailMessage(body), code);
    }
    return body as T;
  }

  units(): Promise<UnitSummary[]> {
    return this.request("/api/units");
  }

  state(unit: string): Promise<StateOut> {
    return this.request(`/api/units/${unit}/state`);
  }

  plan(unit: string): Promise<PlanOut> {
    return this.request(`/api/units/${unit}/plan`);
  }

  putKnob(unit: string, alpha: number): Promise<PlanOut> {
    return this.request(`/api/units/${unit}/knob`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ alpha }),
    });
  }

  putPreference(unit: string, preferredTemp: number, band: number): Promise<PlanOut> {
    return this.request(`/api/units/${unit}/preference`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ preferred_temp: preferredTemp, band }),
    });
  }

  whatIf(unit: string, setTemps: number[], durationH: number): Promise<WhatIfOut> {
    const params = new URLSearchParams();
    for (const t of setTemps) params.append("set", String(t));
    params.set("duration_h", String(durationH));
    return this.request(`/api/units/${unit}/whatif?${params}`);
  }

  trace(unit: string, hours: number): Promise<TraceOut> {
    return this.request(`/api/units/${unit}/trace?hours=${hours}`);
  }

  health(unit: string): Promise<HealthOut> {
    return this.request(`/api/units/${unit}/health`);
  }
}
