// Dashboard wiring: one mount() call builds the panels inside a root
// element and keeps them fed from the HTTP API.
//
// Ground rules, enforced by the test suite:
//  - the client computes nothing in the domain; every shown quantity is a
//    response field rendered through v()/t()/d()
//  - each panel keeps only the latest response it asked for (stale replies
//    are dropped, not merged)
//  - the selected unit lives in the URL, so a reload lands on the same view

import {
  ApiClient,
  ApiError,
  type HealthOut,
  type PlanOut,
  type StateOut,
  type TraceOut,
  type UnitSummary,
  type WhatIfOut,
} from "./api.js";
import { clear, d, el, t, v } from "./dom.js";
import { cusumSparkline, scheduleStrip, traceChart, whatifBars } from "./charts.js";

export const DEFAULT_POLL_MS = 5000;

/** Monotone ticket counter; a response only lands if it holds the newest ticket. */
class Gate {
  private seq = 0;
  take(): number {
    return ++this.seq;
  }
  current(ticket: number): boolean {
    return ticket === this.seq;
  }
}

export interface MountOptions {
  apiBase?: string;
  unit?: string;
  pollMs?: number;
}

export interface AppHandle {
  root: HTMLElement;
  client: ApiClient;
  unit(): string | null;
  setUnit(unitId: string): Promise<void>;
  refresh(): Promise<void>;
  dispose(): void;
}

const SHELL = `
<header class="topbar">
  <h1>smartstat</h1>
  <label class="unit-label">unit
    <select class="unit-select"></select>
  </label>
  <div class="banner hidden" role="alert"></div>
</header>
<main class="grid">
  <section class="panel state-panel">
    <h2>now</h2>
    <div class="state-body"></div>
    <div class="msg state-msg"></div>
  </section>
  <section class="panel knob-panel">
    <h2>comfort / energy</h2>
    <div class="knob-row">
      <span class="knob-end">comfort</span>
      <input type="range" class="knob-slider" min="0" max="1" step="0.05">
      <span class="knob-end">savings</span>
    </div>
    <div class="knob-readout">alpha <span class="knob-alpha"></span></div>
    <div class="msg knob-msg"></div>
  </section>
  <section class="panel pref-panel">
    <h2>preference</h2>
    <label>preferred &deg;C <input type="number" class="pref-temp" step="0.5"></label>
    <label>band &deg;C <input type="number" class="pref-band" step="0.1"></label>
    <button class="pref-apply">apply</button>
    <div class="msg pref-msg"></div>
  </section>
  <section class="panel schedule-panel">
    <h2>schedule</h2>
    <div class="schedule-body"></div>
    <div class="schedule-diag"></div>
    <div class="msg schedule-msg"></div>
  </section>
  <section class="panel whatif-panel">
    <h2>what if</h2>
    <div class="whatif-form">
      <input type="text" class="whatif-input" placeholder="set temps, comma separated">
      <select class="whatif-hours">
        <option value="2">2 h</option>
        <option value="6" selected>6 h</option>
        <option value="12">12 h</option>
        <option value="24">24 h</option>
      </select>
      <button class="whatif-run">run</button>
    </div>
    <div class="whatif-body"></div>
    <div class="msg whatif-msg"></div>
  </section>
  <section class="panel trace-panel">
    <h2>trace</h2>
    <select class="trace-hours">
      <option value="6" selected>6 h</option>
      <option value="24">24 h</option>
      <option value="48">48 h</option>
    </select>
    <div class="trace-body"></div>
    <div class="trace-legend">
      <span class="legend room">room</span>
      <span class="legend outdoor">outdoor</span>
      <span class="legend setline">set</span>
      <span class="legend band">compressor on</span>
    </div>
    <div class="msg trace-msg"></div>
  </section>
  <section class="panel health-panel">
    <h2>health</h2>
    <div class="health-summary"></div>
    <div class="health-spark"></div>
    <ul class="alert-feed"></ul>
    <div class="msg health-msg"></div>
  </section>
</main>`;

function dash(): HTMLSpanElement {
  return el("span", "dim", "–");
}

function query<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`dashboard shell is missing ${selector}`);
  return node as T;
}

class App implements AppHandle {
  root: HTMLElement;
  client: ApiClient;

  private unitSelect: HTMLSelectElement;
  private banner: HTMLDivElement;
  private slider: HTMLInputElement;
  private alphaOut: HTMLSpanElement;
  private prefTemp: HTMLInputElement;
  private prefBand: HTMLInputElement;

  private currentUnit: string | null = null;
  private confirmedAlpha = 0.5;
  private confirmedPref: { temp: number; band: number } | null = null;
  private dragging = false;
  private pollTimer: ReturnType<typeof setInterval> | null = null;

  private gates = {
    state: new Gate(),
    plan: new Gate(),
    knob: new Gate(),
    pref: new Gate(),
    whatif: new Gate(),
    trace: new Gate(),
    health: new Gate(),
  };

  constructor(root: HTMLElement, opts: MountOptions) {
    this.root = root;
    this.client = new ApiClient(opts.apiBase ?? "");
    root.innerHTML = SHELL;
    this.unitSelect = query(root, ".unit-select");
    this.banner = query(root, ".banner");
    this.slider = query(root, ".knob-slider");
    this.alphaOut = query(root, ".knob-alpha");
    this.prefTemp = query(root, ".pref-temp");
    this.prefBand = query(root, ".pref-band");
    this.wire();
    const pollMs = opts.pollMs ?? DEFAULT_POLL_MS;
    if (pollMs > 0) {
      this.pollTimer = setInterval(() => void this.refresh(), pollMs);
    }
  }

  unit(): string | null {
    return this.currentUnit;
  }

  dispose(): void {
    if (this.pollTimer !== null) clearInterval(this.pollTimer);
    this.pollTimer = null;
  }

  async start(opts: MountOptions): Promise<void> {
    let units: UnitSummary[] = [];
    try {
      units = await this.client.units();
    } catch {
      this.showBanner("service unreachable; retrying on the next poll");
      return;
    }
    clear(this.unitSelect);
    for (const u of units) {
      const option = el("option");
      option.value = u.unit_id;
      option.textContent = u.fitted ? u.unit_id : `${u.unit_id} (unfitted)`;
      this.unitSelect.appendChild(option);
    }
    const fromUrl = new URLSearchParams(window.location.search).get("unit");
    const wanted = opts.unit ?? fromUrl;
    const start =
      units.find((u) => u.unit_id === wanted)?.unit_id ?? units[0]?.unit_id ?? null;
    if (start !== null) await this.setUnit(start);
  }

  async setUnit(unitId: string): Promise<void> {
    this.currentUnit = unitId;
    this.unitSelect.value = unitId;
    const url = new URL(window.location.href);
    url.searchParams.set("unit", unitId);
    window.history.replaceState(null, "", url.toString());
    this.setMsg(".whatif-msg", "");
    clear(query(this.root, ".whatif-body"));
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (this.currentUnit === null) return;
    const results = await Promise.all([
      this.refreshState(),
      this.refreshPlan(),
      this.refreshTrace(),
      this.refreshHealth(),
    ]);
    if (results.some((ok) => ok === false)) {
      this.showBanner("service unreachable; showing the last good data");
    } else {
      this.hideBanner();
    }
  }

  // -- wiring ------------------------------------------------------------

  private wire(): void {
    this.unitSelect.addEventListener("change", () => {
      void this.setUnit(this.unitSelect.value);
    });

    this.slider.addEventListener("input", () => {
      // optimistic echo while the thumb moves; confirmed on release
      this.dragging = true;
      this.alphaOut.replaceChildren(el("span", "pending", this.slider.value));
    });
    this.slider.addEventListener("change", () => {
      this.dragging = false;
      void this.commitKnob(Number(this.slider.value));
    });

    query<HTMLButtonElement>(this.root, ".pref-apply").addEventListener("click", () => {
      void this.commitPreference();
    });
    query<HTMLButtonElement>(this.root, ".whatif-run").addEventListener("click", () => {
      void this.runWhatIf();
    });
    query<HTMLSelectElement>(this.root, ".trace-hours").addEventListener("change", () => {
      void this.refreshTrace();
    });
  }

  private async commitKnob(alpha: number): Promise<void> {
    if (this.currentUnit === null) return;
    const ticket = this.gates.knob.take();
    try {
      const plan = await this.client.putKnob(this.currentUnit, alpha);
      if (this.gates.knob.current(ticket)) {
        this.setMsg(".knob-msg", "");
        this.applyControl(plan.control);
      }
      // a confirmed mutation outranks any plan poll still in flight
      this.gates.plan.take();
      this.renderPlan(plan);
    } catch (err) {
      if (!this.gates.knob.current(ticket)) return;
      this.revertKnob();
      if (err instanceof ApiError) {
        this.setMsg(".knob-msg", err.message);
      } else {
        this.showBanner("service unreachable; knob change was not applied");
      }
    }
  }

  private async commitPreference(): Promise<void> {
    if (this.currentUnit === null) return;
    const temp = Number(this.prefTemp.value);
    const band = Number(this.prefBand.value);
    if (this.prefTemp.value.trim() === "" || this.prefBand.value.trim() === "" ||
        Number.isNaN(temp) || Number.isNaN(band)) {
      this.setMsg(".pref-msg", "enter a numeric preferred temperature and band");
      return;
    }
    const ticket = this.gates.pref.take();
    try {
      const plan = await this.client.putPreference(this.currentUnit, temp, band);
      if (this.gates.pref.current(ticket)) {
        this.setMsg(".pref-msg", "");
        this.applyControl(plan.control);
      }
      this.gates.plan.take();
      this.renderPlan(plan);
    } catch (err) {
      if (!this.gates.pref.current(ticket)) return;
      this.revertPreference();
      if (err instanceof ApiError) {
        this.setMsg(".pref-msg", err.message);
      } else {
        this.showBanner("service unreachable; preference change was not applied");
      }
    }
  }

  private async runWhatIf(): Promise<void> {
    if (this.currentUnit === null) return;
    const raw = query<HTMLInputElement>(this.root, ".whatif-input").value;
    const tokens = raw.split(",").map((s) => s.trim()).filter((s) => s !== "");
    if (!tokens.length) {
      this.setMsg(".whatif-msg", "enter at least one set temperature");
      return;
    }
    const temps = tokens.map(Number);
    if (temps.some((x) => Number.isNaN(x))) {
      this.setMsg(".whatif-msg", "set temperatures must be numbers");
      return;
    }
    const hours = Number(query<HTMLSelectElement>(this.root, ".whatif-hours").value);
    const ticket = this.gates.whatif.take();
    try {
      const out = await this.client.whatIf(this.currentUnit, temps, hours);
      if (!this.gates.whatif.current(ticket)) return;
      this.setMsg(".whatif-msg", "");
      this.renderWhatIf(out);
    } catch (err) {
      if (!this.gates.whatif.current(ticket)) return;
      if (err instanceof ApiError) {
        const note = err.code === "StaleModel" ? "model not fitted — " : "";
        this.setMsg(".whatif-msg", note + err.message);
      } else {
        this.showBanner("service unreachable; what-if not run");
      }
    }
  }

  // -- per-panel refresh (each drops stale replies on its own gate) ------

  private async refreshState(): Promise<boolean> {
    const unit = this.currentUnit!;
    const ticket = this.gates.state.take();
    try {
      const state = await this.client.state(unit);
      if (this.gates.state.current(ticket)) this.renderState(state);
      return true;
    } catch (err) {
      if (!this.gates.state.current(ticket)) return true;
      if (err instanceof ApiError) {
        this.setMsg(".state-msg", err.message);
        return true;
      }
      return false;
    }
  }

  private async refreshPlan(): Promise<boolean> {
    const unit = this.currentUnit!;
    const ticket = this.gates.plan.take();
    try {
      const plan = await this.client.plan(unit);
      if (this.gates.plan.current(ticket)) {
        this.setMsg(".schedule-msg", "");
        this.renderPlan(plan);
      }
      return true;
    } catch (err) {
      if (!this.gates.plan.current(ticket)) return true;
      if (err instanceof ApiError) {
        clear(query(this.root, ".schedule-body"));
        clear(query(this.root, ".schedule-diag"));
        const note = err.code === "StaleModel" ? "model not fitted — " : "";
        this.setMsg(".schedule-msg", note + err.message);
        return true;
      }
      return false;
    }
  }

  private async refreshTrace(): Promise<boolean> {
    const unit = this.currentUnit!;
    const hours = Number(query<HTMLSelectElement>(this.root, ".trace-hours").value);
    const ticket = this.gates.trace.take();
    try {
      const trace = await this.client.trace(unit, hours);
      if (this.gates.trace.current(ticket)) this.renderTrace(trace);
      return true;
    } catch (err) {
      if (!this.gates.trace.current(ticket)) return true;
      if (err instanceof ApiError) {
        this.setMsg(".trace-msg", err.message);
        return true;
      }
      return false;
    }
  }

  private async refreshHealth(): Promise<boolean> {
    const unit = this.currentUnit!;
    const ticket = this.gates.health.take();
    try {
      const health = await this.client.health(unit);
      if (this.gates.health.current(ticket)) this.renderHealth(health);
      return true;
    } catch (err) {
      if (!this.gates.health.current(ticket)) return true;
      if (err instanceof ApiError) {
        this.setMsg(".health-msg", err.message);
        return true;
      }
      return false;
    }
  }

  // -- renderers ---------------------------------------------------------

  private renderState(state: StateOut): void {
    const body = query(this.root, ".state-body");
    clear(body);
    this.setMsg(".state-msg", "");

    const rows = el("dl", "state-rows");
    const row = (label: string, value: HTMLElement) => {
      rows.appendChild(el("dt", "", label));
      const dd = el("dd");
      dd.appendChild(value);
      rows.appendChild(dd);
    };

    row("observed", state.observed_at === null ? dash() : t(state.observed_at));
    for (const [zone, temp] of Object.entries(state.temperatures)) {
      const span = el("span");
      span.appendChild(v(temp));
      span.appendChild(el("span", "unit-suffix", " °C"));
      row(zone, span);
    }
    row("outdoor", state.outdoor_temp_c === null ? dash() : v(state.outdoor_temp_c));
    row("active set", state.active_set_temp === null ? dash() : v(state.active_set_temp));
    const comp =
      state.compressor_on === null
        ? dash()
        : el("span", state.compressor_on ? "on" : "off", state.compressor_on ? "on" : "off");
    row("compressor", comp);

    const model = el("span");
    if (!state.model.fitted) {
      model.appendChild(el("span", "warn", "not fitted"));
    } else {
      model.appendChild(v(state.model.age_days!));
      model.appendChild(el("span", "unit-suffix", " days old, rmse "));
      model.appendChild(v(state.model.rmse!));
      if (state.model.expired) model.appendChild(el("span", "warn", " expired"));
    }
    row("model", model);
    body.appendChild(rows);

    this.applyControl(state.control);
  }

  /** Sync knob and preference widgets to service-confirmed control values. */
  private applyControl(control: StateOut["control"]): void {
    this.confirmedAlpha = control.alpha;
    this.confirmedPref = { temp: control.preferred_temp, band: control.band };
    if (!this.dragging) {
      this.slider.value = String(control.alpha);
      this.alphaOut.replaceChildren(v(control.alpha));
    }
    const active = this.root.ownerDocument.activeElement;
    if (active !== this.prefTemp && active !== this.prefBand) {
      this.prefTemp.value = String(control.preferred_temp);
      this.prefBand.value = String(control.band);
    }
    query<HTMLInputElement>(this.root, ".whatif-input").placeholder =
      control.candidates.join(", ");
  }

  private revertKnob(): void {
    this.slider.value = String(this.confirmedAlpha);
    this.alphaOut.replaceChildren(v(this.confirmedAlpha));
  }

  private revertPreference(): void {
    if (this.confirmedPref === null) return;
    this.prefTemp.value = String(this.confirmedPref.temp);
    this.prefBand.value = String(this.confirmedPref.band);
  }

  private renderPlan(plan: PlanOut): void {
    const body = query(this.root, ".schedule-body");
    clear(body);
    body.appendChild(scheduleStrip(plan.schedule));

    const diag = query(this.root, ".schedule-diag");
    clear(diag);
    diag.appendChild(el("span", "", "predicted "));
    diag.appendChild(v(plan.diagnostics.predicted_energy_kwh));
    diag.appendChild(el("span", "", " kWh, "));
    diag.appendChild(v(plan.diagnostics.predicted_discomfort_degh));
    diag.appendChild(el("span", "", " °C·h discomfort ("));
    diag.appendChild(v(plan.diagnostics.method));
    diag.appendChild(el("span", "", "), planned "));
    diag.appendChild(t(plan.planned_at));
  }

  private renderWhatIf(out: WhatIfOut): void {
    const body = query(this.root, ".whatif-body");
    clear(body);
    body.appendChild(whatifBars(out.entries));
    const caption = el("div", "whatif-caption");
    caption.appendChild(el("span", "", "kWh over "));
    caption.appendChild(v(out.duration_h));
    caption.appendChild(el("span", "", " h by set temperature"));
    body.appendChild(caption);
  }

  private renderTrace(trace: TraceOut): void {
    const body = query(this.root, ".trace-body");
    clear(body);
    this.setMsg(".trace-msg", "");
    if (!trace.points.length) {
      body.appendChild(el("span", "dim", "no observations in this window"));
      return;
    }
    body.appendChild(traceChart(trace.points));
  }

  private renderHealth(health: HealthOut): void {
    const summary = query(this.root, ".health-summary");
    clear(summary);
    this.setMsg(".health-msg", "");

    const badge = v(health.detector_state, `badge badge-${health.detector_state}`);
    summary.appendChild(badge);
    summary.appendChild(el("span", "", " after "));
    summary.appendChild(v(health.days_seen));
    summary.appendChild(el("span", "", " days, cusum "));
    summary.appendChild(v(health.cusum));
    if (health.alarm_date !== null) {
      summary.appendChild(el("span", "", ", alarmed "));
      summary.appendChild(d(health.alarm_date));
    }
    if (health.latest !== null && health.latest.valid) {
      const latest = el("div", "health-latest");
      latest.appendChild(el("span", "", "latest day: duty "));
      latest.appendChild(health.latest.duty_cycle === null ? dash() : v(health.latest.duty_cycle));
      latest.appendChild(el("span", "", ", drawing "));
      latest.appendChild(health.latest.qhat === null ? dash() : v(health.latest.qhat));
      latest.appendChild(el("span", "", " W while on"));
      summary.appendChild(latest);
    }

    const spark = query(this.root, ".health-spark");
    clear(spark);
    if (health.history.length) spark.appendChild(cusumSparkline(health.history));

    const feed = query<HTMLUListElement>(this.root, ".alert-feed");
    clear(feed);
    if (!health.alerts.length) {
      const item = el("li", "dim", "no alerts");
      feed.appendChild(item);
      return;
    }
    for (const alert of health.alerts) {
      const item = el("li", "alert");
      item.appendChild(d(alert.date));
      item.appendChild(el("span", "", " — "));
      item.appendChild(v(alert.message));
      item.appendChild(el("span", "", " (z "));
      item.appendChild(v(alert.z));
      item.appendChild(el("span", "", ", cusum "));
      item.appendChild(v(alert.cusum));
      item.appendChild(el("span", "", ")"));
      feed.appendChild(item);
    }
  }

  // -- chrome ------------------------------------------------------------

  private setMsg(selector: string, text: string): void {
    query(this.root, selector).textContent = text;
  }

  private showBanner(text: string): void {
    this.banner.textContent = text;
    this.banner.classList.remove("hidden");
  }

  private hideBanner(): void {
    this.banner.classList.add("hidden");
    this.banner.textContent = "";
  }
}

export async function mount(root: HTMLElement, opts: MountOptions = {}): Promise<AppHandle> {
  const app = new App(root, opts);
  await app.start(opts);
  return app;
}
