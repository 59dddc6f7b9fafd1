// Hand-rolled SVG and flexbox charts. All arithmetic in here is pixel
// layout: scaling values the service sent onto a drawing surface. The
// numbers a user can read off a chart are rendered with v()/t() and are
// always the service's own.

import { el, t, v } from "./dom.js";
import type { HealthRow, ScheduleOut, TracePoint, WhatIfEntry } from "./api.js";

const SVG_NS = "http://www.w3.org/2000/svg";

function svg(tag: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, val] of Object.entries(attrs)) node.setAttribute(key, String(val));
  return node;
}

/** One labelled bar per what-if entry, in the order the service returned. */
export function whatifBars(entries: WhatIfEntry[]): HTMLElement {
  const chart = el("div", "bars");
  const peak = Math.max(...entries.map((e) => e.energy_kwh), 1e-9);
  for (const entry of entries) {
    const bar = el("div", "bar");
    bar.appendChild(v(entry.energy_kwh, "kwh"));
    const column = el("div", "bar-fill");
    column.style.height = `${Math.max((entry.energy_kwh / peak) * 100, 2)}%`;
    bar.appendChild(column);
    bar.appendChild(v(entry.set_temp, "cand"));
    chart.appendChild(bar);
  }
  return chart;
}

/** Horizontal strip of schedule slots, each labelled with start time and set temp. */
export function scheduleStrip(schedule: ScheduleOut): HTMLElement {
  const strip = el("div", "timeline");
  for (const entry of schedule.entries) {
    const slot = el("div", "slot");
    slot.appendChild(v(entry.set_temp, "slot-temp"));
    slot.appendChild(t(entry.start, "slot-start"));
    strip.appendChild(slot);
  }
  return strip;
}

interface Scale {
  lo: number;
  span: number;
}

function tempScale(points: TracePoint[]): Scale {
  let lo = Infinity;
  let hi = -Infinity;
  for (const p of points) {
    for (const value of [p.room_temp_c, p.outdoor_temp_c, p.set_temp_c]) {
      if (value === null) continue;
      if (value < lo) lo = value;
      if (value > hi) hi = value;
    }
  }
  if (!isFinite(lo)) return { lo: 0, span: 1 };
  const pad = Math.max((hi - lo) * 0.08, 0.5);
  return { lo: lo - pad, span: hi - lo + 2 * pad };
}

function polyline(
  points: TracePoint[],
  pick: (p: TracePoint) => number | null,
  scale: Scale,
  width: number,
  height: number,
  cls: string,
): SVGElement[] {
  // break the line wherever the field is absent, so gaps stay visible
  const runs: string[][] = [[]];
  points.forEach((p, i) => {
    const value = pick(p);
    if (value === null) {
      if (runs[runs.length - 1].length) runs.push([]);
      return;
    }
    const x = (i / Math.max(points.length - 1, 1)) * width;
    const y = height - ((value - scale.lo) / scale.span) * height;
    runs[runs.length - 1].push(`${x.toFixed(1)},${y.toFixed(1)}`);
  });
  return runs
    .filter((run) => run.length > 1)
    .map((run) => svg("polyline", { points: run.join(" "), class: cls }));
}

/**
 * Room, outdoor and set-temperature lines over the trace window, with a
 * shaded band under every stretch the compressor was on.
 */
export function traceChart(points: TracePoint[], width = 640, height = 200): SVGElement {
  const root = svg("svg", { viewBox: `0 0 ${width} ${height}`, class: "trace" });
  if (!points.length) return root;
  const scale = tempScale(points);
  const step = width / Math.max(points.length - 1, 1);

  let runStart = -1;
  points.forEach((p, i) => {
    const on = p.compressor_on === true;
    if (on && runStart < 0) runStart = i;
    const ending = runStart >= 0 && (!on || i === points.length - 1);
    if (ending) {
      const upto = on ? i : i - 1;
      root.appendChild(
        svg("rect", {
          x: (runStart * step).toFixed(1),
          y: 0,
          width: Math.max((upto - runStart) * step, 1).toFixed(1),
          height,
          class: "compressor-band",
        }),
      );
      runStart = -1;
    }
  });

  for (const line of polyline(points, (p) => p.outdoor_temp_c, scale, width, height, "outdoor"))
    root.appendChild(line);
  for (const line of polyline(points, (p) => p.set_temp_c, scale, width, height, "setline"))
    root.appendChild(line);
  for (const line of polyline(points, (p) => p.room_temp_c, scale, width, height, "room"))
    root.appendChild(line);
  return root;
}

/** Tiny cusum-over-days polyline for the alert feed header. */
export function cusumSparkline(rows: HealthRow[], width = 160, height = 36): SVGElement {
  const root = svg("svg", { viewBox: `0 0 ${width} ${height}`, class: "sparkline" });
  if (!rows.length) return root;
  const peak = Math.max(...rows.map((r) => r.cusum), 1e-9);
  const coords = rows.map((row, i) => {
    const x = (i / Math.max(rows.length - 1, 1)) * width;
    const y = height - 3 - (row.cusum / peak) * (height - 6);
    return `${x.toFixed(1)},${y.toFixed(1)}`;
  });
  root.appendChild(svg("polyline", { points: coords.join(" "), class: "cusum-line" }));
  return root;
}
