// Shared plumbing for the dashboard tests: a recording fetch wrapper (the
// network capture the display-integrity checks run against), DOM scaffolding,
// and a leaf-collector for response bodies.

import { inject } from "vitest";
import { mount, type AppHandle, type MountOptions } from "../src/app.js";

export const apiBase = (): string => inject("apiBase");

export interface CapturedCall {
  method: string;
  url: string;
  status: number;
  body: unknown;
}

export interface Recorder {
  calls: CapturedCall[];
  restore(): void;
}

/** Wrap global fetch so every request/response pair is kept for inspection. */
export function recordFetch(): Recorder {
  const real = globalThis.fetch;
  const calls: CapturedCall[] = [];
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const res = await real(input, init);
    let body: unknown = null;
    try {
      body = await res.clone().json();
    } catch {
      body = null;
    }
    calls.push({
      method: init?.method ?? "GET",
      url: String(input),
      status: res.status,
      body,
    });
    return res;
  }) as typeof fetch;
  return {
    calls,
    restore() {
      globalThis.fetch = real;
    },
  };
}

/** Replace fetch for the next matching call only; others pass through. */
export function failNextFetch(
  match: (url: string) => boolean,
  respond: () => Promise<Response> | Response,
): () => void {
  const real = globalThis.fetch;
  globalThis.fetch = (async (input: RequestInfo | URL, init?: RequestInit) => {
    if (match(String(input))) {
      globalThis.fetch = real;
      return respond();
    }
    return real(input, init);
  }) as typeof fetch;
  return () => {
    globalThis.fetch = real;
  };
}

export function freshRoot(): HTMLElement {
  document.body.innerHTML = "";
  const root = document.createElement("div");
  root.id = "app";
  document.body.appendChild(root);
  return root;
}

export async function mountApp(opts: Partial<MountOptions> = {}): Promise<AppHandle> {
  const root = freshRoot();
  return mount(root, { apiBase: apiBase(), pollMs: 0, ...opts });
}

/** Every scalar in a JSON body, stringified the way the panels render them. */
export function leaves(value: unknown, out: Set<string> = new Set()): Set<string> {
  if (value !== null && typeof value === "object") {
    for (const inner of Object.values(value as Record<string, unknown>)) {
      leaves(inner, out);
    }
  } else if (value !== undefined) {
    out.add(String(value));
  }
  return out;
}

export function settle(ms = 0): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function waitFor(cond: () => boolean, timeoutMs = 10000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > timeoutMs) throw new Error("condition not met in time");
    await settle(25);
  }
}

/** Fire an input's full interaction: value, input event, change event. */
export function drag(input: HTMLInputElement, value: string): void {
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

export function text(root: ParentNode, selector: string): string {
  const node = root.querySelector(selector);
  if (!node) throw new Error(`missing ${selector}`);
  return node.textContent ?? "";
}

export function all(root: ParentNode, selector: string): HTMLElement[] {
  return Array.from(root.querySelectorAll(selector));
}
