// Small DOM builders shared by the panels.
//
// Values that came out of an API response are rendered through v() or t()
// and nothing else. That tags the node, which is what lets the test suite
// walk the document and check every displayed quantity against the capture
// of what the service actually sent.

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Render an API field verbatim. The shown text is String(value), nothing else. */
export function v(value: number | string | boolean | null, className = ""): HTMLSpanElement {
  const span = el("span", className ? `v ${className}` : "v");
  span.textContent = String(value);
  return span;
}

/**
 * Render an API timestamp as its HH:MM part. The full field is kept on the
 * node so the displayed text stays checkable against the response body.
 */
export function t(iso: string, className = ""): HTMLSpanElement {
  const span = el("span", className ? `t ${className}` : "t");
  span.dataset.iso = iso;
  span.textContent = iso.slice(11, 16);
  return span;
}

/** Like t(), but shows the calendar-date part of the timestamp. */
export function d(iso: string, className = ""): HTMLSpanElement {
  const span = el("span", className ? `d ${className}` : "d");
  span.dataset.iso = iso;
  span.textContent = iso.slice(0, 10);
  return span;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}
