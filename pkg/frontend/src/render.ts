/** Pure rendering: (response, view state) -> a lightweight node tree.
 *
 * Interactions are declared as data-action attributes ("toggle:1.2",
 * "slide-next:1.2:0", "event:e3", ...) that the DOM layer dispatches back
 * into state transitions; rendering itself never touches the DOM. */

import type { AskFailure, AskResponse, EventsPage, PreviewItem, TraceNode } from "./api.js";
import { isExpanded, slideIndex, slideKey, TraceViewState } from "./viewmodel.js";

export interface VNode {
  tag: string;
  attrs: Record<string, string>;
  children: Array<VNode | string>;
}

export function h(tag: string, attrs: Record<string, string> = {},
                  ...children: Array<VNode | string | null>): VNode {
  return { tag, attrs, children: children.filter((c): c is VNode | string => c !== null) };
}

export function textOf(node: VNode | string): string {
  if (typeof node === "string") return node;
  return node.children.map(textOf).join(" ");
}

export function findAll(node: VNode | string, pred: (n: VNode) => boolean): VNode[] {
  if (typeof node === "string") return [];
  const here = pred(node) ? [node] : [];
  return here.concat(...node.children.map((c) => findAll(c, pred)));
}

export function renderItemSlideshow(item: PreviewItem, key: string,
                                    state: TraceViewState): VNode {
  const total = item.events.length;
  const index = Math.min(slideIndex(state, key), Math.max(total - 1, 0));
  const attrs = Object.entries(item.attrs)
    .filter(([, v]) => v !== null)
    .map(([k, v]) => `${k}: ${v}`)
    .join(", ");
  const children: Array<VNode | string> = [];
  if (total > 1) {
    children.push(h("button", { class: "arrow", "data-action": `slide-prev:${key}:${total}` }, "←"));
  }
  if (total > 0) {
    children.push(h("a", { class: "event-link", "data-action": `event:${item.events[index]}` },
                    item.events[index]));
  }
  if (total > 1) {
    children.push(h("button", { class: "arrow", "data-action": `slide-next:${key}:${total}` }, "→"));
    children.push(h("span", { class: "slide-pos" }, `${index + 1}/${total}`));
  }
  if (item.n_members !== null) {
    children.push(h("span", { class: "members" }, `${item.n_members} member(s)`));
  }
  if (attrs) children.push(h("span", { class: "attrs" }, attrs));
  return h("div", { class: "item", "data-item": key }, ...children);
}

export function renderDebugPanel(node: TraceNode, state: TraceViewState): VNode | null {
  if (!state.devMode) return null;
  const rows = node.detail.events;
  if (node.op === "RETRIEVE" && rows && rows.length) {
    return h("table", { class: "debug" },
      h("tr", {}, h("th", {}, "event"), h("th", {}, "sparse"), h("th", {}, "classifier"),
        h("th", {}, "decision"), h("th", {}, "retained")),
      ...rows.map((r) => h("tr", { class: "debug-row" },
        h("td", {}, r.event),
        h("td", {}, r.sparse.toFixed(4)),
        h("td", {}, r.classifier === null ? "-" : r.classifier.toFixed(4)),
        h("td", {}, r.path),
        h("td", {}, r.retained ? "yes" : "no"))));
  }
  const extracted = node.detail.extracted;
  if (node.op === "EXTRACT" && extracted && extracted.length) {
    return h("table", { class: "debug" },
      h("tr", {}, h("th", {}, "events"), h("th", {}, "extracted pairs")),
      ...extracted.map((row) => h("tr", { class: "debug-row" },
        h("td", {}, row.events.join(", ")),
        h("td", {}, Object.entries(row.pairs).map(([k, v]) => `${k}=${v ?? "null"}`).join(", ")))));
  }
  return null;
}

export function renderTraceNode(node: TraceNode, state: TraceViewState): VNode {
  const open = isExpanded(state, node.id);
  const hasSteps = node.children.length > 0;
  const header = h("div", { class: "node-header", "data-action": `toggle:${node.id}` },
    h("span", { class: "twist" }, hasSteps ? (open ? "▼" : "▶") : "•"),
    h("span", { class: "op" }, node.op),
    node.sub_question ? h("span", { class: "sub-question" }, node.sub_question) : null,
    h("span", { class: "size" }, `${node.n_out} result(s)`),
    node.detail.error ? h("span", { class: "node-error" }, node.detail.error.cause) : null);
  const items = h("div", { class: "items" },
    ...node.preview.map((item, i) => renderItemSlideshow(item, slideKey(node.id, i), state)));
  const debug = renderDebugPanel(node, state);
  const steps = open && hasSteps
    ? h("div", { class: "steps" }, ...node.children.map((c) => renderTraceNode(c, state)))
    : null;
  return h("div", { class: "node", "data-node": node.id }, header, items, debug, steps);
}

export function renderAskView(doc: AskResponse, state: TraceViewState): VNode {
  return h("div", { class: "ask-view" },
    h("div", { class: "answer" }, h("span", { class: "answer-label" }, "Answer"),
      h("span", { class: "answer-value" }, doc.answer)),
    renderTraceNode(doc.trace, state),
    h("details", { class: "plan" }, h("summary", {}, "plan"), h("pre", {}, doc.plan)));
}

export function renderFailureView(doc: AskFailure, state: TraceViewState): VNode {
  return h("div", { class: "ask-view" },
    h("div", { class: "banner error" }, doc.error),
    doc.trace ? renderTraceNode(doc.trace, state) : h("div", { class: "empty" }, "no trace"),
    doc.plan ? h("details", { class: "plan" }, h("summary", {}, "plan"), h("pre", {}, doc.plan))
             : null);
}

export function renderEventBrowser(page: EventsPage | null, query: string): VNode {
  if (page === null || page.events.length === 0) {
    return h("div", { class: "browser" },
      h("div", { class: "empty" }, page === null ? "pick a persona" : "no matching events"));
  }
  const pages = Math.max(1, Math.ceil(page.total / page.page_size));
  return h("div", { class: "browser" },
    h("table", { class: "events" },
      h("tr", {}, h("th", {}, "id"), h("th", {}, "source"), h("th", {}, "when"),
        h("th", {}, "summary")),
      ...page.events.map((e) => h("tr", { class: "event-row", id: `event-${e.id}` },
        h("td", {}, e.id),
        h("td", {}, e.source),
        h("td", {}, e.start === e.end ? e.start : `${e.start} → ${e.end}`),
        h("td", {}, summarize(e.fields, e.text))))),
    h("div", { class: "pager" },
      h("button", { "data-action": `page:${page.page - 1}`, disabled: page.page <= 1 ? "1" : "" },
        "prev"),
      h("span", {}, `page ${page.page}/${pages} (${page.total} events${query ? ` for "${query}"` : ""})`),
      h("button", { "data-action": `page:${page.page + 1}`, disabled: page.page >= pages ? "1" : "" },
        "next")));
}

function summarize(fields: Record<string, unknown>, text?: string): string {
  const parts = Object.entries(fields).map(([k, v]) => `${k}: ${String(v)}`);
  if (text) parts.push(text);
  return parts.join(" | ");
}
