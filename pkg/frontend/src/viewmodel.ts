/** Pure view state for trace exploration; every transition returns a new
 * state so rendering stays a pure function of (response, state). */

import type { TraceNode } from "./api.js";

export interface TraceViewState {
  /** node ids whose decomposition (children) is unfolded */
  expanded: ReadonlySet<string>;
  /** current slide per multi-constituent item, keyed by nodeId:itemIndex */
  slides: Readonly<Record<string, number>>;
  devMode: boolean;
}

export function initialState(): TraceViewState {
  // everything starts collapsed: the answer, the first operator and its
  // items are visible, decomposition steps unfold on click
  return { expanded: new Set(), slides: {}, devMode: false };
}

export function isExpanded(state: TraceViewState, nodeId: string): boolean {
  return state.expanded.has(nodeId);
}

export function toggleNode(state: TraceViewState, nodeId: string): TraceViewState {
  const expanded = new Set(state.expanded);
  if (expanded.has(nodeId)) {
    expanded.delete(nodeId);
  } else {
    expanded.add(nodeId);
  }
  return { ...state, expanded };
}

export function expandAll(state: TraceViewState, trace: TraceNode): TraceViewState {
  const expanded = new Set(state.expanded);
  const walk = (node: TraceNode) => {
    expanded.add(node.id);
    node.children.forEach(walk);
  };
  walk(trace);
  return { ...state, expanded };
}

export function slideKey(nodeId: string, itemIndex: number): string {
  return `${nodeId}:${itemIndex}`;
}

export function slideIndex(state: TraceViewState, key: string): number {
  return state.slides[key] ?? 0;
}

function moveSlide(state: TraceViewState, key: string, total: number,
                   step: number): TraceViewState {
  if (total < 1) return state;
  const current = slideIndex(state, key);
  const next = ((current + step) % total + total) % total; // wraps both ways
  return { ...state, slides: { ...state.slides, [key]: next } };
}

export function nextSlide(state: TraceViewState, key: string, total: number): TraceViewState {
  return moveSlide(state, key, total, 1);
}

export function prevSlide(state: TraceViewState, key: string, total: number): TraceViewState {
  return moveSlide(state, key, total, -1);
}

export function toggleDevMode(state: TraceViewState): TraceViewState {
  return { ...state, devMode: !state.devMode };
}

/** Operators visible under the current expansion: a node's children appear
 * only once the node itself is unfolded. */
export function visibleOps(trace: TraceNode, state: TraceViewState): string[] {
  const out: string[] = [];
  const walk = (node: TraceNode) => {
    out.push(node.op);
    if (isExpanded(state, node.id)) node.children.forEach(walk);
  };
  walk(trace);
  return out;
}
