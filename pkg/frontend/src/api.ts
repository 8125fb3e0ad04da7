/** Types and fetch wrappers for the backend JSON API. */

export interface PreviewItem {
  events: string[];
  attrs: Record<string, string | null>;
  n_members: number | null;
}

export interface RetrievalRow {
  event: string;
  sparse: number;
  classifier: number | null;
  path: "pattern" | "per-event";
  retained: boolean;
}

export interface ExtractRow {
  events: string[];
  pairs: Record<string, string | null>;
  errors?: Record<string, string>;
}

export interface TraceNode {
  id: string;
  op: string;
  sub_question: string | null;
  n_in: number[];
  n_out: number;
  preview: PreviewItem[];
  detail: {
    query?: string;
    events?: RetrievalRow[];
    merges?: string[][];
    extracted?: ExtractRow[];
    error?: { cause: string; message: string };
    [key: string]: unknown;
  };
  elapsed_ms: number;
  children: TraceNode[];
}

export interface AskRequest {
  question: string;
  persona: string;
  sources?: string[];
  reference_date?: string;
  planner?: "template" | "llm" | "auto";
}

export interface AskResponse {
  answer: string;
  answer_kind: string;
  plan: string;
  trace: TraceNode;
  timings: Record<string, unknown>;
}

export interface AskFailure {
  error: string;
  plan?: string;
  trace?: TraceNode | null;
}

export interface EventRecord {
  id: string;
  persona: string;
  source: string;
  start: string;
  end: string;
  fields: Record<string, unknown>;
  text?: string;
}

export interface EventsPage {
  persona: string;
  total: number;
  page: number;
  page_size: number;
  events: EventRecord[];
}

export interface PersonaSummary {
  name: string;
  counts: Record<string, number>;
  n_events: number;
  date_range?: { start: string; end: string };
}

export interface ServerConfig {
  reference_date: string;
  sources: string[];
  planners: string[];
  llm_enabled: boolean;
  retrieval: Record<string, number>;
}

const base = "";

async function getJson<T>(path: string): Promise<T> {
  const resp = await fetch(base + path);
  if (!resp.ok) throw new Error(`${path}: ${resp.status}`);
  return resp.json() as Promise<T>;
}

export async function fetchPersonas(): Promise<PersonaSummary[]> {
  return getJson("/api/personas");
}

export async function fetchConfig(): Promise<ServerConfig> {
  return getJson("/api/config");
}

export async function fetchEvents(
  persona: string, query: string, page: number, pageSize: number,
): Promise<EventsPage> {
  const params = new URLSearchParams({ persona, page: String(page), page_size: String(pageSize) });
  if (query) params.set("query", query);
  return getJson(`/api/events?${params}`);
}

/** Resolves with either the response or the failure payload (422/500 keep a
 * partial trace worth rendering). */
export async function ask(request: AskRequest): Promise<AskResponse | AskFailure> {
  const resp = await fetch(`${base}/api/ask`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(request),
  });
  return resp.json() as Promise<AskResponse | AskFailure>;
}

export function isFailure(doc: AskResponse | AskFailure): doc is AskFailure {
  return (doc as AskFailure).error !== undefined;
}
