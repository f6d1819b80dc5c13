/* Typed client for the querylearn JSON API. Thin on purpose: every call maps to
 * one endpoint and returns the server payload as-is, so the UI can never hold
 * state the server does not have. */

export interface DatasetSummary {
  id: string;
  objects: number;
  queries: number;
  object_groups: number;
  query_groups: number;
  has_noise: boolean;
}

export interface DatasetDetail extends DatasetSummary {
  document: Record<string, unknown>;
}

export interface SuggestedQuery {
  query: string;
  prob: number;
}

export interface Suggestion {
  kind: "query" | "query-group";
  cost: number;
  query?: string;
  group?: number;
  queries?: SuggestedQuery[];
}

export interface Step {
  suggestion: Suggestion;
  query: string;
  response: 0 | 1;
  surviving_before: number;
  surviving_after: number;
}

export interface Outcome {
  object?: string;
  group?: number;
}

export interface TopOutcome {
  outcome: Outcome;
  probability: number;
}

export type SessionStatus = "active" | "identified" | "failed";

export interface SessionResource {
  id: string;
  dataset: string;
  strategy: string;
  objective: string;
  status: SessionStatus;
  surviving: number;
  steps: Step[];
  outcome: Outcome | null;
  suggestion: Suggestion | null;
  top_outcomes: TopOutcome[];
}

export interface NoiseChoice {
  model: 1 | 2;
  p?: number;
}

export interface StartRequest {
  dataset: string;
  strategy: string;
  tie_break?: "index" | "random";
  seed?: number;
  noise?: NoiseChoice;
}

export interface Transcript {
  format: string;
  version: number;
  status: SessionStatus;
  outcome: Outcome | null;
  steps: Step[];
  [key: string]: unknown;
}

/** Non-2xx response. `detail` is the server's detail field: a plain message for
 * most errors, and for 422 an object carrying the failed session resource. */
export class ApiError extends Error {
  status: number;
  detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : `request failed with ${status}`);
    this.status = status;
    this.detail = detail;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    let detail: unknown = res.statusText;
    try {
      const body = (await res.json()) as { detail?: unknown };
      if (body && body.detail !== undefined) detail = body.detail;
    } catch {
      /* non-JSON error body; keep the status text */
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

function post<T>(url: string, body: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

export interface Client {
  listDatasets(): Promise<DatasetSummary[]>;
  getDataset(id: string): Promise<DatasetDetail>;
  uploadDataset(doc: Record<string, unknown>): Promise<DatasetSummary>;
  createSession(req: StartRequest): Promise<SessionResource>;
  getSession(id: string): Promise<SessionResource>;
  postAnswer(id: string, query: string, response: 0 | 1): Promise<SessionResource>;
  getTranscript(id: string): Promise<Transcript>;
}

export function makeClient(base = ""): Client {
  const api = (path: string) => `${base}/api${path}`;
  return {
    listDatasets: () => request(api("/datasets")),
    getDataset: (id) => request(api(`/datasets/${id}`)),
    uploadDataset: (doc) => post(api("/datasets"), doc),
    createSession: (req) => post(api("/sessions"), req),
    getSession: (id) => request(api(`/sessions/${id}`)),
    postAnswer: (id, query, response) =>
      post(api(`/sessions/${id}/answers`), { query, response }),
    getTranscript: (id) => request(api(`/sessions/${id}/transcript`)),
  };
}
