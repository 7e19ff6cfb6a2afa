/** Typed client for the session HTTP API. The server is the single source
 * of truth; this module does no belief math, only transport. */

export interface AgentPayload {
  id: number;
  u: number;
  p: number;
}

export interface InstancePayload {
  agents: AgentPayload[];
  B: number;
  G: number;
}

export interface HistoryEntry {
  pool: number[];
  result: "neg" | "pos";
}

export interface SessionState {
  id: string;
  instance: InstancePayload;
  history: HistoryEntry[];
  marginals: number[];
  confirmed_healthy: number[];
  confirmed_infected: number[];
  welfare_so_far: number;
  remaining_budget: number;
  newly_confirmed_healthy?: number[];
  newly_confirmed_infected?: number[];
}

export interface Recommendation {
  pool: number[];
  value: number;
}

/** Server-reported failure: HTTP status plus the {code, message} body. */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    // non-JSON body: fall through to the status check
  }
  if (!resp.ok) {
    const err = (body ?? {}) as { code?: string; message?: string };
    throw new ApiError(resp.status, err.code ?? "http_error",
      err.message ?? `request failed with status ${resp.status}`);
  }
  return body as T;
}

export class SessionApi {
  constructor(private baseUrl = "") {}

  createSession(instance: InstancePayload): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(instance),
    });
  }

  getSession(id: string): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions/${id}`);
  }

  getRecommendation(id: string): Promise<Recommendation> {
    return request(`${this.baseUrl}/sessions/${id}/recommendation`);
  }

  postOutcome(id: string, pool: number[], result: "neg" | "pos"): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions/${id}/outcomes`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ pool, result }),
    });
  }
}
