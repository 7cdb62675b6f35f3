import type {
  Finalization,
  ObserveResult,
  SchemaDoc,
  ServiceErrorBody,
  SessionLog,
  SessionState,
  Suggestion,
} from "./types";

export class ServiceError extends Error {
  code: string;
  details: unknown[];

  constructor(body: ServiceErrorBody) {
    super(body.message);
    this.code = body.code;
    this.details = body.details ?? [];
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let body: ServiceErrorBody;
    try {
      body = (await response.json()) as ServiceErrorBody;
    } catch {
      body = { code: "NETWORK", message: `HTTP ${response.status}`, details: [] };
    }
    throw new ServiceError(body);
  }
  return response.json() as Promise<T>;
}

/** Typed client covering exactly the documented service endpoints. */
export class ServiceClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  health(): Promise<{ status: string }> {
    return request(this.url("/health"));
  }

  schema(): Promise<SchemaDoc> {
    return request(this.url("/schema"));
  }

  createSession(features: Record<string, unknown>, budget?: number): Promise<SessionState> {
    return request(this.url("/sessions"), {
      method: "POST",
      body: JSON.stringify(budget === undefined ? { features } : { features, budget }),
    });
  }

  suggestion(sessionId: string, k?: number): Promise<Suggestion> {
    const query = k === undefined ? "" : `?k=${k}`;
    return request(this.url(`/sessions/${sessionId}/suggestion${query}`));
  }

  observe(sessionId: string, feature: string, value: unknown): Promise<ObserveResult> {
    return request(this.url(`/sessions/${sessionId}/observe`), {
      method: "POST",
      body: JSON.stringify({ feature, value }),
    });
  }

  markUnavailable(sessionId: string, feature: string): Promise<ObserveResult> {
    return request(this.url(`/sessions/${sessionId}/observe`), {
      method: "POST",
      body: JSON.stringify({ feature, unavailable: true }),
    });
  }

  finalize(sessionId: string): Promise<Finalization> {
    return request(this.url(`/sessions/${sessionId}/finalize`), { method: "POST" });
  }

  log(sessionId: string): Promise<SessionLog> {
    return request(this.url(`/sessions/${sessionId}/log`));
  }
}
