// In-memory stand-in for the acquisition service: answers the documented
// endpoints from canned state and records every request for interception
// checks.

import type { SchemaDoc, Suggestion } from "../src/types";

export interface RecordedRequest {
  method: string;
  url: string;
  body: unknown;
}

export const SCHEMA: SchemaDoc = {
  format_version: 1,
  features: [
    { name: "age", modality: "numeric", cost: 0, slot_width: 1 },
    { name: "temp", modality: "numeric", cost: 1, slot_width: 1 },
    { name: "lab", modality: "numeric", cost: 3, slot_width: 1 },
    { name: "vitals", modality: "timeseries", cost: 6, slot_width: 4 },
  ],
  default_budget: 10,
  actions: [
    { name: "temp", features: ["temp"], cost: 1 },
    { name: "lab", features: ["lab"], cost: 3 },
    { name: "vitals", features: ["vitals"], cost: 6 },
  ],
};

function jsonResponse(status: number, body: unknown) {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => body,
  };
}

export class MockService {
  requests: RecordedRequest[] = [];
  suggestion: Suggestion = {
    suggestions: [
      { feature: "lab", features: ["lab"], cost: 3, q_value: 0.91, rank: 1 },
      { feature: "temp", features: ["temp"], cost: 1, q_value: 0.42, rank: 2 },
      { feature: "vitals", features: ["vitals"], cost: 6, q_value: 0.1, rank: 3 },
    ],
    stop_recommended: false,
    remaining_budget: 10,
    probabilities: [0.65, 0.35],
  };
  revealed = ["age"];
  events: object[] = [{ type: "created", ts: 1, budget: 10, features: { age: 51 } }];
  finalized = false;
  failNext = false;

  fetch = async (url: string, init?: { method?: string; body?: string }) => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body) : null;
    this.requests.push({ method, url, body });
    if (this.failNext) {
      this.failNext = false;
      throw new TypeError("network down");
    }
    if (url.endsWith("/schema")) return jsonResponse(200, SCHEMA);
    if (url.endsWith("/health")) return jsonResponse(200, { status: "ok" });
    if (url.endsWith("/sessions") && method === "POST") {
      return jsonResponse(200, {
        session_id: "s1",
        probabilities: this.suggestion.probabilities,
        remaining_budget: this.suggestion.remaining_budget,
        n_valid_actions: this.suggestion.suggestions.length + 1,
      });
    }
    if (url.includes("/suggestion")) return jsonResponse(200, this.suggestion);
    if (url.endsWith("/log")) {
      return jsonResponse(200, { session_id: "s1", finalized: this.finalized, events: this.events });
    }
    if (url.endsWith("/observe")) {
      const feature = body.feature as string;
      const action = SCHEMA.actions.find((a) => a.name === feature);
      if (!action) return jsonResponse(404, { code: "NOT_FOUND", message: "no such feature", details: [] });
      if (this.revealed.includes(feature)) {
        return jsonResponse(409, { code: "CONFLICT", message: "already observed", details: [] });
      }
      this.suggestion = {
        ...this.suggestion,
        suggestions: this.suggestion.suggestions.filter((s) => s.feature !== feature),
      };
      if (!body.unavailable) {
        this.suggestion = {
          ...this.suggestion,
          remaining_budget: this.suggestion.remaining_budget - action.cost,
          probabilities: [0.3, 0.7],
        };
        this.revealed = [...this.revealed, feature];
        this.events = [...this.events, { type: "observed", ts: 2, feature, cost: action.cost }];
      } else {
        this.events = [...this.events, { type: "unavailable", ts: 2, feature }];
      }
      return jsonResponse(200, {
        probabilities: this.suggestion.probabilities,
        remaining_budget: this.suggestion.remaining_budget,
        revealed: this.revealed,
        acquisition_done: false,
      });
    }
    if (url.endsWith("/finalize")) {
      this.finalized = true;
      this.events = [...this.events, { type: "finalized", ts: 3 }];
      return jsonResponse(200, {
        probabilities: this.suggestion.probabilities,
        predicted_class: this.suggestion.probabilities[1] > 0.5 ? 1 : 0,
        total_cost: 4,
        revealed: this.revealed,
      });
    }
    return jsonResponse(404, { code: "NOT_FOUND", message: `no route ${url}`, details: [] });
  };
}

export const DOCUMENTED = [
  /^\/health$/,
  /^\/schema$/,
  /^\/sessions$/,
  /^\/sessions\/[^/]+\/suggestion(\?k=\d+)?$/,
  /^\/sessions\/[^/]+\/observe$/,
  /^\/sessions\/[^/]+\/finalize$/,
  /^\/sessions\/[^/]+\/log$/,
];
