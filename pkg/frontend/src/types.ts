// Payload shapes mirror the service JSON exactly; the view renders these
// verbatim and performs no inference of its own.

export interface SessionState {
  session_id: string;
  probabilities: number[];
  remaining_budget: number;
  n_valid_actions: number;
}

export interface SuggestionItem {
  feature: string;
  features: string[];
  cost: number;
  q_value: number;
  rank: number;
}

export interface Suggestion {
  suggestions: SuggestionItem[];
  stop_recommended: boolean;
  remaining_budget: number;
  probabilities: number[];
}

export interface ObserveResult {
  probabilities: number[];
  remaining_budget: number;
  revealed: string[];
  acquisition_done: boolean;
}

export interface Finalization {
  probabilities: number[];
  predicted_class: number;
  total_cost: number;
  revealed: string[];
}

export interface FeatureDescriptor {
  name: string;
  modality: "numeric" | "timeseries" | "embedded";
  cost: number;
  slot_width: number;
}

export interface SchemaDoc {
  format_version: number;
  features: FeatureDescriptor[];
  default_budget: number;
  actions: { name: string; features: string[]; cost: number }[];
}

export interface SessionEvent {
  type: string;
  ts: number;
  [key: string]: unknown;
}

export interface SessionLog {
  session_id: string;
  finalized: boolean;
  events: SessionEvent[];
}

export interface ServiceErrorBody {
  code: string;
  message: string;
  details: unknown[];
}
