// Session orchestrator: holds only what the service last said, renders it,
// and maps every user action 1:1 onto a documented endpoint call. Polling
// keeps the suggestion panel fresh; the pace is human, so plain
// request/response suffices.

import { ServiceClient, ServiceError } from "./api";
import { budgetMeter, probabilityGauge } from "./gauges";
import { eventTable, revealedTimeline } from "./history";
import { suggestionList } from "./suggestions";
import type { Finalization, SchemaDoc, SessionEvent, Suggestion } from "./types";

export interface ViewState {
  sessionId: string;
  budgetTotal: number;
  probabilities: number[];
  remainingBudget: number;
  revealed: string[];
  suggestion: Suggestion | null;
  finalization: Finalization | null;
  events: SessionEvent[];
}

export interface ViewError {
  code: string;
  message: string;
  retry: (() => void) | null;
}

/** Pure renderer: the DOM is a function of the last server responses. */
export function renderView(
  state: ViewState,
  handlers: {
    onObserve: (feature: string, raw: string) => void;
    onUnavailable: (feature: string) => void;
    onStop: () => void;
    onTab: (tab: "session" | "analytics") => void;
  },
  tab: "session" | "analytics" = "session",
): HTMLElement {
  const root = document.createElement("div");
  root.className = "session-view";

  const tabs = document.createElement("nav");
  tabs.className = "tabs";
  for (const name of ["session", "analytics"] as const) {
    const button = document.createElement("button");
    button.className = tab === name ? "tab active" : "tab";
    button.textContent = name;
    button.addEventListener("click", () => handlers.onTab(name));
    tabs.appendChild(button);
  }
  root.appendChild(tabs);

  const banner = document.createElement("div");
  banner.className = "error-banner";
  banner.hidden = true;
  root.appendChild(banner);

  if (tab === "analytics") {
    root.appendChild(eventTable(state.events));
    return root;
  }

  root.appendChild(probabilityGauge(state.probabilities));
  root.appendChild(budgetMeter(state.remainingBudget, state.budgetTotal));
  root.appendChild(revealedTimeline(state.revealed));

  if (state.finalization) {
    const done = document.createElement("div");
    done.className = "finalized";
    done.textContent =
      `predicted class ${state.finalization.predicted_class} · ` +
      `total cost ${state.finalization.total_cost}`;
    root.appendChild(done);
  } else if (state.suggestion) {
    root.appendChild(suggestionList(state.suggestion, handlers));
  }
  return root;
}

export class SessionView {
  state: ViewState;
  tab: "session" | "analytics" = "session";
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    readonly client: ServiceClient,
    readonly schema: SchemaDoc,
    readonly container: HTMLElement,
    sessionId: string,
    probabilities: number[],
    remainingBudget: number,
    readonly pollMs = 0,
  ) {
    this.state = {
      sessionId,
      budgetTotal: remainingBudget,
      probabilities,
      remainingBudget,
      revealed: schema.features.filter((f) => f.cost === 0).map((f) => f.name),
      suggestion: null,
      finalization: null,
      events: [],
    };
  }

  async start(): Promise<void> {
    await this.refresh();
    if (this.pollMs > 0) {
      this.timer = setInterval(() => void this.refresh(), this.pollMs);
    }
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  render(): void {
    this.container.replaceChildren(
      renderView(
        this.state,
        {
          onObserve: (feature, raw) => void this.observe(feature, raw),
          onUnavailable: (feature) => void this.markUnavailable(feature),
          onStop: () => void this.finalize(),
          onTab: (tab) => {
            this.tab = tab;
            this.render();
          },
        },
        this.tab,
      ),
    );
  }

  /** Show an error without re-rendering, so typed values are not lost. */
  showError(error: ViewError): void {
    const banner = this.container.querySelector<HTMLElement>(".error-banner");
    if (!banner) return;
    banner.hidden = false;
    banner.replaceChildren();
    const text = document.createElement("span");
    text.textContent = `${error.code}: ${error.message}`;
    banner.appendChild(text);
    if (error.retry) {
      const retry = document.createElement("button");
      retry.className = "retry-button";
      retry.textContent = "Retry";
      retry.addEventListener("click", error.retry);
      banner.appendChild(retry);
    }
  }

  private async guarded(call: () => Promise<void>, retry: (() => void) | null): Promise<void> {
    try {
      await call();
    } catch (error) {
      if (error instanceof ServiceError) {
        this.showError({ code: error.code, message: error.message, retry: null });
      } else {
        this.showError({ code: "NETWORK", message: String(error), retry });
      }
    }
  }

  async refresh(): Promise<void> {
    await this.guarded(async () => {
      if (!this.state.finalization) {
        this.state.suggestion = await this.client.suggestion(this.state.sessionId);
        this.state.probabilities = this.state.suggestion.probabilities;
        this.state.remainingBudget = this.state.suggestion.remaining_budget;
      }
      this.state.events = (await this.client.log(this.state.sessionId)).events;
      this.render();
    }, () => void this.refresh());
  }

  parseValue(feature: string, raw: string): unknown {
    const action = this.schema.actions.find((a) => a.name === feature);
    const members = action ? action.features : [feature];
    const parseOne = (name: string, text: string): unknown => {
      const spec = this.schema.features.find((f) => f.name === name);
      if (!spec) throw new Error(`unknown feature ${name}`);
      if (spec.modality === "numeric") return Number(text);
      return text.split(",").map((v) => Number(v.trim()));
    };
    if (members.length === 1) return parseOne(members[0], raw);
    const parts = raw.split(";");
    const value: Record<string, unknown> = {};
    members.forEach((name, i) => {
      value[name] = parseOne(name, parts[i] ?? "");
    });
    return value;
  }

  async observe(feature: string, raw: string): Promise<void> {
    await this.guarded(async () => {
      const result = await this.client.observe(this.state.sessionId, feature, this.parseValue(feature, raw));
      this.state.probabilities = result.probabilities;
      this.state.remainingBudget = result.remaining_budget;
      this.state.revealed = result.revealed;
      await this.refreshAfterChange();
    }, () => void this.observe(feature, raw));
  }

  async markUnavailable(feature: string): Promise<void> {
    await this.guarded(async () => {
      const result = await this.client.markUnavailable(this.state.sessionId, feature);
      this.state.remainingBudget = result.remaining_budget;
      this.state.revealed = result.revealed;
      await this.refreshAfterChange();
    }, () => void this.markUnavailable(feature));
  }

  async finalize(): Promise<void> {
    await this.guarded(async () => {
      this.state.finalization = await this.client.finalize(this.state.sessionId);
      this.state.probabilities = this.state.finalization.probabilities;
      this.stopPolling();
      this.state.events = (await this.client.log(this.state.sessionId)).events;
      this.render();
    }, () => void this.finalize());
  }

  private async refreshAfterChange(): Promise<void> {
    this.state.suggestion = await this.client.suggestion(this.state.sessionId);
    this.state.events = (await this.client.log(this.state.sessionId)).events;
    this.render();
  }
}
