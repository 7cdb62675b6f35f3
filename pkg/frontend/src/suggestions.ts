// Ranked suggestion cards plus the stop-and-predict card. When the service
// flags stop as recommended, the stop card is promoted above all test cards.
// Every control is a real <button> or <input>, so the whole decision loop is
// keyboard operable.

import type { Suggestion, SuggestionItem } from "./types";

export interface SuggestionHandlers {
  onObserve: (feature: string, raw: string) => void;
  onUnavailable: (feature: string) => void;
  onStop: () => void;
}

function stopCard(promoted: boolean, onStop: () => void): HTMLElement {
  const card = document.createElement("div");
  card.className = promoted ? "card stop-card promoted" : "card stop-card";
  const title = document.createElement("div");
  title.className = "card-title";
  title.textContent = promoted ? "Stop recommended" : "Stop and predict";
  const button = document.createElement("button");
  button.className = "stop-button";
  button.textContent = "Finalize prediction";
  button.addEventListener("click", onStop);
  card.append(title, button);
  return card;
}

function testCard(item: SuggestionItem, handlers: SuggestionHandlers): HTMLElement {
  const card = document.createElement("div");
  card.className = "card test-card";
  card.dataset.feature = item.feature;

  const title = document.createElement("div");
  title.className = "card-title";
  title.textContent = `#${item.rank} ${item.feature}`;

  const meta = document.createElement("div");
  meta.className = "card-meta";
  meta.textContent = `cost ${item.cost} · q ${item.q_value.toFixed(3)}`;

  const input = document.createElement("input");
  input.className = "value-input";
  input.setAttribute("aria-label", `observed value for ${item.feature}`);
  input.placeholder = item.features.length > 1 ? "…values comma separated" : "observed value";

  const observe = document.createElement("button");
  observe.textContent = "Record";
  observe.addEventListener("click", () => handlers.onObserve(item.feature, input.value));

  const unavailable = document.createElement("button");
  unavailable.className = "unavailable-button";
  unavailable.textContent = "Unavailable";
  unavailable.addEventListener("click", () => handlers.onUnavailable(item.feature));

  card.append(title, meta, input, observe, unavailable);
  return card;
}

export function suggestionList(payload: Suggestion, handlers: SuggestionHandlers): HTMLElement {
  const list = document.createElement("div");
  list.className = "suggestion-list";
  const stop = stopCard(payload.stop_recommended, handlers.onStop);
  const cards = payload.suggestions.map((item) => testCard(item, handlers));
  if (payload.stop_recommended) {
    list.append(stop, ...cards);
  } else {
    list.append(...cards, stop);
  }
  return list;
}
