// Revealed-feature timeline and the read-only analytics table of session
// events, both rendered from server payloads only.

import type { SessionEvent } from "./types";

export function revealedTimeline(revealed: string[]): HTMLElement {
  const line = document.createElement("ol");
  line.className = "timeline";
  for (const name of revealed) {
    const item = document.createElement("li");
    item.textContent = name;
    line.appendChild(item);
  }
  return line;
}

export function eventTable(events: SessionEvent[]): HTMLElement {
  const table = document.createElement("table");
  table.className = "event-table";
  const head = document.createElement("tr");
  for (const column of ["#", "type", "detail"]) {
    const th = document.createElement("th");
    th.textContent = column;
    head.appendChild(th);
  }
  table.appendChild(head);
  events.forEach((event, i) => {
    const row = document.createElement("tr");
    const detail = Object.entries(event)
      .filter(([k]) => k !== "type" && k !== "ts")
      .map(([k, v]) => `${k}=${JSON.stringify(v)}`)
      .join(" ");
    for (const text of [String(i), event.type, detail]) {
      const td = document.createElement("td");
      td.textContent = text;
      row.appendChild(td);
    }
    table.appendChild(row);
  });
  return table;
}
