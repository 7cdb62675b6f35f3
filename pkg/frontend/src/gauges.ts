// Probability gauge and budget meter. Pure DOM builders: values shown come
// straight from the last service response.

export function probabilityGauge(probabilities: number[]): HTMLElement {
  const gauge = document.createElement("div");
  gauge.className = "prob-gauge";
  gauge.setAttribute("role", "group");
  gauge.setAttribute("aria-label", "prediction confidence");
  probabilities.forEach((p, cls) => {
    const row = document.createElement("div");
    row.className = "prob-row";

    const label = document.createElement("span");
    label.className = "prob-label";
    label.textContent = `class ${cls}`;

    const track = document.createElement("div");
    track.className = "prob-track";
    const fill = document.createElement("div");
    fill.className = "prob-fill";
    fill.style.width = `${(p * 100).toFixed(1)}%`;
    track.appendChild(fill);

    const value = document.createElement("span");
    value.className = "prob-value";
    value.textContent = `${(p * 100).toFixed(1)}%`;

    row.append(label, track, value);
    gauge.appendChild(row);
  });
  return gauge;
}

export function budgetMeter(remaining: number, total: number): HTMLElement {
  const meter = document.createElement("div");
  meter.className = "budget-meter";
  const fraction = total > 0 ? Math.max(0, Math.min(1, remaining / total)) : 0;

  const track = document.createElement("div");
  track.className = "budget-track";
  const fill = document.createElement("div");
  fill.className = "budget-fill";
  fill.style.width = `${(fraction * 100).toFixed(1)}%`;
  track.appendChild(fill);

  const text = document.createElement("span");
  text.className = "budget-text";
  text.textContent = `budget ${remaining} / ${total}`;

  meter.append(track, text);
  return meter;
}
