// Entry point: a small create-session form (free features come from the
// schema endpoint), then the live session view with polling.

import { ServiceClient, ServiceError } from "./api";
import { SessionView } from "./sessionView";

const POLL_MS = 5000;

async function boot(): Promise<void> {
  const app = document.getElementById("app");
  if (!app) throw new Error("missing #app container");
  const base = (document.getElementById("base-url") as HTMLInputElement | null)?.value ?? "";
  const client = new ServiceClient(base);
  const schema = await client.schema();

  const form = document.createElement("form");
  form.className = "create-form";
  const freeFeatures = schema.features.filter((f) => f.cost === 0);
  for (const feature of freeFeatures) {
    const label = document.createElement("label");
    label.textContent = feature.name;
    const input = document.createElement("input");
    input.name = feature.name;
    input.placeholder = feature.modality === "numeric" ? "value" : "v1, v2, …";
    label.appendChild(input);
    form.appendChild(label);
  }
  const budgetLabel = document.createElement("label");
  budgetLabel.textContent = `budget (default ${schema.default_budget})`;
  const budgetInput = document.createElement("input");
  budgetInput.name = "budget";
  budgetLabel.appendChild(budgetInput);
  form.appendChild(budgetLabel);

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "Start consultation";
  form.appendChild(submit);

  const status = document.createElement("div");
  status.className = "form-status";
  form.appendChild(status);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void (async () => {
      const values: Record<string, unknown> = {};
      for (const feature of freeFeatures) {
        const raw = (form.elements.namedItem(feature.name) as HTMLInputElement).value;
        values[feature.name] =
          feature.modality === "numeric" ? Number(raw) : raw.split(",").map((v) => Number(v.trim()));
      }
      const budgetRaw = (form.elements.namedItem("budget") as HTMLInputElement).value;
      try {
        const session = await client.createSession(
          values,
          budgetRaw === "" ? undefined : Number(budgetRaw),
        );
        app.replaceChildren();
        const view = new SessionView(
          client,
          schema,
          app,
          session.session_id,
          session.probabilities,
          session.remaining_budget,
          POLL_MS,
        );
        await view.start();
      } catch (error) {
        status.textContent =
          error instanceof ServiceError ? `${error.code}: ${error.message}` : String(error);
      }
    })();
  });

  app.replaceChildren(form);
}

void boot();
