// DOM for the classification form and the result card. Pure functions from
// state to elements — the app shell re-renders on every state change.

import type { Prediction } from "./api.js";
import { blockedReason, type CaseDraft } from "./state.js";

/** The class with the highest probability; ties go to the first key. */
export function argmaxClass(probabilities: Record<string, number>): string {
  let best: string | null = null;
  let bestValue = -Infinity;
  for (const [tag, value] of Object.entries(probabilities)) {
    if (value > bestValue) {
      best = tag;
      bestValue = value;
    }
  }
  if (best === null) throw new Error("empty probability map");
  return best;
}

/**
 * Horizontal probability bars, one per class, highest first. Values are
 * displayed exactly as the service reported them — no renormalizing.
 */
export function renderPrediction(doc: Document, prediction: Prediction): HTMLElement {
  const card = doc.createElement("section");
  card.className = "result-card";

  const top = argmaxClass(prediction.probabilities);
  const heading = doc.createElement("h2");
  heading.textContent = `Predicted: ${top}`;
  heading.className = "result-heading";
  card.appendChild(heading);

  if (prediction.location) {
    const where = doc.createElement("p");
    where.className = "result-location";
    where.textContent = `Location: ${prediction.location.name} (code ${prediction.location.code})`;
    card.appendChild(where);
  }

  const list = doc.createElement("ul");
  list.className = "probability-bars";
  const entries = Object.entries(prediction.probabilities).sort((a, b) => b[1] - a[1]);
  for (const [tag, value] of entries) {
    const item = doc.createElement("li");
    item.dataset.class = tag;
    item.className = tag === top ? "probability-bar argmax" : "probability-bar";

    const label = doc.createElement("span");
    label.className = "bar-label";
    label.textContent = tag;

    const track = doc.createElement("span");
    track.className = "bar-track";
    const fill = doc.createElement("span");
    fill.className = "bar-fill";
    fill.style.width = `${(value * 100).toFixed(1)}%`;
    track.appendChild(fill);

    const amount = doc.createElement("span");
    amount.className = "bar-value";
    amount.textContent = `${(value * 100).toFixed(1)}%`;

    item.append(label, track, amount);
    list.appendChild(item);
  }
  card.appendChild(list);
  return card;
}

/** Submit button plus the one-line reason it is disabled, when it is. */
export function renderSubmitRow(doc: Document, draft: CaseDraft, onSubmit: () => void): HTMLElement {
  const row = doc.createElement("div");
  row.className = "submit-row";

  const button = doc.createElement("button");
  button.id = "submit";
  button.type = "button";
  button.textContent = draft.phase === "submitting" ? "Classifying…" : "Classify wound";
  const reason = blockedReason(draft);
  button.disabled = reason !== null;
  button.addEventListener("click", onSubmit);
  row.appendChild(button);

  if (reason !== null && draft.phase !== "submitting") {
    const hint = doc.createElement("span");
    hint.className = "submit-hint";
    hint.textContent = reason;
    row.appendChild(hint);
  }
  return row;
}

export function renderError(doc: Document, message: string): HTMLElement {
  const banner = doc.createElement("div");
  banner.className = "error-banner";
  banner.setAttribute("role", "alert");
  banner.textContent = message;
  return banner;
}
