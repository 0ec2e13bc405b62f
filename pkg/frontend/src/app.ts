// App shell: loads model info and the body map, then drives one CaseDraft
// through pick-image -> pick-region -> submit -> result. Everything renders
// into the #app element; state changes trigger a full re-render.

import { ApiClient, type BodyMapRegion } from "./api.js";
import { renderPanel, searchRegions } from "./bodymap.js";
import {
  beginSubmit,
  canSubmit,
  newDraft,
  submitFailed,
  submitSucceeded,
  withImage,
  withRegion,
  type CaseDraft,
} from "./state.js";
import { renderError, renderPrediction, renderSubmitRow } from "./view.js";

export interface AppHandle {
  /** Current draft, exposed for tests. */
  draft(): CaseDraft;
  submit(): Promise<void>;
  pickRegion(code: number): void;
}

export async function startApp(doc: Document, client: ApiClient): Promise<AppHandle> {
  const root = doc.getElementById("app");
  if (!root) throw new Error("missing #app element");

  const health = await client.health();
  const regionList = await client.bodyMap();
  const regionsByCode = new Map<number, BodyMapRegion>(regionList.map((r) => [r.code, r]));

  let draft = newDraft(health.uses_location);
  let searchQuery = "";

  function update(next: CaseDraft): void {
    draft = next;
    render();
  }

  function pickRegion(code: number): void {
    const region = regionsByCode.get(code);
    if (!region) return;
    update(withRegion(draft, region));
  }

  async function submit(): Promise<void> {
    if (!canSubmit(draft)) return;
    const image = draft.image as Blob;
    const code = draft.usesLocation && draft.region ? draft.region.code : null;
    update(beginSubmit(draft));
    try {
      const prediction = await client.predict(image, code);
      update(submitSucceeded(draft, prediction));
    } catch (err) {
      update(submitFailed(draft, err instanceof Error ? err.message : String(err)));
    }
  }

  function render(): void {
    root!.replaceChildren();

    const title = doc.createElement("h1");
    title.textContent = "Wound classifier";
    root!.appendChild(title);

    const modelLine = doc.createElement("p");
    modelLine.className = "model-line";
    modelLine.textContent = health.uses_location
      ? `Model classes: ${health.classes.join(", ")} — image + body-map location`
      : `Model classes: ${health.classes.join(", ")} — image only`;
    root!.appendChild(modelLine);

    if (draft.error) root!.appendChild(renderError(doc, draft.error));

    // image picker
    const imageRow = doc.createElement("div");
    imageRow.className = "image-row";
    const fileInput = doc.createElement("input");
    fileInput.type = "file";
    fileInput.id = "image-input";
    fileInput.accept = "image/*";
    fileInput.addEventListener("change", () => {
      const file = fileInput.files && fileInput.files[0];
      if (file) update(withImage(draft, file));
    });
    imageRow.appendChild(fileInput);
    if (draft.image) {
      const ok = doc.createElement("span");
      ok.className = "image-ok";
      ok.textContent = "image ready";
      imageRow.appendChild(ok);
    }
    root!.appendChild(imageRow);

    // body map, only when the model consumes a location
    if (health.uses_location) {
      const picker = doc.createElement("section");
      picker.className = "region-picker";

      const chosen = doc.createElement("p");
      chosen.id = "chosen-region";
      chosen.textContent = draft.region
        ? `Region: ${draft.region.name} (code ${draft.region.code})`
        : "Region: none selected";
      picker.appendChild(chosen);

      const selectedCode = draft.region ? draft.region.code : null;
      picker.appendChild(renderPanel(doc, "front", regionsByCode, selectedCode, pickRegion));
      picker.appendChild(renderPanel(doc, "back", regionsByCode, selectedCode, pickRegion));

      // search fallback covers every registry code, not just the drawn pins
      const search = doc.createElement("input");
      search.type = "search";
      search.id = "region-search";
      search.placeholder = "search regions by name or code";
      search.value = searchQuery;
      search.addEventListener("input", () => {
        searchQuery = search.value;
        render();
      });
      picker.appendChild(search);

      const hits = doc.createElement("ul");
      hits.id = "region-hits";
      for (const region of searchRegions(regionList, searchQuery)) {
        const item = doc.createElement("li");
        const pick = doc.createElement("button");
        pick.type = "button";
        pick.dataset.code = String(region.code);
        pick.textContent = `${region.name} (${region.code})`;
        pick.addEventListener("click", () => pickRegion(region.code));
        item.appendChild(pick);
        hits.appendChild(item);
      }
      picker.appendChild(hits);
      root!.appendChild(picker);
    }

    root!.appendChild(renderSubmitRow(doc, draft, () => void submit()));

    if (draft.result) root!.appendChild(renderPrediction(doc, draft.result));

    const focusSearch = doc.getElementById("region-search");
    if (focusSearch instanceof HTMLInputElement && searchQuery) {
      focusSearch.focus();
      focusSearch.setSelectionRange(searchQuery.length, searchQuery.length);
    }
  }

  render();
  return { draft: () => draft, submit, pickRegion };
}
