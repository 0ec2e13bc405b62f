import { describe, expect, it } from "vitest";

import type { Prediction } from "../src/api.js";
import {
  beginSubmit,
  blockedReason,
  canSubmit,
  newDraft,
  submitFailed,
  submitSucceeded,
  withImage,
  withRegion,
} from "../src/state.js";

const region = { code: 135, name: "Right Fifth Toe Tip", side: "right", view: "front" };
const image = new Blob([new Uint8Array([1, 2, 3])], { type: "image/png" });

const prediction: Prediction = {
  predicted_class: "V",
  probabilities: { D: 0.2, V: 0.8 },
  model_id: "m",
  location: { code: 135, name: "Right Fifth Toe Tip" },
};

describe("draft gating", () => {
  it("blocks an empty draft on the missing image", () => {
    const draft = newDraft(true);
    expect(canSubmit(draft)).toBe(false);
    expect(blockedReason(draft)).toMatch(/image/);
  });

  it("blocks image-only drafts when the model uses locations", () => {
    const draft = withImage(newDraft(true), image);
    expect(canSubmit(draft)).toBe(false);
    expect(blockedReason(draft)).toMatch(/region/);
  });

  it("allows image-only drafts for image-only models", () => {
    const draft = withImage(newDraft(false), image);
    expect(canSubmit(draft)).toBe(true);
  });

  it("allows image + region when the model uses locations", () => {
    const draft = withRegion(withImage(newDraft(true), image), region);
    expect(canSubmit(draft)).toBe(true);
  });

  it("blocks while a request is in flight", () => {
    const draft = beginSubmit(withRegion(withImage(newDraft(true), image), region));
    expect(canSubmit(draft)).toBe(false);
  });
});

describe("submit outcomes", () => {
  it("stores the prediction on success", () => {
    const ready = withRegion(withImage(newDraft(true), image), region);
    const done = submitSucceeded(beginSubmit(ready), prediction);
    expect(done.phase).toBe("done");
    expect(done.result).toEqual(prediction);
    expect(done.error).toBeNull();
  });

  it("keeps the image and region after a failure", () => {
    const ready = withRegion(withImage(newDraft(true), image), region);
    const failed = submitFailed(beginSubmit(ready), "this model requires a location_code");
    expect(failed.image).toBe(image);
    expect(failed.region).toEqual(region);
    expect(failed.error).toMatch(/location_code/);
    expect(failed.phase).toBe("editing");
    expect(canSubmit(failed)).toBe(true); // retry is immediately possible
  });

  it("clears stale results when the inputs change", () => {
    const ready = withRegion(withImage(newDraft(true), image), region);
    const done = submitSucceeded(beginSubmit(ready), prediction);
    const edited = withRegion(done, { ...region, code: 150, name: "Right Lateral Heel" });
    expect(edited.result).toBeNull();
    expect(edited.phase).toBe("editing");
  });
});
