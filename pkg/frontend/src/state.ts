// Draft state for one classification request. The rules live here, away from
// the DOM, so they can be tested directly:
//   - an image is always required
//   - a body-map region is required exactly when the served model uses one
//   - a failed submit must not clear anything the user picked

import type { BodyMapRegion, Prediction } from "./api.js";

export type SubmitPhase = "editing" | "submitting" | "done";

export interface CaseDraft {
  image: Blob | null;
  region: BodyMapRegion | null;
  usesLocation: boolean;
  phase: SubmitPhase;
  result: Prediction | null;
  error: string | null;
}

export function newDraft(usesLocation: boolean): CaseDraft {
  return {
    image: null,
    region: null,
    usesLocation,
    phase: "editing",
    result: null,
    error: null,
  };
}

export function withImage(draft: CaseDraft, image: Blob): CaseDraft {
  return { ...draft, image, phase: "editing", result: null, error: null };
}

export function withRegion(draft: CaseDraft, region: BodyMapRegion | null): CaseDraft {
  return { ...draft, region, phase: "editing", result: null, error: null };
}

/** What still blocks a submit, or null when the draft is ready. */
export function blockedReason(draft: CaseDraft): string | null {
  if (draft.phase === "submitting") return "a request is already in flight";
  if (!draft.image) return "choose a wound image";
  if (draft.usesLocation && !draft.region) return "pick the wound's body-map region";
  return null;
}

export function canSubmit(draft: CaseDraft): boolean {
  return blockedReason(draft) === null;
}

export function beginSubmit(draft: CaseDraft): CaseDraft {
  return { ...draft, phase: "submitting", error: null };
}

export function submitSucceeded(draft: CaseDraft, result: Prediction): CaseDraft {
  return { ...draft, phase: "done", result, error: null };
}

/** Keep the image and region so the user can retry after a failure. */
export function submitFailed(draft: CaseDraft, message: string): CaseDraft {
  return { ...draft, phase: "editing", result: null, error: message };
}
