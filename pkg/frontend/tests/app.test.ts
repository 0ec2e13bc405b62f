// @vitest-environment jsdom
// End-to-end flows against a mocked service: pick a region on the body map,
// submit, and render the result — plus the gating and failure paths.

import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient, type FetchLike } from "../src/api.js";
import { startApp, type AppHandle } from "../src/app.js";

const REGIONS = [
  { code: 135, name: "Right Fifth Toe Tip", side: "right", view: "front" },
  { code: 150, name: "Right Lateral Heel", side: "right", view: "back" },
  { code: 158, name: "Right Medial Malleolus", side: "right", view: "front" },
  { code: 178, name: "Left Medial Malleolus", side: "left", view: "front" },
  { code: 202, name: "Left Fifth Toe Tip", side: "left", view: "front" },
  { code: 300, name: "Body Region 300", side: "left", view: "back" },
];

const PREDICTION = {
  predicted_class: "V",
  probabilities: { BG: 0.01, N: 0.02, D: 0.1, P: 0.07, S: 0.05, V: 0.75 },
  model_id: "demo",
  location: { code: 135, name: "Right Fifth Toe Tip" },
};

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

interface MockService {
  fetchFn: FetchLike;
  predictCalls: FormData[];
  predictResponse: () => Response;
}

function mockService(usesLocation: boolean): MockService {
  const service: MockService = {
    predictCalls: [],
    predictResponse: () => jsonResponse(PREDICTION),
    fetchFn: async (url, init) => {
      if (url.endsWith("/api/v1/health")) {
        return jsonResponse({
          status: "ok",
          classes: ["BG", "N", "D", "P", "S", "V"],
          uses_location: usesLocation,
          input_size: 256,
        });
      }
      if (url.endsWith("/api/v1/bodymap")) {
        return jsonResponse({ regions: REGIONS });
      }
      if (url.endsWith("/api/v1/predict")) {
        service.predictCalls.push(init?.body as FormData);
        return service.predictResponse();
      }
      throw new Error(`unexpected url ${url}`);
    },
  };
  return service;
}

function attachImage(file: File): void {
  const input = document.getElementById("image-input") as HTMLInputElement;
  Object.defineProperty(input, "files", {
    value: { 0: file, length: 1, item: (i: number) => (i === 0 ? file : null) },
    configurable: true,
  });
  input.dispatchEvent(new Event("change"));
}

function submitButton(): HTMLButtonElement {
  return document.getElementById("submit") as HTMLButtonElement;
}

const woundImage = new File([new Uint8Array([137, 80, 78, 71])], "wound.png", { type: "image/png" });

describe("location-aware model", () => {
  let service: MockService;
  let app: AppHandle;

  beforeEach(async () => {
    document.body.innerHTML = '<main id="app"></main>';
    service = mockService(true);
    app = await startApp(document, new ApiClient("", service.fetchFn));
  });

  it("blocks submit until both an image and a region are chosen", () => {
    expect(submitButton().disabled).toBe(true);

    attachImage(woundImage);
    expect(submitButton().disabled).toBe(true); // image alone is not enough

    const toe = document.querySelector('circle[data-code="135"]') as SVGCircleElement;
    toe.dispatchEvent(new Event("click"));
    expect(submitButton().disabled).toBe(false);
  });

  it("selecting Right Fifth Toe Tip submits location_code=135", async () => {
    attachImage(woundImage);
    const toe = document.querySelector('circle[data-code="135"]') as SVGCircleElement;
    toe.dispatchEvent(new Event("click"));
    expect(document.getElementById("chosen-region")!.textContent).toContain("Right Fifth Toe Tip");

    await app.submit();

    expect(service.predictCalls).toHaveLength(1);
    const form = service.predictCalls[0];
    expect(form.get("location_code")).toBe("135");
    expect(form.get("image")).toBeInstanceOf(Blob);
  });

  it("renders the probability bars with the argmax highlighted on a 200", async () => {
    attachImage(woundImage);
    app.pickRegion(135);
    await app.submit();

    const bars = document.querySelectorAll(".probability-bar");
    expect(bars).toHaveLength(6);
    const highlighted = document.querySelectorAll(".probability-bar.argmax");
    expect(highlighted).toHaveLength(1);
    expect((highlighted[0] as HTMLElement).dataset.class).toBe("V");
    expect(document.querySelector(".result-heading")!.textContent).toBe("Predicted: V");
  });

  it("finds regions through the search fallback", () => {
    const search = document.getElementById("region-search") as HTMLInputElement;
    search.value = "heel";
    search.dispatchEvent(new Event("input"));

    const hit = document.querySelector('#region-hits button[data-code="150"]') as HTMLButtonElement;
    expect(hit.textContent).toContain("Right Lateral Heel");
    hit.dispatchEvent(new Event("click"));
    expect(document.getElementById("chosen-region")!.textContent).toContain("Right Lateral Heel");
  });

  it("keeps the draft and shows the error when the service rejects", async () => {
    attachImage(woundImage);
    app.pickRegion(135);
    service.predictResponse = () => jsonResponse({ detail: "unknown body-map code 135" }, 400);

    await app.submit();

    expect(document.querySelector(".error-banner")!.textContent).toBe("unknown body-map code 135");
    expect(app.draft().image).not.toBeNull();
    expect(app.draft().region?.code).toBe(135);
    expect(submitButton().disabled).toBe(false); // retry stays available
  });
});

describe("image-only model", () => {
  let service: MockService;
  let app: AppHandle;

  beforeEach(async () => {
    document.body.innerHTML = '<main id="app"></main>';
    service = mockService(false);
    app = await startApp(document, new ApiClient("", service.fetchFn));
  });

  it("never renders the region picker", () => {
    expect(document.querySelector(".region-picker")).toBeNull();
    expect(document.querySelector("circle")).toBeNull();
  });

  it("submits with the image alone and no location_code field", async () => {
    attachImage(woundImage);
    expect(submitButton().disabled).toBe(false);

    await app.submit();

    expect(service.predictCalls).toHaveLength(1);
    expect(service.predictCalls[0].has("location_code")).toBe(false);
  });
});

describe("startup", () => {
  it("fails loudly when the #app mount is missing", async () => {
    document.body.innerHTML = "<div></div>";
    const service = mockService(true);
    await expect(startApp(document, new ApiClient("", service.fetchFn))).rejects.toThrow(/#app/);
  });

  it("asks the service for health and the body map exactly once", async () => {
    document.body.innerHTML = '<main id="app"></main>';
    const service = mockService(true);
    const spy = vi.fn(service.fetchFn);
    await startApp(document, new ApiClient("", spy));
    const urls = spy.mock.calls.map((c) => c[0]);
    expect(urls.filter((u) => u.endsWith("/health"))).toHaveLength(1);
    expect(urls.filter((u) => u.endsWith("/bodymap"))).toHaveLength(1);
  });
});
