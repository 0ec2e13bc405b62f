import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError, type FetchLike } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("ApiClient", () => {
  it("reads health from /api/v1/health", async () => {
    const fetchFn = vi.fn<Parameters<FetchLike>, ReturnType<FetchLike>>(async () =>
      jsonResponse({ status: "ok", classes: ["D", "V"], uses_location: true, input_size: 256 }),
    );
    const client = new ApiClient("http://host:8000", fetchFn);
    const health = await client.health();
    expect(fetchFn).toHaveBeenCalledWith("http://host:8000/api/v1/health");
    expect(health.classes).toEqual(["D", "V"]);
    expect(health.uses_location).toBe(true);
  });

  it("unwraps the regions array from /api/v1/bodymap", async () => {
    const regions = [{ code: 135, name: "Right Fifth Toe Tip", side: "right", view: "front" }];
    const client = new ApiClient("", async () => jsonResponse({ regions }));
    expect(await client.bodyMap()).toEqual(regions);
  });

  it("posts multipart form data with the location code", async () => {
    let captured: FormData | null = null;
    const fetchFn: FetchLike = async (_url, init) => {
      captured = init?.body as FormData;
      return jsonResponse({
        predicted_class: "V",
        probabilities: { V: 0.9, D: 0.1 },
        model_id: "m",
        location: { code: 135, name: "Right Fifth Toe Tip" },
      });
    };
    const client = new ApiClient("", fetchFn);
    const image = new Blob([new Uint8Array([9])], { type: "image/png" });
    await client.predict(image, 135);
    expect(captured).toBeInstanceOf(FormData);
    expect(captured!.get("location_code")).toBe("135");
    expect(captured!.get("image")).toBeInstanceOf(Blob);
  });

  it("omits location_code entirely for image-only models", async () => {
    let captured: FormData | null = null;
    const fetchFn: FetchLike = async (_url, init) => {
      captured = init?.body as FormData;
      return jsonResponse({ predicted_class: "D", probabilities: { D: 1 }, model_id: "m", location: null });
    };
    await new ApiClient("", fetchFn).predict(new Blob([new Uint8Array([9])]), null);
    expect(captured!.has("location_code")).toBe(false);
  });

  it("surfaces the service's error detail", async () => {
    const client = new ApiClient("", async () =>
      jsonResponse({ detail: "this model requires a location_code" }, 400),
    );
    const err = await client.predict(new Blob([new Uint8Array([9])]), null).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(400);
    expect(err.message).toBe("this model requires a location_code");
  });

  it("falls back to a generic message on non-JSON errors", async () => {
    const client = new ApiClient("", async () => new Response("boom", { status: 502 }));
    const err = await client.health().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.message).toMatch(/502/);
  });
});
