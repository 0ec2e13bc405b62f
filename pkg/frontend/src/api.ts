// Typed client for the wound-classification REST API. The fetch function is
// injected so tests (and any non-browser host) can supply their own.

export interface HealthInfo {
  status: string;
  classes: string[];
  uses_location: boolean;
  input_size: number;
}

export interface BodyMapRegion {
  code: number;
  name: string;
  side: string;
  view: string;
}

export interface Prediction {
  predicted_class: string;
  probabilities: Record<string, number>;
  model_id: string;
  location: { code: number; name: string } | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.status = status;
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // fall through to the generic message
  }
  return `request failed with status ${response.status}`;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = (input, init) => fetch(input, init)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  async health(): Promise<HealthInfo> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/health`);
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    return response.json();
  }

  async bodyMap(): Promise<BodyMapRegion[]> {
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/bodymap`);
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    const body = await response.json();
    return body.regions;
  }

  /** Upload an image (plus a body-map code when the model wants one). */
  async predict(image: Blob, locationCode: number | null): Promise<Prediction> {
    const form = new FormData();
    form.append("image", image, "wound.png");
    if (locationCode !== null) form.append("location_code", String(locationCode));
    const response = await this.fetchFn(`${this.baseUrl}/api/v1/predict`, {
      method: "POST",
      body: form,
    });
    if (!response.ok) throw new ApiError(response.status, await errorDetail(response));
    return response.json();
  }
}
