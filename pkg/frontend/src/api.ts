// Typed client for the review API. The UI keeps no state the server cannot
// reproduce, so every view can be rebuilt from these GET endpoints alone.

import type {
  AdoptionJson,
  PendingPageJson,
  ReviewSubmission,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (error) {
      throw new ApiError(0, `network failure: ${String(error)}`);
    }
    if (!response.ok) {
      const detail = await response
        .json()
        .then((body) => (body as { detail?: string }).detail)
        .catch(() => undefined);
      throw new ApiError(response.status, detail ?? `HTTP ${response.status}`);
    }
    return (await response.json()) as T;
  }

  pending(cursor?: string | null, size = 20): Promise<PendingPageJson> {
    const params = new URLSearchParams({ size: String(size) });
    if (cursor) params.set("cursor", cursor);
    return this.request<PendingPageJson>(`/api/pending?${params}`);
  }

  submitReview(submission: ReviewSubmission): Promise<unknown> {
    return this.request("/api/reviews", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    });
  }

  adoption(): Promise<AdoptionJson> {
    return this.request<AdoptionJson>("/api/metrics/adoption");
  }

  session(sessionId: string): Promise<unknown> {
    return this.request(`/api/sessions/${encodeURIComponent(sessionId)}`);
  }
}
