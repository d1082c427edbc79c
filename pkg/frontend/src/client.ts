/**
 * Same-origin HTTP client for the threatflow API. The fetch function is
 * injectable so tests can run against canned responses.
 */

import type {
  AnalyzeResponse,
  ScenarioListing,
  SpeculateResponse,
  ThreatListing,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
    this.status = status;
  }
}

export interface AnalyzeBody {
  scenario: string;
  toggles?: Record<string, boolean>;
  mitigations?: string[];
  bounds?: Record<string, number>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly fetchFn: FetchLike;
  private readonly base: string;

  constructor(fetchFn?: FetchLike, base = "") {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
    this.base = base;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response.json() as Promise<T>;
  }

  getScenarios(): Promise<ScenarioListing> {
    return this.request<ScenarioListing>("/scenarios");
  }

  getThreats(): Promise<ThreatListing> {
    return this.request<ThreatListing>("/threats");
  }

  analyze(body: AnalyzeBody): Promise<AnalyzeResponse> {
    return this.request<AnalyzeResponse>("/analyze", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  speculate(body: AnalyzeBody): Promise<SpeculateResponse> {
    return this.request<SpeculateResponse>("/speculate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async runGraphDot(runId: string): Promise<string> {
    const response = await this.fetchFn(
      `${this.base}/runs/${encodeURIComponent(runId)}/graph.dot`,
    );
    if (!response.ok) {
      throw new ApiError(response.status, `run ${runId} not found`);
    }
    return response.text();
  }
}
