/** Thin typed client over the review service HTTP API. */

import type {
  CandidateView,
  DecisionResponse,
  HeatmapPayload,
  MetricsPayload,
  RunDetail,
  RunSummary,
} from "./types.js";

/** Non-2xx response, with the decoded body when it was JSON. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly payload: unknown,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function decode(res: Response): Promise<unknown> {
  const text = await res.text();
  if (text === "") return null;
  try {
    return JSON.parse(text);
  } catch {
    return null;
  }
}

export class ApiClient {
  /** base is "" when the console is served by the service itself,
   * otherwise something like "http://127.0.0.1:8337". */
  constructor(readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(this.base + path, init);
    const body = await decode(res);
    if (!res.ok) {
      const detail =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : res.statusText;
      throw new ApiError(res.status, body, `${res.status}: ${detail}`);
    }
    return body as T;
  }

  runs(): Promise<RunSummary[]> {
    return this.request("/api/runs");
  }

  run(runId: string): Promise<RunDetail> {
    return this.request(`/api/runs/${encodeURIComponent(runId)}`);
  }

  runMetrics(runId: string): Promise<MetricsPayload> {
    return this.request(`/api/runs/${encodeURIComponent(runId)}/metrics`);
  }

  candidates(status?: string): Promise<CandidateView[]> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request(`/api/candidates${query}`);
  }

  candidate(id: string): Promise<CandidateView> {
    return this.request(`/api/candidates/${encodeURIComponent(id)}`);
  }

  heatmap(id: string, resolution?: number): Promise<HeatmapPayload> {
    const query = resolution ? `?resolution=${resolution}` : "";
    return this.request(
      `/api/candidates/${encodeURIComponent(id)}/heatmap${query}`,
    );
  }

  decide(
    id: string,
    verdict: "approve" | "reject",
    note = "",
  ): Promise<DecisionResponse> {
    return this.request(
      `/api/candidates/${encodeURIComponent(id)}/decision`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ verdict, note }),
      },
    );
  }
}

/** The slice of the client each screen actually needs; tests stub this. */
export interface QueueApi {
  candidates(status?: string): Promise<CandidateView[]>;
  heatmap(id: string, resolution?: number): Promise<HeatmapPayload>;
  decide(
    id: string,
    verdict: "approve" | "reject",
    note?: string,
  ): Promise<DecisionResponse>;
}

export interface DashboardApi {
  runs(): Promise<RunSummary[]>;
  run(runId: string): Promise<RunDetail>;
  runMetrics(runId: string): Promise<MetricsPayload>;
}
