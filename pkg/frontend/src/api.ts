// Thin typed client over the /v1 endpoints. The service base URL is the
// console's only configuration.

import type {
  AttributionReport,
  Finding,
  FpReport,
  ProblemDetails,
  RunRecord,
  ThreatModel,
  TriageRequest,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly problem: ProblemDetails,
  ) {
    super(`${problem.title}: ${problem.detail}`);
  }
}

async function parseProblem(response: Response): Promise<ProblemDetails> {
  try {
    return (await response.json()) as ProblemDetails;
  } catch {
    return {
      type: "about:blank",
      title: response.statusText || "error",
      status: response.status,
      detail: "",
    };
  }
}

export class SpecaClient {
  constructor(private readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw new ApiError(response.status, await parseProblem(response));
    }
    return (await response.json()) as T;
  }

  listRuns(): Promise<RunRecord[]> {
    return this.request("/v1/runs");
  }

  getRun(runId: string): Promise<RunRecord> {
    return this.request(`/v1/runs/${runId}`);
  }

  listFindings(runId: string, status?: string): Promise<Finding[]> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request(`/v1/runs/${runId}/findings${query}`);
  }

  triage(findingId: string, body: TriageRequest): Promise<Finding> {
    return this.request(`/v1/findings/${findingId}/triage`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  propagate(findingId: string): Promise<{ source_finding_id: string; created: string[] }> {
    return this.request(`/v1/findings/${findingId}/propagate`, { method: "POST" });
  }

  getThreatModel(runId: string): Promise<ThreatModel> {
    return this.request(`/v1/runs/${runId}/threat-model`);
  }

  putThreatModel(
    runId: string,
    model: ThreatModel,
  ): Promise<{ model: ThreatModel; warnings: string[] }> {
    return this.request(`/v1/runs/${runId}/threat-model`, {
      method: "PUT",
      body: JSON.stringify(model),
    });
  }

  attributionReport(runId: string): Promise<AttributionReport> {
    return this.request(`/v1/runs/${runId}/reports/attribution`);
  }

  fpReport(runId: string): Promise<FpReport> {
    return this.request(`/v1/runs/${runId}/reports/fp`);
  }
}
