import type { AnalysisDetail, AnalysisSummary, AnalystLabel, FeedbackRecord } from "./types.js";

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function toApiError(resp: Response): Promise<ApiError> {
  let code = "unknown";
  let message = `HTTP ${resp.status}`;
  try {
    const body = (await resp.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body: keep the generic message
  }
  return new ApiError(code, message, resp.status);
}

/** The slice of the service the console needs; fakes implement this in tests. */
export interface ConsoleApi {
  listAnalyses(params?: { status?: string; label?: string }): Promise<AnalysisSummary[]>;
  getAnalysis(id: number): Promise<AnalysisDetail>;
  submitFeedback(id: number, label: AnalystLabel, notes: string): Promise<FeedbackRecord>;
}

export class ApiClient implements ConsoleApi {
  constructor(private baseUrl: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await fetch(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError("unreachable", `service unreachable: ${err}`, 0);
    }
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as T;
  }

  listAnalyses(params?: { status?: string; label?: string }): Promise<AnalysisSummary[]> {
    const q = new URLSearchParams();
    if (params?.status) q.set("status", params.status);
    if (params?.label) q.set("label", params.label);
    const suffix = q.toString() ? `?${q}` : "";
    return this.request<AnalysisSummary[]>(`/api/analyses${suffix}`);
  }

  getAnalysis(id: number): Promise<AnalysisDetail> {
    return this.request<AnalysisDetail>(`/api/analyses/${id}`);
  }

  submitFeedback(id: number, label: AnalystLabel, notes: string): Promise<FeedbackRecord> {
    return this.request<FeedbackRecord>(`/api/analyses/${id}/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ analyst_label: label, notes }),
    });
  }

  async health(): Promise<boolean> {
    try {
      await this.request<{ status: string }>("/api/health");
      return true;
    } catch {
      return false;
    }
  }
}
