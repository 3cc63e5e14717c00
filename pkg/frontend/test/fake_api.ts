// In-memory stand-in for the service, mirroring its feedback semantics:
// the action is derived server-side and reviewed flags come from storage.

import type { ConsoleApi } from "../src/api.js";
import { ApiError } from "../src/api.js";
import type {
  AnalysisDetail,
  AnalysisSummary,
  AnalystLabel,
  FeedbackRecord,
} from "../src/types.js";

export function makeDetail(
  id: number,
  label: string | null,
  status: AnalysisSummary["status"] = "completed",
): AnalysisDetail {
  return {
    analysis_id: id,
    sample_id: `sample_${id}.c`,
    status,
    label,
    reviewed: false,
    sample: {
      id: `sample_${id}.c`,
      body: `int main_${id}(void) { return ${id}; }`,
      kind: "source",
      language_hint: null,
      origin_dataset: null,
    },
    keyword_set: { keywords: ["injection"], provenance: [] },
    report:
      status === "completed"
        ? {
            conclusion: `verdict for ${id}`,
            reasoning: "because",
            evidence: ["item one", "item two"],
            suspicious_explanation: "explained",
            parse_flags: [],
            raw_text: "raw",
          }
        : null,
    siem: null,
    feedback: [],
    prompt1_version: "1",
    prompt2_version: "1",
    created_at: "2026-08-09T00:00:00+00:00",
    error: null,
  };
}

export class FakeApi implements ConsoleApi {
  details = new Map<number, AnalysisDetail>();
  nextFeedbackId = 1;
  failNext = false;

  seed(...details: AnalysisDetail[]): void {
    for (const d of details) this.details.set(d.analysis_id, d);
  }

  private boom(): void {
    if (this.failNext) {
      this.failNext = false;
      throw new ApiError("unreachable", "connection refused", 0);
    }
  }

  async listAnalyses(): Promise<AnalysisSummary[]> {
    this.boom();
    return [...this.details.values()].map((d) => ({
      analysis_id: d.analysis_id,
      sample_id: d.sample_id,
      status: d.status,
      label: d.label,
      created_at: d.created_at,
      reviewed: d.reviewed,
    }));
  }

  async getAnalysis(id: number): Promise<AnalysisDetail> {
    this.boom();
    const detail = this.details.get(id);
    if (!detail) throw new ApiError("not_found", `no analysis ${id}`, 404);
    return structuredClone(detail);
  }

  async submitFeedback(
    id: number,
    label: AnalystLabel,
    notes: string,
  ): Promise<FeedbackRecord> {
    this.boom();
    const detail = this.details.get(id);
    if (!detail) throw new ApiError("not_found", `no analysis ${id}`, 404);
    if (detail.status !== "completed") {
      throw new ApiError("conflict", "analysis not completed", 409);
    }
    const record: FeedbackRecord = {
      feedback_id: this.nextFeedbackId++,
      analysis_id: id,
      analyst_label: label,
      analyst_notes: notes,
      action: label === detail.label ? "accepted" : "modified",
      created_at: "2026-08-09T00:00:00+00:00",
    };
    detail.feedback.push(record);
    detail.reviewed = true;
    return record;
  }
}
