// Wire types for the /api endpoints. Labels are a closed set; the UI
// must never show or send anything outside it.

export const LABELS = ["malware", "benign", "partially_malicious"] as const;
export type AnalystLabel = (typeof LABELS)[number];

export function labelDisplay(label: string | null): string {
  return label === null ? "—" : label.replace(/_/g, " ").toUpperCase();
}

export interface AnalysisSummary {
  analysis_id: number;
  sample_id: string;
  status: "completed" | "label_unverified" | "backend_failed";
  label: string | null;
  created_at: string;
  reviewed: boolean;
}

export interface KeywordProvenance {
  term: string;
  tfidf_score: number;
  similarity: number;
  source_doc_ids: string[];
}

export interface ReportFields {
  conclusion: string;
  reasoning: string;
  evidence: string[];
  suspicious_explanation: string;
  parse_flags: string[];
  raw_text: string;
}

export interface SiemRecord {
  ID: string;
  conclusion: string;
  reasoning: string;
  evidence: string[];
  final_Judgment: string;
  source_code: string;
}

export interface FeedbackRecord {
  feedback_id: number;
  analysis_id: number;
  analyst_label: AnalystLabel;
  analyst_notes: string;
  action: "accepted" | "modified";
  created_at: string;
}

export interface AnalysisDetail {
  analysis_id: number;
  sample_id: string;
  status: AnalysisSummary["status"];
  label: string | null;
  reviewed: boolean;
  sample: {
    id: string;
    body: string;
    kind: string;
    language_hint: string | null;
    origin_dataset: string | null;
  };
  keyword_set: { keywords: string[]; provenance: KeywordProvenance[] };
  report: ReportFields | null;
  siem: SiemRecord | null;
  feedback: FeedbackRecord[];
  prompt1_version: string;
  prompt2_version: string;
  created_at: string;
  error: string | null;
}
