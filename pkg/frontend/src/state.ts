// View model for the review console. DOM-free on purpose: every state
// transition is confirmed by a server response (no optimistic updates),
// and the whole flow is testable without a browser.

import { ApiError, type ConsoleApi } from "./api.js";
import { LABELS, type AnalysisDetail, type AnalysisSummary, type AnalystLabel } from "./types.js";

export type ReviewFilter = "all" | "reviewed" | "unreviewed";

export interface FormState {
  selectedLabel: AnalystLabel | null;
  notes: string;
  dirty: boolean;
  inFlight: boolean;
}

export class ReviewConsole {
  analyses: AnalysisSummary[] = [];
  filter: ReviewFilter = "all";
  detail: AnalysisDetail | null = null;
  form: FormState = { selectedLabel: null, notes: "", dirty: false, inFlight: false };
  error: string | null = null;

  readonly labelOptions = LABELS;

  private listeners: Array<() => void> = [];

  constructor(private api: ConsoleApi) {}

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  get visible(): AnalysisSummary[] {
    if (this.filter === "reviewed") return this.analyses.filter((a) => a.reviewed);
    if (this.filter === "unreviewed") return this.analyses.filter((a) => !a.reviewed);
    return this.analyses;
  }

  get counts(): { total: number; reviewed: number; unreviewed: number } {
    const reviewed = this.analyses.filter((a) => a.reviewed).length;
    return { total: this.analyses.length, reviewed, unreviewed: this.analyses.length - reviewed };
  }

  async refresh(): Promise<void> {
    try {
      this.analyses = await this.api.listAnalyses();
      this.error = null;
    } catch (err) {
      this.error = describe(err);
    }
    this.emit();
  }

  async select(analysisId: number): Promise<void> {
    try {
      this.detail = await this.api.getAnalysis(analysisId);
      const modelLabel = this.detail.label;
      this.form = {
        selectedLabel: isAnalystLabel(modelLabel) ? modelLabel : null,
        notes: "",
        dirty: false,
        inFlight: false,
      };
      this.error = null;
    } catch (err) {
      this.error = describe(err);
    }
    this.emit();
  }

  setFilter(filter: ReviewFilter): void {
    this.filter = filter;
    this.emit();
  }

  setLabel(label: AnalystLabel): void {
    if (!LABELS.includes(label)) return; // never accept labels outside the vocabulary
    this.form.selectedLabel = label;
    this.form.dirty = true;
    this.emit();
  }

  setNotes(notes: string): void {
    this.form.notes = notes;
    this.form.dirty = true;
  }

  get canSubmit(): boolean {
    return (
      this.detail !== null &&
      this.detail.status === "completed" &&
      !this.form.inFlight
    );
  }

  get isModification(): boolean {
    return (
      this.form.selectedLabel !== null &&
      this.detail !== null &&
      this.form.selectedLabel !== this.detail.label
    );
  }

  /** Submit the model's own label unchanged. */
  async accept(): Promise<void> {
    if (!this.canSubmit || this.detail === null) return;
    const modelLabel = this.detail.label;
    if (!isAnalystLabel(modelLabel)) {
      this.error = "analysis has no verified label to accept";
      this.emit();
      return;
    }
    await this.submit(modelLabel);
  }

  /** Submit a different label; a no-op unless one was actually chosen. */
  async modify(): Promise<void> {
    if (!this.canSubmit || this.detail === null) return;
    const chosen = this.form.selectedLabel;
    if (chosen === null || !this.isModification) {
      this.error = "pick a label different from the model's to modify";
      this.emit();
      return;
    }
    await this.submit(chosen);
  }

  private async submit(label: AnalystLabel): Promise<void> {
    if (this.detail === null) return;
    const analysisId = this.detail.analysis_id;
    this.form.inFlight = true;
    this.emit();
    try {
      await this.api.submitFeedback(analysisId, label, this.form.notes);
      // list and detail re-read from the server: the row's reviewed flag
      // comes back from storage, not from local guesswork
      await this.refresh();
      await this.select(analysisId);
      this.error = null;
    } catch (err) {
      // keep the form exactly as the analyst left it
      this.error = describe(err);
      this.form.inFlight = false;
    }
    this.emit();
  }
}

function isAnalystLabel(value: string | null): value is AnalystLabel {
  return value !== null && (LABELS as readonly string[]).includes(value);
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return String(err);
}
