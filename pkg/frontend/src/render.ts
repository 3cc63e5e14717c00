// DOM rendering: a full re-render per state change, driven by the view
// model's subscribe hook. Source code is displayed read-only; analysts
// judge evidence, they do not edit it.

import type { ReviewConsole, ReviewFilter } from "./state.js";
import { labelDisplay, type AnalysisDetail } from "./types.js";

export function mount(console_: ReviewConsole, root: HTMLElement): void {
  const render = () => renderAll(console_, root);
  console_.subscribe(render);
  render();
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderAll(vm: ReviewConsole, root: HTMLElement): void {
  root.textContent = "";
  const layout = el("div", "layout");
  layout.append(renderListPane(vm), renderDetailPane(vm));
  root.append(renderHeader(vm), layout);
}

function renderHeader(vm: ReviewConsole): HTMLElement {
  const header = el("header");
  header.append(el("h1", undefined, "maltriage review console"));
  if (vm.error) {
    const banner = el("div", "error-banner", vm.error);
    banner.setAttribute("role", "alert");
    header.append(banner);
  }
  return header;
}

function renderListPane(vm: ReviewConsole): HTMLElement {
  const pane = el("section", "list-pane");
  const counts = vm.counts;
  const filters = el("div", "filters");
  const options: Array<[ReviewFilter, string]> = [
    ["all", `All (${counts.total})`],
    ["unreviewed", `Unreviewed (${counts.unreviewed})`],
    ["reviewed", `Reviewed (${counts.reviewed})`],
  ];
  for (const [value, text] of options) {
    const btn = el("button", vm.filter === value ? "filter active" : "filter", text);
    btn.addEventListener("click", () => vm.setFilter(value));
    filters.append(btn);
  }
  pane.append(filters);

  const table = el("table", "analysis-list");
  const head = el("tr");
  for (const title of ["#", "Sample", "Status", "Label", "Reviewed"]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const row of vm.visible) {
    const tr = el("tr", vm.detail?.analysis_id === row.analysis_id ? "row selected" : "row");
    tr.append(
      el("td", undefined, String(row.analysis_id)),
      el("td", "sample-id", row.sample_id),
      el("td", `status status-${row.status}`, row.status),
      el("td", "label", labelDisplay(row.label)),
      el("td", "reviewed", row.reviewed ? "yes" : "no"),
    );
    tr.addEventListener("click", () => void vm.select(row.analysis_id));
    table.append(tr);
  }
  pane.append(table);
  return pane;
}

function renderDetailPane(vm: ReviewConsole): HTMLElement {
  const pane = el("section", "detail-pane");
  const detail = vm.detail;
  if (!detail) {
    pane.append(el("p", "placeholder", "Select an analysis to review it."));
    return pane;
  }
  pane.append(el("h2", undefined, `${detail.sample_id} / ${labelDisplay(detail.label)}`));

  if (detail.report) {
    pane.append(section("Conclusion", detail.report.conclusion));
    pane.append(section("Reasoning", detail.report.reasoning));
    const evidence = el("div", "report-section");
    evidence.append(el("h3", undefined, "Evidence"));
    const ul = el("ul", "evidence");
    for (const item of detail.report.evidence) ul.append(el("li", undefined, item));
    evidence.append(ul);
    pane.append(evidence);
    pane.append(section("Explanation of Suspicious Elements",
      detail.report.suspicious_explanation));
  } else {
    pane.append(el("p", "placeholder", `No report (${detail.status}).`));
  }

  const source = el("div", "report-section");
  source.append(el("h3", undefined, "Source"));
  const pre = el("pre", "source-view");
  pre.textContent = detail.sample.body;
  source.append(pre);
  pane.append(source);

  if (detail.keyword_set.keywords.length > 0) {
    const kw = el("div", "report-section");
    kw.append(el("h3", undefined, "Behavior keywords"));
    const ul = el("ul", "keywords");
    for (const cand of detail.keyword_set.provenance) {
      ul.append(el("li", undefined,
        `${cand.term} (sim ${cand.similarity.toFixed(3)}, ` +
        `from ${cand.source_doc_ids.join(", ")})`));
    }
    kw.append(ul);
    pane.append(kw);
  }

  pane.append(renderFeedbackForm(vm, detail));
  return pane;
}

function section(title: string, body: string): HTMLElement {
  const div = el("div", "report-section");
  div.append(el("h3", undefined, title), el("p", undefined, body));
  return div;
}

function renderFeedbackForm(vm: ReviewConsole, detail: AnalysisDetail): HTMLElement {
  const form = el("div", "feedback-form");
  form.append(el("h3", undefined, "Analyst decision"));

  if (detail.status !== "completed") {
    form.append(el("p", "placeholder",
      "Feedback is only taken on completed analyses."));
    return form;
  }

  const radios = el("div", "label-options");
  for (const label of vm.labelOptions) {
    const wrapper = el("label", "label-option");
    const input = document.createElement("input");
    input.type = "radio";
    input.name = "analyst-label";
    input.value = label;
    input.checked = vm.form.selectedLabel === label;
    input.addEventListener("change", () => vm.setLabel(label));
    wrapper.append(input, document.createTextNode(labelDisplay(label)));
    radios.append(wrapper);
  }
  form.append(radios);

  const notes = document.createElement("textarea");
  notes.className = "notes";
  notes.placeholder = "Notes (optional)";
  notes.value = vm.form.notes;
  notes.addEventListener("input", () => vm.setNotes(notes.value));
  form.append(notes);

  const buttons = el("div", "actions");
  const acceptBtn = el("button", "accept", "Accept model label");
  acceptBtn.disabled = !vm.canSubmit;
  acceptBtn.addEventListener("click", () => void vm.accept());
  const modifyBtn = el("button", "modify", "Submit modified label");
  modifyBtn.disabled = !vm.canSubmit || !vm.isModification;
  modifyBtn.addEventListener("click", () => void vm.modify());
  buttons.append(acceptBtn, modifyBtn);
  form.append(buttons);

  if (detail.feedback.length > 0) {
    const history = el("ul", "feedback-history");
    for (const f of detail.feedback) {
      history.append(el("li", undefined,
        `${f.created_at}: ${f.action} as ${labelDisplay(f.analyst_label)}` +
        (f.analyst_notes ? ` (${f.analyst_notes})` : "")));
    }
    form.append(history);
  }
  return form;
}
