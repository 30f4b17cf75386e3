/**
 * Diagnosis view: starts a session, polls its state every second, and
 * renders experts, tasks and tool calls as they appear in the trace.
 * An awaiting_params poll opens the parameter dialog; submitting resumes
 * the same session. The final report renders as markdown, flagged when
 * inconclusive; an unknown session surfaces as an error toast.
 */

import { Api, ApiError, DiagnosisState, ParamSpec, TraceEvent } from "./api.js";
import { renderMarkdown } from "./markdown.js";
import { ParamDialog } from "./paramDialog.js";

export interface DiagnosisViewOptions {
  pollIntervalMs?: number;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export class DiagnosisView {
  readonly element: HTMLElement;
  private readonly progress: HTMLElement;
  private readonly reportPane: HTMLElement;
  private readonly toast: HTMLElement;
  private readonly pollIntervalMs: number;
  private dialog: ParamDialog | null = null;
  private sessionId: string | null = null;
  private running = false;

  constructor(private readonly api: Api, options: DiagnosisViewOptions = {}) {
    this.pollIntervalMs = options.pollIntervalMs ?? 1000;
    this.element = document.createElement("section");
    this.element.className = "diagnosis-view";

    const form = document.createElement("form");
    form.className = "alert-form";
    const input = document.createElement("input");
    input.type = "text";
    input.placeholder = "Paste an alert, e.g. Abnormal I/O Usage";
    input.setAttribute("aria-label", "alert");
    const button = document.createElement("button");
    button.type = "submit";
    button.textContent = "Diagnose";
    form.append(input, button);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (input.value.trim()) void this.start(input.value.trim());
    });

    this.toast = document.createElement("p");
    this.toast.className = "toast";
    this.progress = document.createElement("div");
    this.progress.className = "progress";
    this.reportPane = document.createElement("div");
    this.reportPane.className = "report";
    this.element.append(form, this.toast, this.progress, this.reportPane);
  }

  async start(alert: string): Promise<void> {
    this.reportPane.innerHTML = "";
    this.progress.innerHTML = "";
    this.toast.textContent = "";
    try {
      const { session_id } = await this.api.startDiagnosis(alert);
      this.sessionId = session_id;
      this.running = true;
      await this.pollLoop();
    } catch (error) {
      this.showToast(error);
    }
  }

  stop(): void {
    this.running = false;
  }

  private async pollLoop(): Promise<void> {
    while (this.running && this.sessionId) {
      let state: DiagnosisState;
      try {
        state = await this.api.pollDiagnosis(this.sessionId);
      } catch (error) {
        this.showToast(error);
        return;
      }
      this.renderProgress(state.trace_so_far);
      if (state.state === "awaiting_params" && state.pending_params) {
        this.openDialog(state.pending_params);
      } else if (state.state === "done") {
        this.running = false;
        if (state.report) this.renderReport(state);
        return;
      }
      await sleep(this.pollIntervalMs);
    }
  }

  private openDialog(specs: ParamSpec[]): void {
    if (this.dialog || !this.sessionId) return;
    const sessionId = this.sessionId;
    this.dialog = new ParamDialog({
      specs,
      onSubmit: async (values) => {
        await this.api.postParams(sessionId, values);
      },
      onClose: () => {
        this.dialog = null;
      },
    });
    this.progress.append(this.dialog.element);
    this.dialog.focus();
  }

  private renderProgress(trace: TraceEvent[]): void {
    const existingDialog = this.dialog?.element ?? null;
    this.progress.innerHTML = "";
    const experts = document.createElement("ul");
    experts.className = "experts";
    const steps = document.createElement("ol");
    steps.className = "steps";
    for (const event of trace) {
      if (event.event === "recruit") {
        const item = document.createElement("li");
        item.textContent = `recruited ${String(event.agent)} (${String(event.via)})`;
        experts.append(item);
      } else if (event.event === "tasks") {
        for (const instruction of (event.instructions as string[]) ?? []) {
          const item = document.createElement("li");
          item.textContent = instruction;
          steps.append(item);
        }
      } else if (event.event === "tool_call") {
        const item = document.createElement("li");
        item.className = "tool-call";
        item.textContent = `${String(event.agent)} ran ${String(event.tool)} ` +
          `(${String(event.status)})`;
        steps.append(item);
      } else if (event.event === "cross_review") {
        const item = document.createElement("li");
        item.className = "cross-review";
        item.textContent =
          `${String(event.from_agent)} handed off to ${String(event.to_agent)}`;
        steps.append(item);
      }
    }
    this.progress.append(experts, steps);
    if (existingDialog) this.progress.append(existingDialog);
  }

  private renderReport(state: DiagnosisState): void {
    const report = state.report;
    if (!report) return;
    if (report.status === "inconclusive") {
      const flag = document.createElement("p");
      flag.className = "inconclusive-flag";
      flag.textContent = "Inconclusive: the run hit its round limit or found no root cause.";
      this.reportPane.append(flag);
    }
    const rendered = document.createElement("div");
    rendered.className = "report-markdown";
    rendered.innerHTML = renderMarkdown(report.markdown);
    this.reportPane.append(rendered);
  }

  private showToast(error: unknown): void {
    if (error instanceof ApiError && error.status === 404) {
      this.toast.textContent = "Session not found (it may have expired).";
    } else {
      this.toast.textContent =
        error instanceof Error ? error.message : "request failed";
    }
    this.toast.classList.add("error");
    this.running = false;
  }
}
