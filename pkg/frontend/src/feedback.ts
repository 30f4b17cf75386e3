/**
 * Feedback control attached to every answer: one click files a
 * missing-solution report. Failed sends are queued and retried rather
 * than dropped, with a visible notice while the queue is pending.
 */

import { Api } from "./api.js";

interface QueuedFeedback {
  answerId: string;
  verdict: "helpful" | "missing_solution";
  note: string;
}

export class FeedbackControl {
  readonly element: HTMLElement;
  private readonly status: HTMLElement;
  private queue: QueuedFeedback[] = [];

  constructor(
    private readonly api: Api,
    private readonly answerId: string,
  ) {
    this.element = document.createElement("div");
    this.element.className = "feedback";
    const button = document.createElement("button");
    button.type = "button";
    button.textContent = "Report a missing solution";
    button.addEventListener("click", () => {
      void this.send("missing_solution");
    });
    this.status = document.createElement("span");
    this.status.className = "feedback-status";
    this.element.append(button, this.status);
  }

  async send(verdict: "helpful" | "missing_solution", note = ""): Promise<void> {
    try {
      await this.api.sendFeedback(this.answerId, verdict, note);
      this.status.textContent = "Thanks, feedback recorded.";
      this.element.classList.remove("feedback-queued");
    } catch {
      this.queue.push({ answerId: this.answerId, verdict, note });
      this.status.textContent =
        `Offline: ${this.queue.length} feedback item(s) queued, will retry.`;
      this.element.classList.add("feedback-queued");
    }
  }

  /** Retry everything that failed; called on demand or by a timer upstream. */
  async flushQueue(): Promise<number> {
    const pending = this.queue;
    this.queue = [];
    let sent = 0;
    for (const item of pending) {
      try {
        await this.api.sendFeedback(item.answerId, item.verdict, item.note);
        sent += 1;
      } catch {
        this.queue.push(item);
      }
    }
    if (this.queue.length === 0 && sent > 0) {
      this.status.textContent = "Thanks, feedback recorded.";
      this.element.classList.remove("feedback-queued");
    }
    return sent;
  }

  get queuedCount(): number {
    return this.queue.length;
  }
}
