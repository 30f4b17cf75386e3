/**
 * Chat view: posts questions with ?stream=1, renders the markdown answer
 * incrementally as chunks arrive, then shows the source attributions from
 * the response headers. Refusals get distinct styling; a transport error
 * leaves a retry button in place of the answer.
 */

import { Api } from "./api.js";
import { FeedbackControl } from "./feedback.js";
import { renderMarkdown } from "./markdown.js";

export class ChatView {
  readonly element: HTMLElement;
  private readonly transcript: HTMLElement;
  private readonly input: HTMLInputElement;

  constructor(private readonly api: Api) {
    this.element = document.createElement("section");
    this.element.className = "chat-view";
    this.transcript = document.createElement("div");
    this.transcript.className = "transcript";

    const form = document.createElement("form");
    form.className = "ask-form";
    this.input = document.createElement("input");
    this.input.type = "text";
    this.input.placeholder = "Ask a database question...";
    this.input.setAttribute("aria-label", "question");
    const send = document.createElement("button");
    send.type = "submit";
    send.textContent = "Ask";
    form.append(this.input, send);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const question = this.input.value.trim();
      if (question) {
        this.input.value = "";
        void this.ask(question);
      }
    });

    this.element.append(this.transcript, form);
  }

  async ask(question: string): Promise<void> {
    const userBubble = document.createElement("div");
    userBubble.className = "message user";
    userBubble.textContent = question;
    this.transcript.append(userBubble);

    const bubble = document.createElement("div");
    bubble.className = "message assistant";
    const body = document.createElement("div");
    body.className = "answer-body";
    bubble.append(body);
    this.transcript.append(bubble);

    try {
      const answer = await this.api.askStream(question);
      let text = "";
      for await (const chunk of answer.chunks) {
        text += chunk;
        body.innerHTML = renderMarkdown(text);
      }
      if (answer.refused) {
        bubble.classList.add("refused");
        const banner = document.createElement("p");
        banner.className = "refusal-banner";
        banner.textContent = "The copilot declined this question.";
        bubble.prepend(banner);
        return;
      }
      if (answer.sources.length) {
        const panel = document.createElement("ul");
        panel.className = "sources";
        for (const source of answer.sources) {
          const item = document.createElement("li");
          item.textContent =
            `[${source.chunk_id}] ${source.source} v${source.version_tag} ` +
            `(score ${source.score.toFixed(4)})`;
          panel.append(item);
        }
        bubble.append(panel);
      }
      bubble.append(new FeedbackControl(this.api, answer.answerId).element);
    } catch (error) {
      bubble.classList.add("error");
      body.textContent =
        error instanceof Error ? `Request failed: ${error.message}` : "Request failed";
      const retry = document.createElement("button");
      retry.type = "button";
      retry.className = "retry";
      retry.textContent = "Retry";
      retry.addEventListener("click", () => {
        bubble.remove();
        userBubble.remove();
        void this.ask(question);
      });
      bubble.append(retry);
    }
  }
}
