import { describe, expect, it } from "vitest";

import { Api } from "../src/api.js";
import { ChatView } from "../src/chat.js";
import { SAMPLE_SOURCES, jsonResponse, makeFetchStub, streamResponse,
         waitFor } from "./helpers.js";

function askStreamRoute(chunks: string[], refused = false) {
  return streamResponse(chunks, {
    "X-Answer-Id": "a1",
    "X-Refused": refused ? "1" : "0",
    "X-Sources": JSON.stringify(refused ? [] : SAMPLE_SOURCES),
  });
}

describe("ChatView", () => {
  it("streams an answer into rendered markdown and lists sources", async () => {
    const { fetchFn } = makeFetchStub({
      "/api/ask?stream=1": () => askStreamRoute(["# An", "swer\n\nbody text"]),
    });
    const view = new ChatView(new Api("http://x", fetchFn));
    document.body.append(view.element);
    await view.ask("How do I create an index?");

    const bubble = view.element.querySelector(".message.assistant");
    expect(bubble?.querySelector("h1")?.textContent).toBe("Answer");
    const sources = [...view.element.querySelectorAll(".sources li")];
    expect(sources).toHaveLength(2);
    expect(sources[0]?.textContent).toContain("[dev_guide:0002]");
    expect(sources[0]?.textContent).toContain("dev-guide");
    view.element.remove();
  });

  it("styles refusals and shows the refusal banner", async () => {
    const { fetchFn } = makeFetchStub({
      "/api/ask?stream=1": () =>
        askStreamRoute(["GaussMaster cannot answer such a question."], true),
    });
    const view = new ChatView(new Api("http://x", fetchFn));
    document.body.append(view.element);
    await view.ask("something risky");

    const bubble = view.element.querySelector(".message.assistant");
    expect(bubble?.classList.contains("refused")).toBe(true);
    expect(bubble?.querySelector(".refusal-banner")).toBeTruthy();
    expect(bubble?.textContent).toContain("GaussMaster cannot answer");
    expect(view.element.querySelector(".sources")).toBeNull();
    view.element.remove();
  });

  it("offers a retry affordance on network errors and retries", async () => {
    let failures = 1;
    const { fetchFn, calls } = makeFetchStub({
      "/api/ask?stream=1": () => {
        if (failures > 0) {
          failures -= 1;
          throw new TypeError("network down");
        }
        return askStreamRoute(["recovered answer"]);
      },
    });
    const view = new ChatView(new Api("http://x", fetchFn));
    document.body.append(view.element);
    await view.ask("flaky question");

    const retry = view.element.querySelector<HTMLButtonElement>("button.retry");
    expect(retry).toBeTruthy();
    expect(view.element.querySelector(".message.error")).toBeTruthy();
    retry?.click();
    await waitFor(() => view.element.textContent?.includes("recovered answer") ?? false);
    expect(calls.filter((c) => c.url.includes("stream=1"))).toHaveLength(2);
    view.element.remove();
  });

  it("attaches a feedback control to successful answers", async () => {
    const { fetchFn } = makeFetchStub({
      "/api/ask?stream=1": () => askStreamRoute(["fine answer"]),
      "/api/feedback": () => jsonResponse({ ok: true }),
    });
    const view = new ChatView(new Api("http://x", fetchFn));
    document.body.append(view.element);
    await view.ask("q");
    expect(view.element.querySelector(".feedback button")).toBeTruthy();
    view.element.remove();
  });
});
