/** Shared test fixtures: a programmable fetch stub and canned payloads. */

import { FetchFn, SourceRef } from "../src/api.js";

export interface StubCall {
  url: string;
  init?: RequestInit;
}

export type RouteHandler = (url: string, init?: RequestInit) => Response | Promise<Response>;

export function jsonResponse(body: unknown, status = 200,
                             headers: Record<string, string> = {}): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json", ...headers },
  });
}

export function streamResponse(chunks: string[],
                               headers: Record<string, string>): Response {
  const encoder = new TextEncoder();
  const stream = new ReadableStream<Uint8Array>({
    start(controller) {
      for (const chunk of chunks) controller.enqueue(encoder.encode(chunk));
      controller.close();
    },
  });
  return new Response(stream, { status: 200, headers });
}

export function makeFetchStub(routes: Record<string, RouteHandler>) {
  const calls: StubCall[] = [];
  const fetchFn: FetchFn = async (input, init) => {
    const url = String(input);
    calls.push({ url, init: init ?? undefined });
    for (const [prefix, handler] of Object.entries(routes)) {
      if (url.includes(prefix)) return handler(url, init ?? undefined);
    }
    throw new TypeError(`no stub route for ${url}`);
  };
  return { fetchFn, calls };
}

export const SAMPLE_SOURCES: SourceRef[] = [
  { chunk_id: "dev_guide:0002", score: 0.51, source: "dev-guide", version_tag: "505.2" },
  { chunk_id: "faq:0001", score: 0.43, source: "faq-textbook", version_tag: "505.2" },
];

export const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export async function waitFor(predicate: () => boolean, timeoutMs = 5000): Promise<void> {
  const start = Date.now();
  while (!predicate()) {
    if (Date.now() - start > timeoutMs) throw new Error("waitFor timed out");
    await sleep(20);
  }
}
