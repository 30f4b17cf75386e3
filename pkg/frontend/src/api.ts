/**
 * Typed client for the copilot frontdoor API. Every view talks to the
 * backend exclusively through this module, so the console stays a thin
 * client over the documented endpoints.
 */

export interface SourceRef {
  chunk_id: string;
  score: number;
  source: string;
  version_tag: string;
}

export interface AskResponse {
  answer_id: string;
  text: string;
  refused: boolean;
  sources: SourceRef[];
}

export interface ParamSpec {
  name: string;
  type: "string" | "int" | "float" | "enum";
  required: boolean;
  enum_values: string[] | null;
}

export interface RootCause {
  cause: string;
  confidence_note: string;
  recommendation: string;
  evidence_task_ids: string[];
}

export interface TraceEvent {
  event: string;
  [key: string]: unknown;
}

export interface DiagnosisReport {
  report_id: string;
  alert: string;
  status: "complete" | "inconclusive";
  recruited_experts: string[];
  expert_summaries: Record<string, string>;
  root_causes: RootCause[];
  trace: TraceEvent[];
  markdown: string;
}

export interface DiagnosisState {
  state: "active" | "awaiting_params" | "done";
  trace_so_far: TraceEvent[];
  pending_params?: ParamSpec[];
  report?: DiagnosisReport;
}

export interface HealthState {
  ok: boolean;
  kb_chunks: number;
  tools_registered: number;
}

export interface StreamedAnswer {
  answerId: string;
  refused: boolean;
  sources: SourceRef[];
  chunks: AsyncGenerator<string>;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export type FetchFn = typeof fetch;

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    return body.detail ?? response.statusText;
  } catch {
    return response.statusText;
  }
}

export class Api {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthState> {
    return this.request<HealthState>("/api/health");
  }

  ask(question: string): Promise<AskResponse> {
    return this.request<AskResponse>("/api/ask", {
      method: "POST",
      body: JSON.stringify({ question }),
    });
  }

  /** Streamed variant: metadata arrives in headers, text in chunks. */
  async askStream(question: string): Promise<StreamedAnswer> {
    const response = await this.fetchFn(`${this.baseUrl}/api/ask?stream=1`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question }),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    const sourcesHeader = response.headers.get("X-Sources") ?? "[]";
    const meta = {
      answerId: response.headers.get("X-Answer-Id") ?? "",
      refused: response.headers.get("X-Refused") === "1",
      sources: JSON.parse(sourcesHeader) as SourceRef[],
    };

    async function* chunks(): AsyncGenerator<string> {
      const body = response.body;
      if (!body) {
        yield await response.text();
        return;
      }
      const reader = body.getReader();
      const decoder = new TextDecoder();
      while (true) {
        const { done, value } = await reader.read();
        if (done) break;
        yield decoder.decode(value, { stream: true });
      }
    }

    return { ...meta, chunks: chunks() };
  }

  sendFeedback(answerId: string, verdict: "helpful" | "missing_solution",
               note = ""): Promise<{ ok: boolean }> {
    return this.request<{ ok: boolean }>("/api/feedback", {
      method: "POST",
      body: JSON.stringify({ answer_id: answerId, verdict, note }),
    });
  }

  startDiagnosis(alert: string): Promise<{ session_id: string }> {
    return this.request<{ session_id: string }>("/api/diagnose", {
      method: "POST",
      body: JSON.stringify({ alert }),
    });
  }

  pollDiagnosis(sessionId: string): Promise<DiagnosisState> {
    return this.request<DiagnosisState>(`/api/diagnose/${sessionId}`);
  }

  postParams(sessionId: string,
             values: Record<string, string | number>): Promise<{ ok: boolean }> {
    return this.request<{ ok: boolean }>(`/api/session/${sessionId}/params`, {
      method: "POST",
      body: JSON.stringify({ values }),
    });
  }

  addDocument(doc: { doc_id: string; format: string; source: string;
                     version_tag: string; content: string }):
      Promise<{ chunks_added: number }> {
    return this.request<{ chunks_added: number }>("/api/kb/documents", {
      method: "POST",
      body: JSON.stringify(doc),
    });
  }
}
