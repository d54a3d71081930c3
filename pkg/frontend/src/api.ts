export interface ApiConfig {
  baseUrl: string;
  token?: string;
}

export interface DocumentMeta {
  document_id: string;
  parse_mode: string;
  chunk_count: number;
}

export interface BriefData {
  query: string;
  context: string;
  instructions: string;
}

export interface ProgressData {
  status: string;
  turns: string[];
  draft_title: string | null;
  stopped_by: string;
  error: string | null;
}

export interface ReportSource {
  number: number;
  quote: string;
  locator: string;
  filename: string;
}

export interface ReportData {
  title: string;
  summary: string;
  legal_reasoning: string;
  preliminary_answer: string;
  gaps_and_questions: string[];
  sources: ReportSource[];
}

export interface ReportResponse {
  markdown: string;
  report: ReportData;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public stage: string,
    message: string,
  ) {
    super(message);
  }
}

/** Thin typed wrapper over the analysis service HTTP API. All methods are
 * pure transport: no metrics, labels, or retrieval are computed here. */
export class ApiClient {
  constructor(private config: ApiConfig) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.config.token) {
      headers["Authorization"] = `Bearer ${this.config.token}`;
    }
    const resp = await fetch(this.config.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, data.stage ?? "unknown", data.message ?? resp.statusText);
    }
    return data as T;
  }

  uploadDocument(text: string, filename = "document.txt"): Promise<DocumentMeta> {
    return this.request("POST", "/documents", { text, filename });
  }

  createSession(documentId: string): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions", { document_id: documentId });
  }

  /** text === null finalizes the brief. */
  sendMessage(sessionId: string, text: string | null): Promise<{ reply?: string; brief?: BriefData }> {
    return this.request("POST", `/sessions/${sessionId}/messages`, { text });
  }

  interrogate(sessionId: string, dMax?: number): Promise<{ status: string }> {
    return this.request("POST", `/sessions/${sessionId}/interrogate`, { d_max: dMax ?? null });
  }

  progress(sessionId: string): Promise<ProgressData> {
    return this.request("GET", `/sessions/${sessionId}/progress`);
  }

  report(sessionId: string): Promise<ReportResponse> {
    return this.request("GET", `/sessions/${sessionId}/report`);
  }
}
