import type { ReportDoc, SessionEventBody, StepView, StudyDoc } from "./types";

/** Non-2xx response from the service, carrying its machine-readable code. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface RawResult {
  status: number;
  body: Record<string, unknown>;
}

// Network-level retries; HTTP error statuses are never retried here. Event
// posts stay safe to retry because the server's sequence guard turns a
// replayed delivery into a 409 instead of a second application.
const BACKOFF_MS = [250, 1000, 4000];

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class ApiClient {
  constructor(
    readonly base: string = "",
    private readonly fetchImpl: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<RawResult> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    let lastError: unknown = null;
    for (let attempt = 0; attempt <= BACKOFF_MS.length; attempt++) {
      if (attempt > 0) await sleep(BACKOFF_MS[attempt - 1]!);
      let response: Response;
      try {
        response = await this.fetchImpl(this.base + path, init);
      } catch (err) {
        lastError = err;
        continue;
      }
      const text = await response.text();
      let parsed: Record<string, unknown> = {};
      if (text) {
        try {
          parsed = JSON.parse(text) as Record<string, unknown>;
        } catch {
          parsed = { message: text };
        }
      }
      return { status: response.status, body: parsed };
    }
    throw lastError instanceof Error
      ? lastError
      : new Error("network failure after retries");
  }

  private unwrap<T>(result: RawResult): T {
    if (result.status >= 200 && result.status < 300) {
      return result.body as T;
    }
    const code = typeof result.body.code === "string" ? result.body.code : "error";
    const message =
      typeof result.body.message === "string"
        ? result.body.message
        : `request failed with status ${result.status}`;
    throw new ApiError(result.status, code, message);
  }

  async createStudy(name: string, source: string): Promise<string> {
    const result = await this.request("POST", "/api/studies", { name, source });
    return this.unwrap<{ study_id: string }>(result).study_id;
  }

  async getStudy(studyId: string): Promise<StudyDoc> {
    const result = await this.request("GET", `/api/studies/${studyId}`);
    return this.unwrap<StudyDoc>(result);
  }

  async createSession(
    studyId: string,
    condition: string,
    seed: number,
  ): Promise<string> {
    const result = await this.request("POST", "/api/sessions", {
      study_id: studyId,
      condition,
      seed,
    });
    return this.unwrap<{ session_id: string }>(result).session_id;
  }

  async getStep(sessionId: string): Promise<StepView> {
    const result = await this.request("GET", `/api/sessions/${sessionId}/step`);
    return this.unwrap<StepView>(result);
  }

  async postEvent(sessionId: string, event: SessionEventBody): Promise<StepView> {
    return this.unwrap<StepView>(await this.postEventRaw(sessionId, event));
  }

  /** Like postEvent but never throws on HTTP errors; used by the seq probe. */
  postEventRaw(sessionId: string, event: SessionEventBody): Promise<RawResult> {
    return this.request("POST", `/api/sessions/${sessionId}/events`, event);
  }

  async getReport(sessionId: string): Promise<ReportDoc> {
    const result = await this.request("GET", `/api/sessions/${sessionId}/report`);
    return this.unwrap<ReportDoc>(result);
  }

  async exportCsv(studyId: string): Promise<string> {
    const result = await this.request("GET", `/api/studies/${studyId}/export.csv`);
    if (result.status !== 200) {
      throw new ApiError(result.status, "error", "export failed");
    }
    const body = result.body;
    // CSV is not JSON; request() stashes unparseable text under message.
    return typeof body.message === "string" ? body.message : "";
  }
}
