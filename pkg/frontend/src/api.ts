import type { InteractionPayload, Report, SensorReading, SubmitPayload } from "./types";

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin client over the ingest service; every call is JSON in, JSON out.
 * The fetch implementation is injectable for tests. */
export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
    public anonUserId: string = randomAnonId(),
  ) {}

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, (body as { error?: string }).error ?? "request failed");
    }
    return body as T;
  }

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(resp.status, (body as { error?: string }).error ?? "request failed");
    }
    return body as T;
  }

  submitReport(payload: SubmitPayload): Promise<{ report_id: string }> {
    return this.post("/reports", payload);
  }

  fetchReports(from: number, to: number): Promise<Report[]> {
    return this.get(`/reports?from=${from}&to=${to}`);
  }

  fetchSensors(from: number, to: number): Promise<SensorReading[]> {
    return this.get(`/sensors?from=${from}&to=${to}`);
  }

  logInteraction(payload: Omit<InteractionPayload, "anon_user_id">): Promise<void> {
    return this.post("/interactions", { anon_user_id: this.anonUserId, ...payload });
  }
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

function randomAnonId(): string {
  return "u" + Math.random().toString(36).slice(2, 10);
}
