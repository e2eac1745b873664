import { ApiClient } from "../src/api";
import type { Report, SensorReading } from "../src/types";

export interface RecordedRequest {
  path: string;
  method: string;
  body: unknown;
}

/** In-memory stand-in for the ingest service. */
export class FakeServer {
  requests: RecordedRequest[] = [];
  reports: Report[] = [];
  sensors: SensorReading[] = [];
  failNextSubmit: { status: number; error: string } | null = null;
  private nextId = 0;

  client(): ApiClient {
    return new ApiClient("", this.fetch, "test-user");
  }

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const url = new URL(input, "http://test");
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    this.requests.push({ path: url.pathname, method, body });
    const respond = (status: number, payload: unknown) =>
      new Response(JSON.stringify(payload), {
        status,
        headers: { "Content-Type": "application/json" },
      });

    if (method === "POST" && url.pathname === "/reports") {
      if (this.failNextSubmit) {
        const fail = this.failNextSubmit;
        this.failNextSubmit = null;
        return respond(fail.status, { error: fail.error });
      }
      const id = `r${String(this.nextId++).padStart(6, "0")}`;
      this.reports.push({
        report_id: id,
        observed_at: Math.floor(Date.now() / 1000),
        zip_code: "15201",
        rating: body.rating,
        smell_description: body.smell_description ?? "",
        symptoms: body.symptoms ?? "",
        notes: body.notes ?? "",
        latitude: body.latitude + 0.001,
        longitude: body.longitude - 0.001,
      });
      return respond(200, { report_id: id });
    }
    if (method === "POST" && url.pathname === "/interactions") {
      return respond(200, { ok: true });
    }
    if (method === "GET" && url.pathname === "/reports") {
      const from = Number(url.searchParams.get("from") ?? 0);
      const to = Number(url.searchParams.get("to") ?? Number.MAX_SAFE_INTEGER);
      return respond(
        200,
        this.reports.filter((r) => r.observed_at >= from && r.observed_at < to),
      );
    }
    if (method === "GET" && url.pathname === "/sensors") {
      const from = Number(url.searchParams.get("from") ?? 0);
      const to = Number(url.searchParams.get("to") ?? Number.MAX_SAFE_INTEGER);
      return respond(
        200,
        this.sensors.filter((s) => s.observed_at >= from && s.observed_at < to),
      );
    }
    return respond(404, { error: "not found" });
  };
}

export function makeReport(overrides: Partial<Report> = {}): Report {
  return {
    report_id: "r000000",
    observed_at: 1_500_000_000,
    zip_code: "15201",
    rating: 3,
    smell_description: "",
    symptoms: "",
    notes: "",
    latitude: 40.44,
    longitude: -79.99,
    ...overrides,
  };
}
