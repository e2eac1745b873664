import { ApiError, type ApiClient } from "./api";
import type { SubmitPayload } from "./types";

export interface SubmitResult {
  reportId: string;
}

export interface GeoProvider {
  (): Promise<{ latitude: number; longitude: number }>;
}

/** The submission console: a rating is mandatory, texts optional; offline or
 * failed submissions queue locally and retry. */
export class SubmitConsole {
  readonly root: HTMLElement;
  private rating: number | null = null;
  private queue: SubmitPayload[] = [];
  onSubmitted: ((result: SubmitResult, payload: SubmitPayload) => void) | null = null;

  constructor(
    private api: ApiClient,
    private geo: GeoProvider,
    doc: Document = document,
    private now: () => number = () => Math.floor(Date.now() / 1000),
  ) {
    this.root = doc.createElement("form");
    this.root.className = "submit-console";
    this.root.innerHTML = `
      <div class="rating-row" role="radiogroup" aria-label="smell rating"></div>
      <input name="smell_description" placeholder="describe the smell (e.g. industrial, rotten egg)" maxlength="1024">
      <input name="symptoms" placeholder="symptoms (e.g. headache, irritation)" maxlength="1024">
      <input name="notes" placeholder="notes for the health department" maxlength="1024">
      <label><input type="checkbox" name="send_to_agency" checked> share with the health agency</label>
      <button type="submit" disabled>Submit report</button>
      <p class="submit-status" role="status"></p>
    `;
    const row = this.root.querySelector(".rating-row")!;
    for (let r = 1; r <= 5; r++) {
      const btn = doc.createElement("button");
      btn.type = "button";
      btn.textContent = String(r);
      btn.className = "rating-btn";
      btn.dataset.rating = String(r);
      btn.addEventListener("click", () => this.setRating(r));
      row.appendChild(btn);
    }
    this.root.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
  }

  setRating(rating: number): void {
    this.rating = rating;
    for (const btn of this.root.querySelectorAll<HTMLButtonElement>(".rating-btn")) {
      btn.classList.toggle("active", Number(btn.dataset.rating) === rating);
    }
    this.submitButton.disabled = false;
  }

  get submitButton(): HTMLButtonElement {
    return this.root.querySelector('button[type="submit"]')!;
  }

  private field(name: string): string {
    return (this.root.querySelector(`[name="${name}"]`) as HTMLInputElement).value;
  }

  private status(text: string, isError = false): void {
    const el = this.root.querySelector(".submit-status") as HTMLElement;
    el.textContent = text;
    el.classList.toggle("error", isError);
  }

  async buildPayload(): Promise<SubmitPayload> {
    if (this.rating === null) throw new Error("rating required");
    const pos = await this.geo();
    return {
      rating: this.rating,
      latitude: pos.latitude,
      longitude: pos.longitude,
      smell_description: this.field("smell_description"),
      symptoms: this.field("symptoms"),
      notes: this.field("notes"),
      send_to_agency: (this.root.querySelector('[name="send_to_agency"]') as HTMLInputElement)
        .checked,
      client_time: this.now(),
    };
  }

  async submit(): Promise<SubmitResult | null> {
    if (this.rating === null) return null;
    const payload = await this.buildPayload();
    try {
      const out = await this.api.submitReport(payload);
      this.status("Report received - thank you! It is on the map now.");
      this.onSubmitted?.({ reportId: out.report_id }, payload);
      await this.flushQueue();
      return { reportId: out.report_id };
    } catch (err) {
      if (err instanceof ApiError) {
        this.status(err.message, true);
        return null; // validation problem: surface inline, nothing queued
      }
      this.queue.push(payload);
      this.status("Offline - report queued, will retry.", true);
      return null;
    }
  }

  async flushQueue(): Promise<number> {
    let sent = 0;
    const pending = this.queue;
    this.queue = [];
    for (const payload of pending) {
      try {
        await this.api.submitReport(payload);
        sent += 1;
      } catch {
        this.queue.push(payload);
      }
    }
    return sent;
  }

  get queuedCount(): number {
    return this.queue.length;
  }
}
