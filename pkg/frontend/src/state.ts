import type { ApiClient } from "./api";
import type { InteractionKind, Report, SensorReading } from "./types";

export interface AppState {
  selectedDay: number;
  reports: Report[];
  sensors: SensorReading[];
  pendingRating: number | null;
  lastSubmitted: Report | null;
}

type Listener = (state: AppState) => void;

/** Single store for all view state; every data-viewing action funnels
 * through `logView`, which emits exactly one interaction event. */
export class AppStore {
  state: AppState = {
    selectedDay: 0,
    reports: [],
    sensors: [],
    pendingRating: null,
    lastSubmitted: null,
  };
  private listeners: Listener[] = [];
  viewEventsSent = 0;

  constructor(private api: ApiClient) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  patch(partial: Partial<AppState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  /** One data-viewing action -> one InteractionEvent. Logging failures never
   * break the view. */
  async logView(kind: InteractionKind, dataAt: number): Promise<void> {
    this.viewEventsSent += 1;
    try {
      await this.api.logInteraction({ kind, data_at: dataAt });
    } catch {
      // analytics must never take the UI down
    }
  }

  async selectDay(day0: number): Promise<void> {
    this.patch({ selectedDay: day0 });
    const [reports, sensors] = await Promise.all([
      this.api.fetchReports(day0, day0 + 24 * 3600),
      this.api.fetchSensors(day0, day0 + 24 * 3600),
    ]);
    this.patch({ reports, sensors });
    await this.logView("TIMELINE_SELECT", day0);
  }
}
