import { timelineShade } from "./colors";
import { DAY, type Report } from "./types";

export interface TimelineDay {
  day0: number;
  count: number;
}

export function dailyCounts(reports: Report[], firstDay: number, nDays: number): TimelineDay[] {
  const days: TimelineDay[] = [];
  for (let i = 0; i < nDays; i++) {
    const day0 = firstDay + i * DAY;
    days.push({
      day0,
      count: reports.filter((r) => r.observed_at >= day0 && r.observed_at < day0 + DAY).length,
    });
  }
  return days;
}

/** Row of grayscale squares, one per day; darkness tracks report volume. */
export class Timeline {
  readonly root: HTMLElement;
  onSelect: ((day0: number) => void) | null = null;

  constructor(doc: Document = document) {
    this.root = doc.createElement("div");
    this.root.className = "timeline";
  }

  render(days: TimelineDay[], selected: number | null): void {
    const doc = this.root.ownerDocument;
    this.root.replaceChildren();
    for (const day of days) {
      const square = doc.createElement("button");
      square.className = "timeline-square" + (day.day0 === selected ? " selected" : "");
      square.style.backgroundColor = timelineShade(day.count);
      square.title = new Date(day.day0 * 1000).toISOString().slice(0, 10);
      square.dataset.day = String(day.day0);
      square.addEventListener("click", () => this.onSelect?.(day.day0));
      this.root.appendChild(square);
    }
  }
}
