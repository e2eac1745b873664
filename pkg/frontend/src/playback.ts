import { DAY, HOUR, type Report, type SensorReading } from "./types";

export interface Frame {
  hourStart: number;
  /** Reports visible in this frame: everything observed earlier in the day,
   * so markers accumulate as the day plays. */
  reports: Report[];
  /** Latest sensor reading per (station, channel) at or before this hour. */
  sensors: Map<string, SensorReading>;
}

export function dayStart(t: number, utcOffsetSeconds = 0): number {
  const local = t + utcOffsetSeconds;
  return local - (local % DAY) - utcOffsetSeconds;
}

/** Build the 24 hourly animation frames for one day. A report becomes
 * visible at its own hour and stays for the rest of the day; sensor markers
 * show each station's most recent reading, and absent hours stay absent
 * rather than rendering as zeros. */
export function buildFrames(
  day0: number,
  reports: Report[],
  sensors: SensorReading[],
): Frame[] {
  const frames: Frame[] = [];
  const dayReports = reports
    .filter((r) => r.observed_at >= day0 && r.observed_at < day0 + DAY)
    .sort((a, b) => a.observed_at - b.observed_at);
  const daySensors = sensors
    .filter((s) => s.observed_at >= day0 && s.observed_at < day0 + DAY)
    .sort((a, b) => a.observed_at - b.observed_at);
  for (let h = 0; h < 24; h++) {
    const hourStart = day0 + h * HOUR;
    const visible = dayReports.filter((r) => r.observed_at < hourStart + HOUR);
    const latest = new Map<string, SensorReading>();
    for (const s of daySensors) {
      if (s.observed_at <= hourStart && s.value !== null) {
        latest.set(`${s.station_id}:${s.channel}`, s);
      }
    }
    frames.push({ hourStart, reports: visible, sensors: latest });
  }
  return frames;
}

export type FrameListener = (frame: Frame, index: number) => void;

/** Drives the 24-frame animation; the tick scheduler is injectable so tests
 * can run it synchronously. */
export class PlaybackEngine {
  private listeners: FrameListener[] = [];
  framesPlayed = 0;

  constructor(
    private schedule: (fn: () => void, ms: number) => unknown = (fn, ms) =>
      setTimeout(fn, ms),
    private frameMs = 400,
  ) {}

  onFrame(listener: FrameListener): void {
    this.listeners.push(listener);
  }

  play(frames: Frame[]): void {
    this.framesPlayed = 0;
    const step = (i: number) => {
      if (i >= frames.length) return;
      this.framesPlayed += 1;
      for (const listener of this.listeners) listener(frames[i], i);
      this.schedule(() => step(i + 1), this.frameMs);
    };
    step(0);
  }
}
