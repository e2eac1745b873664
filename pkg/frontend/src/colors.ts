/** Color scales shared with the server-side config: rating colors follow the
 * five-step air-quality-index styling, timeline squares darken with the log
 * of the daily report count. All functions here are pure. */

const RATING_COLORS: Record<number, string> = {
  1: "#9cd84e",
  2: "#facf39",
  3: "#f99049",
  4: "#f65e5f",
  5: "#8f3f97",
};

export function ratingColor(rating: number): string {
  const color = RATING_COLORS[rating];
  if (!color) throw new Error(`rating out of range: ${rating}`);
  return color;
}

/** PM2.5-style breakpoints (ug/m3, 24h) to AQI bucket colors. */
const AQI_BREAKPOINTS: Array<[number, string]> = [
  [12.0, "#00e400"],
  [35.4, "#ffff00"],
  [55.4, "#ff7e00"],
  [150.4, "#ff0000"],
  [250.4, "#8f3f97"],
  [Infinity, "#7e0023"],
];

export function aqiColor(pm: number): string {
  for (const [limit, color] of AQI_BREAKPOINTS) {
    if (pm <= limit) return color;
  }
  return AQI_BREAKPOINTS[AQI_BREAKPOINTS.length - 1][1];
}

/** Grayscale shade for a timeline square: darkness grows with
 * log(1 + dailyCount), saturating at `saturation` reports. */
export function timelineShade(dailyCount: number, saturation = 200): string {
  const t = Math.min(1, Math.log1p(Math.max(0, dailyCount)) / Math.log1p(saturation));
  const v = Math.round(240 - t * 200);
  return `rgb(${v},${v},${v})`;
}
