import { describe, expect, it } from "vitest";

import { aqiColor, ratingColor, timelineShade } from "../src/colors";
import { MapPane } from "../src/map";
import { makeReport } from "./helpers";

describe("ratingColor", () => {
  it("is a pure function of rating across randomized reports", () => {
    const seen = new Map<number, string>();
    let state = 12345;
    const nextRating = () => {
      state = (state * 48271) % 2147483647;
      return (state % 5) + 1;
    };
    for (let i = 0; i < 100; i++) {
      const rating = nextRating();
      const color = ratingColor(rating);
      if (seen.has(rating)) {
        expect(color).toBe(seen.get(rating));
      }
      seen.set(rating, color);
    }
    expect(seen.size).toBe(5);
    expect(new Set(seen.values()).size).toBe(5); // distinct colors per rating
  });

  it("rejects out-of-range ratings", () => {
    expect(() => ratingColor(0)).toThrow();
    expect(() => ratingColor(6)).toThrow();
  });
});

describe("rendered markers", () => {
  it("marker fill equals ratingColor(rating) for 100 randomized reports", () => {
    const pane = new MapPane(640, 480, undefined, document);
    let state = 99;
    for (let i = 0; i < 100; i++) {
      state = (state * 48271) % 2147483647;
      const rating = (state % 5) + 1;
      pane.clear();
      pane.addReportMarker(makeReport({ rating, report_id: `r${i}` }));
      const marker = pane.svg.querySelector(".report-marker")!;
      expect(marker.getAttribute("fill")).toBe(ratingColor(rating));
    }
  });
});

describe("aqiColor", () => {
  it("buckets by breakpoints", () => {
    expect(aqiColor(5)).toBe("#00e400");
    expect(aqiColor(30)).toBe("#ffff00");
    expect(aqiColor(500)).toBe("#7e0023");
  });
});

describe("timelineShade", () => {
  it("darkens monotonically with count", () => {
    const gray = (css: string) => Number(css.match(/\d+/)![0]);
    let prev = Infinity;
    for (const count of [0, 1, 3, 10, 50, 200]) {
      const v = gray(timelineShade(count));
      expect(v).toBeLessThanOrEqual(prev);
      prev = v;
    }
  });
});
