import { describe, expect, it } from "vitest";

import { buildFrames, PlaybackEngine } from "../src/playback";
import { AppStore } from "../src/state";
import { DAY, HOUR } from "../src/types";
import { FakeServer, makeReport } from "./helpers";

const DAY0 = 1_600_000_000 - (1_600_000_000 % DAY);

describe("buildFrames", () => {
  it("a day with no reports still yields 24 empty frames", () => {
    const frames = buildFrames(DAY0, [], []);
    expect(frames).toHaveLength(24);
    expect(frames.every((f) => f.reports.length === 0)).toBe(true);
  });

  it("a report at hour 13 is visible only from frame 13 onward", () => {
    const report = makeReport({ observed_at: DAY0 + 13 * HOUR + 600 });
    const frames = buildFrames(DAY0, [report], []);
    for (let h = 0; h < 24; h++) {
      expect(frames[h].reports.includes(report)).toBe(h >= 13);
    }
  });

  it("missing sensor hours stay absent, not zero", () => {
    const frames = buildFrames(DAY0, [], [
      { station_id: "alpha", channel: "PM", observed_at: DAY0 + 5 * HOUR, value: 9.5 },
      { station_id: "alpha", channel: "PM", observed_at: DAY0 + 9 * HOUR, value: null },
    ]);
    expect(frames[4].sensors.has("alpha:PM")).toBe(false);
    expect(frames[5].sensors.get("alpha:PM")!.value).toBe(9.5);
    expect(frames[9].sensors.get("alpha:PM")!.value).toBe(9.5); // null never overwrites
  });

  it("frames carry consecutive hour starts", () => {
    const frames = buildFrames(DAY0, [], []);
    for (let h = 0; h < 24; h++) {
      expect(frames[h].hourStart).toBe(DAY0 + h * HOUR);
    }
  });
});

describe("PlaybackEngine", () => {
  it("plays exactly 24 frames for a seeded day", () => {
    const engine = new PlaybackEngine((fn) => fn(), 0); // synchronous ticks
    const seen: number[] = [];
    engine.onFrame((_, i) => seen.push(i));
    engine.play(buildFrames(DAY0, [makeReport({ observed_at: DAY0 + HOUR })], []));
    expect(engine.framesPlayed).toBe(24);
    expect(seen).toEqual([...Array(24).keys()]);
  });
});

describe("interaction logging", () => {
  it("each data-viewing action emits exactly one InteractionEvent", async () => {
    const server = new FakeServer();
    server.reports = [makeReport({ observed_at: DAY0 + 2 * HOUR })];
    const store = new AppStore(server.client());

    await store.selectDay(DAY0); // timeline select: one event
    await store.logView("PLAYBACK", DAY0); // playback run: one event
    await store.logView("MAP_CLICK", DAY0 + 2 * HOUR); // marker click: one event

    const events = server.requests.filter((r) => r.path === "/interactions");
    expect(events).toHaveLength(3);
    const kinds = events.map((e) => (e.body as { kind: string }).kind);
    expect(kinds).toEqual(["TIMELINE_SELECT", "PLAYBACK", "MAP_CLICK"]);
    for (const event of events) {
      const body = event.body as { anon_user_id: string; data_at: number };
      expect(body.anon_user_id).toBe("test-user");
      expect(typeof body.data_at).toBe("number");
    }
    expect(store.viewEventsSent).toBe(3);
  });

  it("rendered marker count equals API-returned record count", async () => {
    const server = new FakeServer();
    server.reports = [
      makeReport({ report_id: "a", observed_at: DAY0 + HOUR }),
      makeReport({ report_id: "b", observed_at: DAY0 + 2 * HOUR }),
      makeReport({ report_id: "c", observed_at: DAY0 + 3 * HOUR }),
    ];
    const store = new AppStore(server.client());
    const { MapPane } = await import("../src/map");
    const pane = new MapPane(640, 480, undefined, document);
    store.subscribe((state) => {
      pane.clear();
      for (const report of state.reports) pane.addReportMarker(report);
    });
    await store.selectDay(DAY0);
    expect(pane.markerCount).toBe(3);
  });
});
