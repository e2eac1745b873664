import { ApiClient } from "./api";
import { MapPane } from "./map";
import { buildFrames, PlaybackEngine } from "./playback";
import { AppStore } from "./state";
import { SubmitConsole } from "./submit";
import { dailyCounts, Timeline } from "./timeline";
import { DAY, type Report } from "./types";

const STATIONS = new Map([
  ["alpha", { lat: 40.47, lon: -79.96 }],
  ["beta", { lat: 40.37, lon: -79.86 }],
]);

export function mountApp(root: HTMLElement, api = new ApiClient()): AppStore {
  const store = new AppStore(api);
  const map = new MapPane();
  const timeline = new Timeline();
  const playback = new PlaybackEngine();
  const submit = new SubmitConsole(api, async () => {
    return new Promise((resolve, reject) => {
      if (!navigator.geolocation) {
        reject(new Error("geolocation unavailable; enter a location"));
        return;
      }
      navigator.geolocation.getCurrentPosition(
        (pos) => resolve({ latitude: pos.coords.latitude, longitude: pos.coords.longitude }),
        (err) => reject(err),
      );
    });
  });

  const playBtn = root.ownerDocument.createElement("button");
  playBtn.textContent = "Play 24h";
  playBtn.className = "play-btn";

  root.append(submit.root, map.svg, playBtn, timeline.root);

  map.onMarkerClick = (report: Report) => {
    void store.logView("MAP_CLICK", report.observed_at);
  };

  timeline.onSelect = (day0) => {
    void store.selectDay(day0);
  };

  playBtn.addEventListener("click", () => {
    const frames = buildFrames(store.state.selectedDay, store.state.reports, store.state.sensors);
    void store.logView("PLAYBACK", frames[0].hourStart);
    playback.play(frames);
  });

  playback.onFrame((frame) => map.renderFrame(frame, STATIONS));

  store.subscribe((state) => {
    map.clear();
    for (const report of state.reports) map.addReportMarker(report);
    const firstDay = state.selectedDay - 13 * DAY;
    timeline.render(dailyCounts(state.reports, firstDay, 14), state.selectedDay);
  });

  submit.onSubmitted = () => {
    // Not a data-viewing action: logged as the submission itself, then the
    // map refreshes so the reporter sees their marker counted.
    void api.logInteraction({ kind: "REPORT_SUBMIT", data_at: Math.floor(Date.now() / 1000) });
    void store.selectDay(store.state.selectedDay);
  };

  const today = Math.floor(Date.now() / 1000);
  void store.selectDay(today - (today % DAY));
  return store;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mountApp(document.getElementById("app")!);
}
