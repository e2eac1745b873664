import { aqiColor, ratingColor } from "./colors";
import type { Frame } from "./playback";
import { DEFAULT_BOUNDS, type MapBounds, type Report } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface Projected {
  x: number;
  y: number;
}

export function project(
  lat: number,
  lon: number,
  width: number,
  height: number,
  bounds: MapBounds = DEFAULT_BOUNDS,
): Projected {
  const x = ((lon - bounds.lonMin) / (bounds.lonMax - bounds.lonMin)) * width;
  const y = (1 - (lat - bounds.latMin) / (bounds.latMax - bounds.latMin)) * height;
  return { x, y };
}

/** SVG map pane: triangular report markers colored by rating, sensor circles
 * colored by AQI bucket, and wind arrows per station. */
export class MapPane {
  readonly svg: SVGSVGElement;
  private markerLayer: SVGGElement;
  private sensorLayer: SVGGElement;
  onMarkerClick: ((report: Report) => void) | null = null;

  constructor(
    private width = 640,
    private height = 480,
    private bounds: MapBounds = DEFAULT_BOUNDS,
    doc: Document = document,
  ) {
    this.svg = doc.createElementNS(SVG_NS, "svg") as SVGSVGElement;
    this.svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
    this.svg.setAttribute("class", "map-pane");
    this.sensorLayer = doc.createElementNS(SVG_NS, "g") as SVGGElement;
    this.markerLayer = doc.createElementNS(SVG_NS, "g") as SVGGElement;
    this.svg.appendChild(this.sensorLayer);
    this.svg.appendChild(this.markerLayer);
  }

  get markerCount(): number {
    return this.markerLayer.childNodes.length;
  }

  clear(): void {
    this.markerLayer.replaceChildren();
    this.sensorLayer.replaceChildren();
  }

  addReportMarker(report: Report): void {
    if (report.latitude === null || report.longitude === null) return;
    const { x, y } = project(report.latitude, report.longitude, this.width, this.height, this.bounds);
    const doc = this.svg.ownerDocument;
    const tri = doc.createElementNS(SVG_NS, "polygon");
    const size = 7;
    tri.setAttribute(
      "points",
      `${x},${y - size} ${x - size},${y + size} ${x + size},${y + size}`,
    );
    tri.setAttribute("fill", ratingColor(report.rating));
    tri.setAttribute("class", "report-marker");
    tri.setAttribute("data-report-id", report.report_id);
    tri.addEventListener("click", () => this.onMarkerClick?.(report));
    this.markerLayer.appendChild(tri);
  }

  /** Render one playback frame: accumulated report markers plus the current
   * sensor circles and wind arrows. */
  renderFrame(frame: Frame, stations: Map<string, { lat: number; lon: number }>): void {
    this.clear();
    for (const report of frame.reports) this.addReportMarker(report);
    const doc = this.svg.ownerDocument;
    for (const [stationId, pos] of stations) {
      const { x, y } = project(pos.lat, pos.lon, this.width, this.height, this.bounds);
      const pm = frame.sensors.get(`${stationId}:PM`);
      if (pm && pm.value !== null) {
        const circle = doc.createElementNS(SVG_NS, "circle");
        circle.setAttribute("cx", String(x));
        circle.setAttribute("cy", String(y));
        circle.setAttribute("r", "9");
        circle.setAttribute("fill", aqiColor(pm.value));
        circle.setAttribute("class", "sensor-circle");
        this.sensorLayer.appendChild(circle);
      }
      const dir = frame.sensors.get(`${stationId}:WIND_DIR_DEG`);
      if (dir && dir.value !== null) {
        const arrow = doc.createElementNS(SVG_NS, "line");
        const theta = ((dir.value - 90) * Math.PI) / 180;
        arrow.setAttribute("x1", String(x));
        arrow.setAttribute("y1", String(y));
        arrow.setAttribute("x2", String(x + 16 * Math.cos(theta)));
        arrow.setAttribute("y2", String(y + 16 * Math.sin(theta)));
        arrow.setAttribute("stroke", "#1f77d0");
        arrow.setAttribute("stroke-width", "2");
        arrow.setAttribute("class", "wind-arrow");
        this.sensorLayer.appendChild(arrow);
      }
    }
  }
}
