export interface Report {
  report_id: string;
  observed_at: number;
  zip_code: string;
  rating: number;
  smell_description: string;
  symptoms: string;
  notes: string;
  latitude: number | null;
  longitude: number | null;
}

export interface SensorReading {
  station_id: string;
  channel: string;
  observed_at: number;
  value: number | null;
}

export interface SubmitPayload {
  rating: number;
  latitude: number;
  longitude: number;
  smell_description?: string;
  symptoms?: string;
  notes?: string;
  send_to_agency?: boolean;
  client_time?: number;
}

export type InteractionKind =
  | "MAP_CLICK"
  | "PLAYBACK"
  | "TIMELINE_SELECT"
  | "REPORT_SUBMIT"
  | "OTHER";

export interface InteractionPayload {
  anon_user_id: string;
  kind: InteractionKind;
  data_at?: number;
  hit_at?: number;
}

export const HOUR = 3600;
export const DAY = 24 * HOUR;

/** Geographic box the map projects into view space. */
export interface MapBounds {
  latMin: number;
  latMax: number;
  lonMin: number;
  lonMax: number;
}

export const DEFAULT_BOUNDS: MapBounds = {
  latMin: 40.3,
  latMax: 40.55,
  lonMin: -80.12,
  lonMax: -79.8,
};
