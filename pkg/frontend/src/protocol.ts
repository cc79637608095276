// Wire types for the player service: GET /state snapshots, /events pushes,
// and the commands POSTed to /command. Mirrors the service JSON exactly.

export interface LimitSet {
  gain_min_db: number;
  gain_max_db: number;
  azimuth_range_deg: number;
  elevation_min_deg: number;
  elevation_max_deg: number;
}

export interface ComponentSummary {
  component_id: string;
  label: string;
  content_kind: string;
  is_object: boolean;
  on_off_allowed: boolean;
  limits: LimitSet;
  has_position_interactivity: boolean;
}

export interface PresetSummary {
  preset_id: string;
  label: string;
  kind: string;
  members: string[];
  measured_loudness_lkfs: number | null;
}

export interface SceneSummary {
  scene_id: string;
  presets: PresetSummary[];
  components: ComponentSummary[];
  layouts: string[];
  drc_profiles: string[];
}

export interface PositionOffset {
  azimuth_deg: number;
  elevation_deg: number;
}

export interface UserStateDoc {
  selected_preset: string | null;
  kind_preferences: string[];
  gain_offsets: Record<string, number>;
  position_offsets: Record<string, PositionOffset>;
  muted: string[];
  target_layout: string;
  target_loudness_lkfs: number;
  drc_profile: string | null;
}

export interface Meters {
  momentary_lkfs: number | null;
  clipped_samples: number;
}

export interface Snapshot {
  transport: "stopped" | "playing" | "paused";
  position_frame: number;
  frame_count: number;
  active_preset: string | null;
  ui_language: string;
  user: UserStateDoc;
  scene: SceneSummary | null;
  meters: Meters;
}

export type Command =
  | { action: "play" }
  | { action: "pause" }
  | { action: "seek"; frame: number }
  | { action: "select_preset"; preset_id: string }
  | { action: "set_kind_preferences"; kinds: string[] }
  | { action: "set_gain"; component_id: string; gain_db: number }
  | {
      action: "set_position";
      component_id: string;
      azimuth_deg: number;
      elevation_deg: number;
    }
  | { action: "set_mute"; component_id: string; muted: boolean }
  | { action: "set_layout"; layout_id: string }
  | { action: "set_target_loudness"; target_lkfs: number }
  | { action: "set_drc"; profile_id: string | null }
  | { action: "set_ui_language"; language: string };

export interface ServerEvent {
  type: "state-changed" | "error" | "eof";
  state?: Snapshot;
  command?: string;
  code?: string;
  message?: string;
  component_id?: string;
  applied_gain_db?: number;
  applied_azimuth_deg?: number;
  applied_elevation_deg?: number;
  applied_muted?: boolean;
}

// The set of preset kinds the settings panel offers for auto-selection.
export const SELECTABLE_KINDS = [
  "hearing_impaired",
  "audio_description",
  "spoken_subtitles",
  "simplified_language",
  "high_quality_loudspeakers",
] as const;
