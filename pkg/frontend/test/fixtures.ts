// Snapshot fixtures mirroring the two canned authoring workflows, exactly
// as the service serializes them.

import type { Snapshot } from "../src/protocol.js";

export function dialogPlusSnapshot(): Snapshot {
  return {
    transport: "stopped",
    position_frame: 0,
    frame_count: 563,
    active_preset: "default-mix",
    ui_language: "en",
    user: {
      selected_preset: null,
      kind_preferences: [],
      gain_offsets: {},
      position_offsets: {},
      muted: [],
      target_layout: "stereo_2_0",
      target_loudness_lkfs: -24,
      drc_profile: null,
    },
    scene: {
      scene_id: "dialog-plus-scene",
      presets: [
        {
          preset_id: "default-mix",
          label: "Default mix",
          kind: "high_quality_loudspeakers",
          members: ["bed", "dialog"],
          measured_loudness_lkfs: -22.51,
        },
        {
          preset_id: "dialog-plus",
          label: "Dialog+",
          kind: "hearing_impaired",
          members: ["bed", "dialog"],
          measured_loudness_lkfs: -19.97,
        },
      ],
      components: [
        {
          component_id: "bed",
          label: "Background",
          content_kind: "mixed_bed",
          is_object: false,
          on_off_allowed: false,
          limits: {
            gain_min_db: 0,
            gain_max_db: 0,
            azimuth_range_deg: 0,
            elevation_min_deg: 0,
            elevation_max_deg: 0,
          },
          has_position_interactivity: false,
        },
        {
          component_id: "dialog",
          label: "Voice-over",
          content_kind: "dialogue",
          is_object: true,
          on_off_allowed: true,
          limits: {
            gain_min_db: -9,
            gain_max_db: 9,
            azimuth_range_deg: 0,
            elevation_min_deg: 0,
            elevation_max_deg: 0,
          },
          has_position_interactivity: false,
        },
      ],
      layouts: ["mono_1_0", "stereo_2_0"],
      drc_profiles: ["limited", "noisy-environment", "none"],
    },
    meters: { momentary_lkfs: null, clipped_samples: 0 },
  };
}

export function adSnapshot(): Snapshot {
  const snapshot = dialogPlusSnapshot();
  return {
    ...snapshot,
    active_preset: "audio-description",
    scene: {
      scene_id: "ad-scene",
      presets: [
        {
          preset_id: "default",
          label: "Default",
          kind: "high_quality_loudspeakers",
          members: ["film-mix"],
          measured_loudness_lkfs: -23.3,
        },
        {
          preset_id: "audio-description",
          label: "Audio description",
          kind: "audio_description",
          members: ["film-mix", "ad-voice"],
          measured_loudness_lkfs: -21.8,
        },
      ],
      components: [
        {
          component_id: "film-mix",
          label: "Film mix",
          content_kind: "mixed_bed",
          is_object: false,
          on_off_allowed: false,
          limits: {
            gain_min_db: 0,
            gain_max_db: 0,
            azimuth_range_deg: 0,
            elevation_min_deg: 0,
            elevation_max_deg: 0,
          },
          has_position_interactivity: false,
        },
        {
          component_id: "ad-voice",
          label: "Audio description",
          content_kind: "audio_description",
          is_object: true,
          on_off_allowed: false,
          limits: {
            gain_min_db: -6,
            gain_max_db: 6,
            azimuth_range_deg: 180,
            elevation_min_deg: 0,
            elevation_max_deg: 30,
          },
          has_position_interactivity: true,
        },
      ],
      layouts: ["mono_1_0", "stereo_2_0"],
      drc_profiles: ["limited", "noisy-environment", "none"],
    },
  };
}
