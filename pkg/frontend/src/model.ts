// UI state: the latest server snapshot plus per-control optimistic edits.
//
// A control with in-flight commands keeps showing its local value until the
// server echo for that control arrives; the echo (and every snapshot after
// it) then wins. That gives optimistic slider movement without feedback
// loops, and convergence to the server's clamped value within one snapshot.

import type {
  Command,
  ComponentSummary,
  PresetSummary,
  ServerEvent,
  Snapshot,
} from "./protocol.js";

export interface UiModel {
  connected: boolean;
  snapshot: Snapshot | null;
  /** control key -> unacknowledged commands in flight */
  pending: Record<string, number>;
  /** control key -> optimistic value shown while pending */
  local: Record<string, number>;
  lastError: string | null;
}

export const initialModel: UiModel = {
  connected: false,
  snapshot: null,
  pending: {},
  local: {},
  lastError: null,
};

export const gainKey = (cid: string) => `gain:${cid}`;
export const azimuthKey = (cid: string) => `az:${cid}`;
export const elevationKey = (cid: string) => `el:${cid}`;
export const LOUDNESS_KEY = "target-loudness";

export function clamp(value: number, lo: number, hi: number): number {
  return Math.min(Math.max(value, lo), hi);
}

function echoKeys(event: ServerEvent): string[] {
  const cid = event.component_id;
  switch (event.command) {
    case "set_gain":
      return cid ? [gainKey(cid)] : [];
    case "set_position":
      return cid ? [azimuthKey(cid), elevationKey(cid)] : [];
    case "set_target_loudness":
      return [LOUDNESS_KEY];
    default:
      return [];
  }
}

export function setConnected(model: UiModel, connected: boolean): UiModel {
  // a reconnect refetches the snapshot; any stale optimistic edits die here
  if (!connected) {
    return { ...model, connected, pending: {}, local: {} };
  }
  return { ...model, connected };
}

export function applyServerEvent(model: UiModel, event: ServerEvent): UiModel {
  if (event.type === "error") {
    return { ...model, lastError: event.message ?? event.code ?? "error" };
  }
  let next = model;
  if (event.type === "state-changed") {
    for (const key of echoKeys(event)) {
      const count = next.pending[key] ?? 0;
      if (count > 0) {
        const pending = { ...next.pending };
        if (count === 1) delete pending[key];
        else pending[key] = count - 1;
        next = { ...next, pending };
      }
    }
    if (event.state) {
      next = mergeSnapshot(next, event.state);
    }
  }
  return next;
}

export function mergeSnapshot(model: UiModel, snapshot: Snapshot): UiModel {
  const local: Record<string, number> = {};
  for (const [key, value] of Object.entries(model.local)) {
    if ((model.pending[key] ?? 0) > 0) {
      local[key] = value; // still in flight: keep showing the drag position
    }
  }
  return { ...model, snapshot, local };
}

/** Record an optimistic edit; the value shown until the echo lands. */
export function localEdit(model: UiModel, key: string, value: number): UiModel {
  return { ...model, local: { ...model.local, [key]: value } };
}

/** Count one sent command against a control. */
export function markSent(model: UiModel, key: string): UiModel {
  return {
    ...model,
    pending: { ...model.pending, [key]: (model.pending[key] ?? 0) + 1 },
  };
}

// ---------------------------------------------------------------------------
// derived view data

export interface PresetCard {
  presetId: string;
  label: string;
  kind: string;
  active: boolean;
}

export function presetCards(model: UiModel): PresetCard[] {
  const scene = model.snapshot?.scene;
  if (!scene) return [];
  return scene.presets.map((preset: PresetSummary) => ({
    presetId: preset.preset_id,
    label: preset.label,
    kind: preset.kind,
    active: preset.preset_id === model.snapshot?.active_preset,
  }));
}

export interface SliderSpec {
  key: string;
  min: number;
  max: number;
  value: number;
}

export interface ComponentControl {
  componentId: string;
  label: string;
  gain: SliderSpec | null; // null when the range collapses to a point
  azimuth: SliderSpec | null;
  elevation: SliderSpec | null;
  mute: { allowed: boolean; muted: boolean };
}

function controlValue(model: UiModel, key: string, serverValue: number): number {
  const local = model.local[key];
  return local !== undefined ? local : serverValue;
}

/** Advanced-menu controls for the components of the active preset. */
export function componentControls(model: UiModel): ComponentControl[] {
  const snapshot = model.snapshot;
  const scene = snapshot?.scene;
  if (!snapshot || !scene) return [];
  const active = scene.presets.find(
    (p: PresetSummary) => p.preset_id === snapshot.active_preset,
  );
  const memberIds = active ? active.members : [];
  const controls: ComponentControl[] = [];
  for (const component of scene.components) {
    if (!memberIds.includes(component.component_id)) continue;
    controls.push(buildControl(model, snapshot, component));
  }
  return controls;
}

function buildControl(
  model: UiModel,
  snapshot: Snapshot,
  component: ComponentSummary,
): ComponentControl {
  const cid = component.component_id;
  const limits = component.limits;
  const hasGainRange = limits.gain_max_db > limits.gain_min_db;
  const gain: SliderSpec | null = hasGainRange
    ? {
        key: gainKey(cid),
        min: limits.gain_min_db,
        max: limits.gain_max_db,
        value: controlValue(model, gainKey(cid), snapshot.user.gain_offsets[cid] ?? 0),
      }
    : null;

  let azimuth: SliderSpec | null = null;
  let elevation: SliderSpec | null = null;
  if (component.has_position_interactivity) {
    const offset = snapshot.user.position_offsets[cid];
    if (limits.azimuth_range_deg > 0) {
      azimuth = {
        key: azimuthKey(cid),
        min: -limits.azimuth_range_deg,
        max: limits.azimuth_range_deg,
        value: controlValue(model, azimuthKey(cid), offset?.azimuth_deg ?? 0),
      };
    }
    if (limits.elevation_max_deg > limits.elevation_min_deg) {
      elevation = {
        key: elevationKey(cid),
        min: limits.elevation_min_deg,
        max: limits.elevation_max_deg,
        value: controlValue(model, elevationKey(cid), offset?.elevation_deg ?? 0),
      };
    }
  }
  return {
    componentId: cid,
    label: component.label,
    gain,
    azimuth,
    elevation,
    mute: {
      allowed: component.on_off_allowed,
      muted: snapshot.user.muted.includes(cid),
    },
  };
}

// ---------------------------------------------------------------------------
// command factories: every emitted value is clamped to the displayed bounds,
// so the UI cannot send anything outside the metadata limits

export interface EditRequest {
  model: UiModel;
  key: string;
  command: Command;
}

export function requestGain(
  model: UiModel,
  componentId: string,
  rawValue: number,
): EditRequest | null {
  const control = findControl(model, componentId);
  if (!control?.gain) return null;
  const value = clamp(rawValue, control.gain.min, control.gain.max);
  const key = gainKey(componentId);
  return {
    model: localEdit(model, key, value),
    key,
    command: { action: "set_gain", component_id: componentId, gain_db: value },
  };
}

export function requestPosition(
  model: UiModel,
  componentId: string,
  rawAzimuth: number,
  rawElevation: number,
): EditRequest | null {
  const control = findControl(model, componentId);
  if (!control || (!control.azimuth && !control.elevation)) return null;
  const azimuth = control.azimuth
    ? clamp(rawAzimuth, control.azimuth.min, control.azimuth.max)
    : 0;
  const elevation = control.elevation
    ? clamp(rawElevation, control.elevation.min, control.elevation.max)
    : 0;
  let next = model;
  if (control.azimuth) next = localEdit(next, azimuthKey(componentId), azimuth);
  if (control.elevation) next = localEdit(next, elevationKey(componentId), elevation);
  return {
    model: next,
    key: azimuthKey(componentId),
    command: {
      action: "set_position",
      component_id: componentId,
      azimuth_deg: azimuth,
      elevation_deg: elevation,
    },
  };
}

export function requestTargetLoudness(model: UiModel, rawValue: number): EditRequest {
  const value = clamp(rawValue, -40, -10);
  return {
    model: localEdit(model, LOUDNESS_KEY, value),
    key: LOUDNESS_KEY,
    command: { action: "set_target_loudness", target_lkfs: value },
  };
}

function findControl(model: UiModel, componentId: string): ComponentControl | null {
  return (
    componentControls(model).find((c) => c.componentId === componentId) ?? null
  );
}
