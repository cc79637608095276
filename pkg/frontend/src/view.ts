// DOM layer. Two layers as on a receiver: the preset list up front, and an
// advanced menu with per-object controls, plus settings and a transport
// bar. The view owns no state: it renders a UiModel and forwards
// interactions; slider bounds always come from the snapshot's metadata.

import {
  ComponentControl,
  EditRequest,
  PresetCard,
  SliderSpec,
  UiModel,
  componentControls,
  presetCards,
  requestGain,
  requestPosition,
  requestTargetLoudness,
} from "./model.js";
import type { Command } from "./protocol.js";
import { SELECTABLE_KINDS } from "./protocol.js";

export interface ViewHandlers {
  send(command: Command): void;
  edit(request: EditRequest | null): void;
}

const KIND_NAMES: Record<string, string> = {
  hearing_impaired: "Dialog enhancement",
  audio_description: "Audio description",
  spoken_subtitles: "Spoken subtitles",
  simplified_language: "Simplified language",
  high_quality_loudspeakers: "High-quality loudspeakers",
  default: "Default",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function setSliderValue(input: HTMLInputElement, value: number): void {
  if (document.activeElement !== input) {
    input.value = String(value);
  }
}

export class View {
  private root: HTMLElement;
  private handlers: ViewHandlers;
  private banner!: HTMLElement;
  private title!: HTMLElement;
  private playButton!: HTMLButtonElement;
  private seek!: HTMLInputElement;
  private timeLabel!: HTMLElement;
  private meterBar!: HTMLElement;
  private meterText!: HTMLElement;
  private clipLabel!: HTMLElement;
  private presetSection!: HTMLElement;
  private advancedSection!: HTMLElement;
  private settingsSection!: HTMLElement;
  private errorLabel!: HTMLElement;

  private cardButtons = new Map<string, HTMLButtonElement>();
  private sliders = new Map<string, HTMLInputElement>();
  private muteButtons = new Map<string, HTMLButtonElement>();
  private renderedScene = "";
  private renderedPreset: string | null = null;
  private interactive: Element[] = [];

  constructor(root: HTMLElement, handlers: ViewHandlers) {
    this.root = root;
    this.handlers = handlers;
    this.mountChrome();
  }

  private mountChrome(): void {
    this.root.textContent = "";
    this.banner = el("div", "banner hidden", "Connection lost, reconnecting…");
    this.root.appendChild(this.banner);

    const header = el("header");
    this.title = el("h1", "scene-title", "Object-based player");
    header.appendChild(this.title);

    const transport = el("div", "transport");
    this.playButton = el("button", "play", "Play");
    this.playButton.addEventListener("click", () => {
      const transportState = this.lastModel?.snapshot?.transport;
      this.handlers.send({ action: transportState === "playing" ? "pause" : "play" });
    });
    transport.appendChild(this.playButton);

    this.seek = el("input", "seek");
    this.seek.type = "range";
    this.seek.min = "0";
    this.seek.addEventListener("change", () => {
      this.handlers.send({ action: "seek", frame: Number(this.seek.value) });
    });
    transport.appendChild(this.seek);

    this.timeLabel = el("span", "time", "0:00 / 0:00");
    transport.appendChild(this.timeLabel);

    const meter = el("div", "meter");
    this.meterBar = el("div", "meter-bar");
    meter.appendChild(this.meterBar);
    this.meterText = el("span", "meter-text", "–");
    meter.appendChild(this.meterText);
    transport.appendChild(meter);

    this.clipLabel = el("span", "clips", "");
    transport.appendChild(this.clipLabel);
    header.appendChild(transport);
    this.root.appendChild(header);

    this.errorLabel = el("div", "error-line hidden");
    this.root.appendChild(this.errorLabel);

    this.presetSection = el("section", "presets");
    this.root.appendChild(this.presetSection);

    this.advancedSection = el("section", "advanced");
    this.root.appendChild(this.advancedSection);

    this.settingsSection = el("section", "settings");
    this.root.appendChild(this.settingsSection);
  }

  private lastModel: UiModel | null = null;

  render(model: UiModel): void {
    this.lastModel = model;
    const snapshot = model.snapshot;
    this.banner.classList.toggle("hidden", model.connected);
    this.errorLabel.classList.toggle("hidden", !model.lastError);
    this.errorLabel.textContent = model.lastError ?? "";

    for (const node of this.interactive) {
      (node as HTMLButtonElement).disabled = !model.connected;
    }
    this.playButton.disabled = !model.connected || !snapshot?.scene;
    this.seek.disabled = !model.connected || !snapshot?.scene;

    if (!snapshot?.scene) {
      this.title.textContent = "No scene loaded";
      return;
    }
    this.title.textContent = snapshot.scene.scene_id;

    const sceneFingerprint =
      snapshot.scene.scene_id + ":" + snapshot.scene.presets.map((p) => p.preset_id).join(",");
    if (sceneFingerprint !== this.renderedScene) {
      this.renderedScene = sceneFingerprint;
      this.renderedPreset = null;
      this.mountPresetCards(presetCards(this.lastModel));
      this.mountSettings(model);
    }
    if (snapshot.active_preset !== this.renderedPreset) {
      this.renderedPreset = snapshot.active_preset;
      this.mountAdvanced(componentControls(model));
    }
    this.updateValues(model);
  }

  // -- preset layer --------------------------------------------------------

  private mountPresetCards(cards: PresetCard[]): void {
    this.presetSection.textContent = "";
    this.cardButtons.clear();
    const heading = el("h2", undefined, "Presets");
    this.presetSection.appendChild(heading);
    const grid = el("div", "preset-grid");
    for (const card of cards) {
      const button = el("button", "preset-card");
      button.dataset.presetId = card.presetId;
      button.appendChild(el("span", "preset-label", card.label));
      button.appendChild(el("span", "preset-kind", KIND_NAMES[card.kind] ?? card.kind));
      button.addEventListener("click", () => {
        this.handlers.send({ action: "select_preset", preset_id: card.presetId });
      });
      this.cardButtons.set(card.presetId, button);
      this.interactive.push(button);
      grid.appendChild(button);
    }
    this.presetSection.appendChild(grid);
  }

  // -- advanced menu ---------------------------------------------------------

  private mountAdvanced(controls: ComponentControl[]): void {
    this.advancedSection.textContent = "";
    this.sliders.clear();
    this.muteButtons.clear();
    this.advancedSection.appendChild(el("h2", undefined, "Advanced"));
    for (const control of controls) {
      this.advancedSection.appendChild(this.buildComponentRow(control));
    }
  }

  private buildComponentRow(control: ComponentControl): HTMLElement {
    const row = el("div", "component-row");
    row.dataset.componentId = control.componentId;
    const head = el("div", "component-head");
    head.appendChild(el("span", "component-label", control.label));
    if (control.mute.allowed) {
      const mute = el("button", "mute", "Mute");
      mute.addEventListener("click", () => {
        const muted =
          this.lastModel?.snapshot?.user.muted.includes(control.componentId) ?? false;
        this.handlers.send({
          action: "set_mute",
          component_id: control.componentId,
          muted: !muted,
        });
      });
      this.muteButtons.set(control.componentId, mute);
      this.interactive.push(mute);
      head.appendChild(mute);
    }
    row.appendChild(head);

    if (control.gain) {
      row.appendChild(
        this.buildSlider("Prominence", control.gain, "dB", (value) =>
          this.handlers.edit(
            requestGain(this.lastModel!, control.componentId, value),
          ),
        ),
      );
    }
    if (control.azimuth) {
      row.appendChild(
        this.buildSlider("Horizontal", control.azimuth, "°", (value) =>
          this.handlers.edit(
            requestPosition(
              this.lastModel!,
              control.componentId,
              value,
              this.currentValue(control.elevation),
            ),
          ),
        ),
      );
    }
    if (control.elevation) {
      row.appendChild(
        this.buildSlider("Vertical", control.elevation, "°", (value) =>
          this.handlers.edit(
            requestPosition(
              this.lastModel!,
              control.componentId,
              this.currentValue(control.azimuth),
              value,
            ),
          ),
        ),
      );
    }
    return row;
  }

  private currentValue(spec: SliderSpec | null): number {
    if (!spec) return 0;
    const input = this.sliders.get(spec.key);
    return input ? Number(input.value) : spec.value;
  }

  private buildSlider(
    label: string,
    spec: SliderSpec,
    unit: string,
    onInput: (value: number) => void,
  ): HTMLElement {
    const wrap = el("div", "slider-row");
    wrap.appendChild(el("span", "slider-label", label));
    wrap.appendChild(el("span", "slider-min", `${spec.min}${unit}`));
    const input = el("input", "slider");
    input.type = "range";
    input.min = String(spec.min);
    input.max = String(spec.max);
    input.step = "0.1";
    input.value = String(spec.value);
    input.dataset.key = spec.key;
    input.addEventListener("input", () => onInput(Number(input.value)));
    this.sliders.set(spec.key, input);
    this.interactive.push(input);
    wrap.appendChild(input);
    wrap.appendChild(el("span", "slider-max", `${spec.max}${unit}`));
    const valueLabel = el("span", "slider-value", `${spec.value}${unit}`);
    valueLabel.dataset.valueFor = spec.key;
    wrap.appendChild(valueLabel);
    return wrap;
  }

  // -- settings ---------------------------------------------------------------

  private mountSettings(model: UiModel): void {
    const scene = model.snapshot?.scene;
    if (!scene) return;
    this.settingsSection.textContent = "";
    this.settingsSection.appendChild(el("h2", undefined, "Settings"));

    const prefs = el("div", "setting kind-prefs");
    prefs.appendChild(el("span", "setting-label", "Auto-select"));
    for (const kind of SELECTABLE_KINDS) {
      const label = el("label", "kind-option");
      const box = el("input");
      box.type = "checkbox";
      box.dataset.kind = kind;
      box.addEventListener("change", () => {
        const kinds = Array.from(
          prefs.querySelectorAll<HTMLInputElement>("input[data-kind]"),
        )
          .filter((node) => node.checked)
          .map((node) => node.dataset.kind!);
        this.handlers.send({ action: "set_kind_preferences", kinds });
      });
      this.interactive.push(box);
      label.appendChild(box);
      label.appendChild(el("span", undefined, KIND_NAMES[kind] ?? kind));
      prefs.appendChild(label);
    }
    this.settingsSection.appendChild(prefs);

    const language = el("div", "setting");
    language.appendChild(el("span", "setting-label", "Language"));
    const languageSelect = el("select", "language");
    for (const tag of ["en", "de", "fr", "es"]) {
      const option = el("option", undefined, tag);
      option.value = tag;
      languageSelect.appendChild(option);
    }
    languageSelect.addEventListener("change", () => {
      this.handlers.send({ action: "set_ui_language", language: languageSelect.value });
    });
    this.interactive.push(languageSelect);
    language.appendChild(languageSelect);
    this.settingsSection.appendChild(language);

    const layout = el("div", "setting");
    layout.appendChild(el("span", "setting-label", "Speakers"));
    const layoutSelect = el("select", "layout");
    for (const layoutId of scene.layouts) {
      const option = el("option", undefined, layoutId);
      option.value = layoutId;
      layoutSelect.appendChild(option);
    }
    layoutSelect.addEventListener("change", () => {
      this.handlers.send({ action: "set_layout", layout_id: layoutSelect.value });
    });
    this.interactive.push(layoutSelect);
    layout.appendChild(layoutSelect);
    this.settingsSection.appendChild(layout);

    const loudness = el("div", "setting");
    loudness.appendChild(el("span", "setting-label", "Target loudness"));
    const loudnessInput = el("input", "slider");
    loudnessInput.type = "range";
    loudnessInput.min = "-40";
    loudnessInput.max = "-10";
    loudnessInput.step = "1";
    loudnessInput.dataset.key = "target-loudness";
    loudnessInput.addEventListener("input", () => {
      this.handlers.edit(
        requestTargetLoudness(this.lastModel!, Number(loudnessInput.value)),
      );
    });
    this.sliders.set("target-loudness", loudnessInput);
    this.interactive.push(loudnessInput);
    loudness.appendChild(loudnessInput);
    const loudnessValue = el("span", "slider-value");
    loudnessValue.dataset.valueFor = "target-loudness";
    loudness.appendChild(loudnessValue);
    this.settingsSection.appendChild(loudness);

    const drc = el("div", "setting");
    drc.appendChild(el("span", "setting-label", "Dynamic range"));
    const drcSelect = el("select", "drc");
    const off = el("option", undefined, "off");
    off.value = "";
    drcSelect.appendChild(off);
    for (const profileId of scene.drc_profiles) {
      const option = el("option", undefined, profileId);
      option.value = profileId;
      drcSelect.appendChild(option);
    }
    drcSelect.addEventListener("change", () => {
      this.handlers.send({
        action: "set_drc",
        profile_id: drcSelect.value === "" ? null : drcSelect.value,
      });
    });
    this.interactive.push(drcSelect);
    drc.appendChild(drcSelect);
    this.settingsSection.appendChild(drc);
  }

  // -- incremental updates ------------------------------------------------------

  private updateValues(model: UiModel): void {
    const snapshot = model.snapshot!;
    for (const card of presetCards(model)) {
      const button = this.cardButtons.get(card.presetId);
      button?.classList.toggle("active", card.active);
    }

    for (const control of componentControls(model)) {
      for (const spec of [control.gain, control.azimuth, control.elevation]) {
        if (!spec) continue;
        const input = this.sliders.get(spec.key);
        if (input) setSliderValue(input, spec.value);
        const valueLabel = this.root.querySelector(
          `[data-value-for="${spec.key}"]`,
        );
        if (valueLabel) valueLabel.textContent = spec.value.toFixed(1);
      }
      const mute = this.muteButtons.get(control.componentId);
      if (mute) {
        mute.textContent = control.mute.muted ? "Unmute" : "Mute";
        mute.classList.toggle("muted", control.mute.muted);
      }
    }

    this.playButton.textContent = snapshot.transport === "playing" ? "Pause" : "Play";
    this.seek.max = String(Math.max(snapshot.frame_count - 1, 0));
    setSliderValue(this.seek, snapshot.position_frame);
    this.timeLabel.textContent = this.formatTime(snapshot);

    const loudnessInput = this.sliders.get("target-loudness");
    if (loudnessInput) {
      setSliderValue(
        loudnessInput,
        model.local["target-loudness"] ?? snapshot.user.target_loudness_lkfs,
      );
    }
    const loudnessLabel = this.root.querySelector('[data-value-for="target-loudness"]');
    if (loudnessLabel) {
      loudnessLabel.textContent = `${
        model.local["target-loudness"] ?? snapshot.user.target_loudness_lkfs
      } LKFS`;
    }

    const momentary = snapshot.meters.momentary_lkfs;
    if (snapshot.transport === "playing" && momentary !== null) {
      const fill = Math.min(Math.max((momentary + 60) / 60, 0), 1);
      this.meterBar.style.width = `${(fill * 100).toFixed(1)}%`;
      this.meterText.textContent = `${momentary.toFixed(1)} LKFS`;
    } else if (momentary === null) {
      this.meterBar.style.width = "0%";
      this.meterText.textContent = "–";
    }
    this.clipLabel.textContent =
      snapshot.meters.clipped_samples > 0
        ? `clipped: ${snapshot.meters.clipped_samples}`
        : "";

    for (const box of this.settingsSection.querySelectorAll<HTMLInputElement>(
      "input[data-kind]",
    )) {
      box.checked = snapshot.user.kind_preferences.includes(box.dataset.kind!);
    }
    const languageSelect = this.settingsSection.querySelector<HTMLSelectElement>(
      "select.language",
    );
    if (languageSelect && document.activeElement !== languageSelect) {
      languageSelect.value = snapshot.ui_language;
    }
    const layoutSelect = this.settingsSection.querySelector<HTMLSelectElement>(
      "select.layout",
    );
    if (layoutSelect && document.activeElement !== layoutSelect) {
      layoutSelect.value = snapshot.user.target_layout;
    }
    const drcSelect = this.settingsSection.querySelector<HTMLSelectElement>("select.drc");
    if (drcSelect && document.activeElement !== drcSelect) {
      drcSelect.value = snapshot.user.drc_profile ?? "";
    }
  }

  private formatTime(snapshot: {
    position_frame: number;
    frame_count: number;
  }): string {
    // frame length over sample rate is not in the snapshot; show frames
    return `${snapshot.position_frame} / ${snapshot.frame_count}`;
  }
}
