"""High-level scene construction for the accessibility workflows.

Two canned flows: a dialog-enhancement scene (a dipped background bed plus
a voice-over object, delivered as "Default mix" and "Dialog+" presets) and
an audio-description scene (a film-mix bed plus an AD voice object whose
preset ducks the film mix via a dynamic gain track converted from DAW
automation). Both leave loudness stamping to ``stamp_loudness`` so the
measurement pass stays explicit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import AutomationCurve, simplify_automation
from .errors import ObaError
from .layouts import LAYOUTS, STEREO, SpeakerLayout, layout_for_channel_count
from .loudness import measure_integrated
from .render import ArraySource, RenderRequest, render_offline
from .scene import (
    AudioScene,
    BedGeometry,
    ComponentGroup,
    InteractivityLimits,
    LabelSet,
    ObjectGeometry,
    Position,
    Preset,
    PresetMember,
    UserState,
    validate_scene,
)

DEFAULT_FRAME_LENGTH = 1024
REFERENCE_LAYOUT = STEREO  # preset loudness is defined at this layout


@dataclass
class BedSpec:
    """Channel-bed component input: audio as (samples, channels)."""

    audio: np.ndarray
    label: str = "Background"
    content_kind: str = "mixed_bed"
    default_gain: float = 0.0


@dataclass
class VoiceSpec:
    """Mono object component input."""

    audio: np.ndarray
    label: str = "Voice-over"
    content_kind: str = "dialogue"
    position: Position = field(default_factory=Position)
    default_gain: float = 0.0


def _bed_audio(spec: BedSpec) -> np.ndarray:
    audio = np.asarray(spec.audio, dtype=np.float64)
    if audio.ndim == 1:
        audio = audio[:, np.newaxis]
    if audio.size == 0:
        raise ObaError("missing-audio", f"bed {spec.label!r} has no audio")
    return audio


def _voice_audio(spec: VoiceSpec) -> np.ndarray:
    audio = np.asarray(spec.audio, dtype=np.float64)
    if audio.ndim != 1:
        if audio.ndim == 2 and audio.shape[1] == 1:
            audio = audio[:, 0]
        else:
            raise ObaError("missing-audio", f"voice {spec.label!r} must be mono")
    if audio.size == 0:
        raise ObaError("missing-audio", f"voice {spec.label!r} has no audio")
    return audio


def _assemble(bed: np.ndarray, voice: np.ndarray) -> np.ndarray:
    length = max(bed.shape[0], voice.shape[0])
    combined = np.zeros((length, bed.shape[1] + 1))
    combined[: bed.shape[0], : bed.shape[1]] = bed
    combined[: voice.shape[0], bed.shape[1]] = voice
    return combined


def author_dialog_plus_scene(
    bed: BedSpec,
    dialog: VoiceSpec,
    *,
    interactivity_db: float = 9.0,
    dialogplus_offset_db: float = 6.0,
    languages: Sequence[str] = ("en",),
    sample_rate: int = 48000,
    frame_length: int = DEFAULT_FRAME_LENGTH,
    scene_id: str = "dialog-plus-scene",
) -> tuple[AudioScene, np.ndarray]:
    """Build the dialog-enhancement scene and its assembled track stack.

    Produces presets "Default mix" and "Dialog+"; the dialog object allows
    +/- ``interactivity_db`` of user gain in both, and "Dialog+" raises the
    dialog by ``dialogplus_offset_db`` statically. Loudness is not stamped
    yet.
    """
    bed_audio = _bed_audio(bed)
    dialog_audio = _voice_audio(dialog)
    bed_layout = layout_for_channel_count(bed_audio.shape[1])
    languages = tuple(languages)

    bed_component = ComponentGroup(
        component_id="bed",
        labels=LabelSet.of(bed.label, languages),
        content_kind=bed.content_kind,
        tracks=tuple(range(bed_audio.shape[1])),
        geometry=BedGeometry(bed_layout),
        default_gain=bed.default_gain,
    )
    dialog_component = ComponentGroup(
        component_id="dialog",
        labels=LabelSet.of(dialog.label, languages),
        content_kind=dialog.content_kind,
        tracks=(bed_audio.shape[1],),
        geometry=ObjectGeometry(dialog.position),
        default_gain=dialog.default_gain,
        interactivity=InteractivityLimits(
            gain_min=-interactivity_db, gain_max=interactivity_db
        ),
    )
    presets = (
        Preset(
            preset_id="default-mix",
            labels=LabelSet.of("Default mix", languages),
            kind="high_quality_loudspeakers",
            members=(PresetMember("bed"), PresetMember("dialog")),
        ),
        Preset(
            preset_id="dialog-plus",
            labels=LabelSet.of("Dialog+", languages),
            kind="hearing_impaired",
            members=(
                PresetMember("bed"),
                PresetMember("dialog", static_gain=dialogplus_offset_db),
            ),
        ),
    )
    scene = AudioScene(
        scene_id=scene_id,
        sample_rate=sample_rate,
        frame_length=frame_length,
        components=(bed_component, dialog_component),
        presets=presets,
        default_preset_id="default-mix",
    )
    return scene, _assemble(bed_audio, dialog_audio)


def author_ad_scene(
    film_mix: BedSpec,
    ad_voice: VoiceSpec,
    automation: AutomationCurve,
    *,
    ad_gain_db: float = 6.0,
    az_range: float = 180.0,
    el_min: float = 0.0,
    el_max: float = 30.0,
    epsilon_db: float = 0.1,
    languages: Sequence[str] = ("en",),
    sample_rate: int = 48000,
    frame_length: int = DEFAULT_FRAME_LENGTH,
    scene_id: str = "ad-scene",
) -> tuple[AudioScene, np.ndarray]:
    """Build the audio-description scene and its assembled track stack.

    The "Default" preset carries the film mix untouched. The "Audio
    description" preset adds the AD voice and ducks the film mix with the
    dynamic gain track converted from the supplied volume automation.
    """
    if not automation.samples:
        raise ObaError("malformed-automation", "automation curve is empty")
    film_audio = _bed_audio(film_mix)
    ad_audio = _voice_audio(ad_voice)
    film_layout = layout_for_channel_count(film_audio.shape[1])
    languages = tuple(languages)

    duck_track = simplify_automation(automation, epsilon_db, track_id="ad-duck")

    film_component = ComponentGroup(
        component_id="film-mix",
        labels=LabelSet.of(film_mix.label, languages),
        content_kind=film_mix.content_kind,
        tracks=tuple(range(film_audio.shape[1])),
        geometry=BedGeometry(film_layout),
        default_gain=film_mix.default_gain,
    )
    ad_component = ComponentGroup(
        component_id="ad-voice",
        labels=LabelSet.of(ad_voice.label, languages),
        content_kind=ad_voice.content_kind,
        tracks=(film_audio.shape[1],),
        geometry=ObjectGeometry(ad_voice.position),
        default_gain=ad_voice.default_gain,
        interactivity=InteractivityLimits(
            gain_min=-ad_gain_db,
            gain_max=ad_gain_db,
            azimuth_range=az_range,
            elevation_min=el_min,
            elevation_max=el_max,
        ),
    )
    presets = (
        Preset(
            preset_id="default",
            labels=LabelSet.of("Default", languages),
            kind="high_quality_loudspeakers",
            members=(PresetMember("film-mix"),),
        ),
        Preset(
            preset_id="audio-description",
            labels=LabelSet.of("Audio description", languages),
            kind="audio_description",
            members=(
                PresetMember("film-mix", dynamic_gain="ad-duck"),
                PresetMember("ad-voice"),
            ),
        ),
    )
    scene = AudioScene(
        scene_id=scene_id,
        sample_rate=sample_rate,
        frame_length=frame_length,
        components=(film_component, ad_component),
        presets=presets,
        default_preset_id="default",
        gain_tracks={"ad-duck": duck_track},
    )
    return scene, _assemble(film_audio, ad_audio)


def _render_for_measurement(
    scene: AudioScene, source: ArraySource, preset_id: str
) -> np.ndarray:
    signal, _ = render_offline(
        RenderRequest(
            scene,
            source,
            UserState(target_layout=REFERENCE_LAYOUT),
            preset_id=preset_id,
            compensation=False,
        )
    )
    return signal


def stamp_loudness(scene: AudioScene, audio: np.ndarray) -> AudioScene:
    """Measure and store loudness for every component and preset.

    Component loudness comes from a solo render (the component alone at
    its default gain); preset loudness from the preset at default user
    state. Both at the stereo reference layout with compensation and DRC
    disabled. Values are stored at two-decimal precision; a component
    below the gate stores no value, which later fails validation.
    """
    source = ArraySource(np.asarray(audio, dtype=np.float64), scene.sample_rate, scene.frame_length)

    component_loudness: dict[str, Optional[float]] = {}
    for component in scene.components:
        solo_preset = Preset(
            preset_id="__solo__",
            labels=LabelSet.of("solo"),
            kind="default",
            members=(PresetMember(component.component_id),),
        )
        solo_scene = dataclasses.replace(
            scene, presets=(solo_preset,), default_preset_id="__solo__"
        )
        signal = _render_for_measurement(solo_scene, source, "__solo__")
        measurement = measure_integrated(signal, REFERENCE_LAYOUT, scene.sample_rate)
        component_loudness[component.component_id] = (
            round(measurement.integrated, 2) if measurement.valid else None
        )

    preset_loudness: dict[str, Optional[float]] = {}
    for preset in scene.presets:
        signal = _render_for_measurement(scene, source, preset.preset_id)
        measurement = measure_integrated(signal, REFERENCE_LAYOUT, scene.sample_rate)
        preset_loudness[preset.preset_id] = (
            round(measurement.integrated, 2) if measurement.valid else None
        )

    return scene.with_loudness(component_loudness, preset_loudness)


@dataclass(frozen=True)
class MonitorRow:
    preset_id: str
    layout_id: str
    user_case: str  # "default" | "all-min" | "all-max"
    loudness: Optional[float]
    loudness_deviation: Optional[float]
    clipped_samples: Optional[int]
    note: str = ""

    def to_json_dict(self) -> dict:
        return {
            "preset_id": self.preset_id,
            "layout_id": self.layout_id,
            "user_case": self.user_case,
            "loudness_lkfs": None if self.loudness is None else round(self.loudness, 2),
            "loudness_deviation_lu": None
            if self.loudness_deviation is None
            else round(self.loudness_deviation, 2),
            "clipped_samples": self.clipped_samples,
            "note": self.note,
        }


@dataclass(frozen=True)
class MonitorReport:
    rows: tuple[MonitorRow, ...]

    @property
    def total_clipped(self) -> int:
        return sum(r.clipped_samples or 0 for r in self.rows)

    def to_json_dict(self) -> dict:
        return {"rows": [r.to_json_dict() for r in self.rows]}


def _extreme_user(scene: AudioScene, preset_id: str, case: str, layout: SpeakerLayout) -> UserState:
    preset = scene.preset(preset_id)
    gain_offsets = {}
    position_offsets = {}
    for member in preset.members:
        limits = scene.effective_limits(preset, member.component_id)
        if case == "all-min":
            gain_offsets[member.component_id] = limits.gain_min
            position_offsets[member.component_id] = (-limits.azimuth_range, limits.elevation_min)
        else:
            gain_offsets[member.component_id] = limits.gain_max
            position_offsets[member.component_id] = (limits.azimuth_range, limits.elevation_max)
    return UserState(
        gain_offsets=gain_offsets,
        position_offsets=position_offsets,
        target_layout=layout,
    )


def monitor_report(
    scene: AudioScene, audio: np.ndarray, target_loudness: float = -24.0
) -> MonitorReport:
    """Render every preset x layout x interactivity-extreme combination.

    Reports measured loudness, its deviation from the playback target, and
    clip counts; layouts a bed cannot downmix to are listed with a note
    instead of failing the whole report. Non-mutating.
    """
    source = ArraySource(np.asarray(audio, dtype=np.float64), scene.sample_rate, scene.frame_length)
    rows = []
    for preset in scene.presets:
        for layout in LAYOUTS.values():
            for case in ("default", "all-min", "all-max"):
                if case == "default":
                    user = UserState(target_layout=layout, target_loudness=target_loudness)
                else:
                    user = dataclasses.replace(
                        _extreme_user(scene, preset.preset_id, case, layout),
                        target_loudness=target_loudness,
                    )
                try:
                    signal, stats = render_offline(
                        RenderRequest(scene, source, user, preset_id=preset.preset_id)
                    )
                except ObaError as exc:
                    if exc.code == "unsupported-downmix":
                        rows.append(
                            MonitorRow(
                                preset.preset_id, layout.layout_id, case,
                                None, None, None, note=f"skipped: {exc.message}",
                            )
                        )
                        continue
                    raise
                deviation = (
                    None
                    if stats.integrated_loudness is None
                    else stats.integrated_loudness - target_loudness
                )
                rows.append(
                    MonitorRow(
                        preset.preset_id,
                        layout.layout_id,
                        case,
                        stats.integrated_loudness,
                        deviation,
                        stats.clipped_samples,
                    )
                )
    return MonitorReport(tuple(rows))
