"""Domain model of an object-based audio scene.

A scene bundles audio components (objects and channel beds) with the
metadata that governs playback personalization: selectable presets,
per-component interactivity limits, loudness metadata, and dynamic gain
tracks. All types are immutable value objects; the operations here are
pure functions, so scenes can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Union

from .dynamics import DrcProfile, DynamicGainTrack
from .errors import ObaError
from .layouts import STEREO, SpeakerLayout

# Preset kinds with auto-selection semantics. Any other string is a valid
# "other" kind: allowed in scenes but never matched by preferences.
STANDARD_PRESET_KINDS = frozenset(
    {
        "default",
        "high_quality_loudspeakers",
        "hearing_impaired",
        "audio_description",
        "spoken_subtitles",
        "simplified_language",
    }
)

CONTENT_KINDS = frozenset(
    {
        "dialogue",
        "music",
        "effects",
        "audio_description",
        "spoken_subtitles",
        "mixed_bed",
    }
)


def wrap_azimuth(degrees: float) -> float:
    """Normalize an angle to the (-180, 180] interval."""
    wrapped = ((degrees + 180.0) % 360.0) - 180.0
    return 180.0 if wrapped == -180.0 else wrapped


@dataclass(frozen=True)
class Position:
    """Object location: azimuth 0 = front, positive = left; distance 1 = reference."""

    azimuth: float = 0.0
    elevation: float = 0.0
    distance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "azimuth", wrap_azimuth(float(self.azimuth)))


@dataclass(frozen=True)
class InteractivityLimits:
    """Allowed user adjustment ranges for one component.

    Gain limits are dB offsets around the authored level and must bracket
    zero. The azimuth range is a symmetric half-width; elevation limits are
    offsets relative to the authored elevation.
    """

    gain_min: float = 0.0
    gain_max: float = 0.0
    azimuth_range: float = 0.0
    elevation_min: float = 0.0
    elevation_max: float = 0.0
    on_off_allowed: bool = False

    def allows_position(self) -> bool:
        return (
            self.azimuth_range > 0.0
            or self.elevation_min != 0.0
            or self.elevation_max != 0.0
        )

    def is_subrange_of(self, outer: "InteractivityLimits") -> bool:
        return (
            self.gain_min >= outer.gain_min
            and self.gain_max <= outer.gain_max
            and self.azimuth_range <= outer.azimuth_range
            and self.elevation_min >= outer.elevation_min
            and self.elevation_max <= outer.elevation_max
            and (outer.on_off_allowed or not self.on_off_allowed)
        )


@dataclass(frozen=True)
class LabelSet:
    """Localized display strings keyed by BCP-47-style language tags."""

    entries: Mapping[str, str]
    default_language: str = "en"

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))

    @classmethod
    def of(cls, text: str, languages: Iterable[str] = ("en",)) -> "LabelSet":
        langs = list(languages)
        return cls({lang: text for lang in langs}, default_language=langs[0])


def resolve_label(labels: LabelSet, language: str) -> str:
    """Look up a display string: exact tag, then primary-subtag match, then default."""
    if language in labels.entries:
        return labels.entries[language]
    primary = language.split("-", 1)[0].lower()
    for tag, text in labels.entries.items():
        if tag.split("-", 1)[0].lower() == primary:
            return text
    return labels.entries[labels.default_language]


@dataclass(frozen=True)
class ObjectGeometry:
    position: Position = field(default_factory=Position)


@dataclass(frozen=True)
class BedGeometry:
    layout: SpeakerLayout = STEREO


Geometry = Union[ObjectGeometry, BedGeometry]


@dataclass(frozen=True)
class ComponentGroup:
    """One addressable component of the mix: a panned object or a channel bed."""

    component_id: str
    labels: LabelSet
    content_kind: str
    tracks: tuple[int, ...]
    geometry: Geometry
    default_gain: float = 0.0
    interactivity: InteractivityLimits = field(default_factory=InteractivityLimits)
    measured_loudness: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))

    @property
    def is_object(self) -> bool:
        return isinstance(self.geometry, ObjectGeometry)


@dataclass(frozen=True)
class PresetMember:
    component_id: str
    static_gain: float = 0.0
    dynamic_gain: Optional[str] = None  # id into AudioScene.gain_tracks
    interactivity_override: Optional[InteractivityLimits] = None


@dataclass(frozen=True)
class Preset:
    """A selectable version of the scene: member components plus their gains."""

    preset_id: str
    labels: LabelSet
    kind: str
    members: tuple[PresetMember, ...]
    measured_loudness: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))

    def member_for(self, component_id: str) -> Optional[PresetMember]:
        for member in self.members:
            if member.component_id == component_id:
                return member
        return None


@dataclass(frozen=True)
class AudioScene:
    scene_id: str
    sample_rate: int
    frame_length: int
    components: tuple[ComponentGroup, ...]
    presets: tuple[Preset, ...]
    default_preset_id: str
    gain_tracks: Mapping[str, DynamicGainTrack] = field(default_factory=dict)
    drc_profiles: Mapping[str, DrcProfile] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "presets", tuple(self.presets))
        object.__setattr__(self, "gain_tracks", dict(self.gain_tracks))
        object.__setattr__(self, "drc_profiles", dict(self.drc_profiles))

    def component(self, component_id: str) -> ComponentGroup:
        for comp in self.components:
            if comp.component_id == component_id:
                return comp
        raise ObaError("unknown-component", f"no component {component_id!r}")

    def preset(self, preset_id: str) -> Preset:
        for preset in self.presets:
            if preset.preset_id == preset_id:
                return preset
        raise ObaError("preset-not-found", f"no preset {preset_id!r}")

    def has_preset(self, preset_id: str) -> bool:
        return any(p.preset_id == preset_id for p in self.presets)

    def effective_limits(
        self, preset: Preset, component_id: str
    ) -> InteractivityLimits:
        """Limits governing user interaction with a component under a preset."""
        component = self.component(component_id)
        member = preset.member_for(component_id)
        if member is not None and member.interactivity_override is not None:
            return member.interactivity_override
        return component.interactivity

    def with_loudness(
        self,
        component_loudness: Mapping[str, Optional[float]],
        preset_loudness: Mapping[str, Optional[float]],
    ) -> "AudioScene":
        """Copy of the scene with measured loudness stamped on."""
        components = tuple(
            replace(c, measured_loudness=component_loudness.get(c.component_id, c.measured_loudness))
            for c in self.components
        )
        presets = tuple(
            replace(p, measured_loudness=preset_loudness.get(p.preset_id, p.measured_loudness))
            for p in self.presets
        )
        return replace(self, components=components, presets=presets)


@dataclass(frozen=True)
class UserState:
    """Everything the listener controls.

    Gain and position offsets are stored post-clamp: whoever ingests a user
    request (player protocol, CLI flags) clamps it first, so downstream
    consumers never see out-of-range values.
    """

    selected_preset: Optional[str] = None
    kind_preferences: tuple[str, ...] = ()
    gain_offsets: Mapping[str, float] = field(default_factory=dict)
    position_offsets: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    muted: frozenset[str] = frozenset()
    target_layout: SpeakerLayout = STEREO
    target_loudness: float = -24.0
    drc_profile: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind_preferences", tuple(self.kind_preferences))
        object.__setattr__(self, "gain_offsets", dict(self.gain_offsets))
        object.__setattr__(
            self,
            "position_offsets",
            {k: (float(a), float(e)) for k, (a, e) in dict(self.position_offsets).items()},
        )
        object.__setattr__(self, "muted", frozenset(self.muted))


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    code: str
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "error")

    @property
    def warnings(self) -> tuple[ValidationIssue, ...]:
        return tuple(i for i in self.issues if i.severity == "warning")

    @property
    def ok(self) -> bool:
        return not self.errors


def clamp_gain(limits: InteractivityLimits, requested: float) -> float:
    """Clamp a requested gain offset (dB) into the allowed interactivity range."""
    return min(max(requested, limits.gain_min), limits.gain_max)


def clamp_position(
    limits: InteractivityLimits,
    base: Position,
    requested_offset: tuple[float, float],
) -> Position:
    """Apply a user position offset, clamped to the allowed ranges.

    The azimuth offset is taken modulo a full turn before clamping, so an
    offset of +200 degrees under a +/-180 range wraps to -160 rather than
    pinning at +180. Elevation limits are relative to the base elevation;
    the result is kept inside the physical elevation range.
    """
    az_offset, el_offset = requested_offset
    az_offset = wrap_azimuth(az_offset)
    az_offset = min(max(az_offset, -limits.azimuth_range), limits.azimuth_range)
    el_offset = min(max(el_offset, limits.elevation_min), limits.elevation_max)
    elevation = min(max(base.elevation + el_offset, -90.0), 90.0)
    return Position(
        azimuth=wrap_azimuth(base.azimuth + az_offset),
        elevation=elevation,
        distance=base.distance,
    )


def select_preset(scene: AudioScene, user: UserState) -> str:
    """Resolve which preset to play for a given user.

    An explicit selection wins; otherwise the first entry of the user's
    kind preference list that any preset matches; otherwise the scene
    default. Kinds outside the standard set never auto-match.
    """
    if user.selected_preset is not None:
        if not scene.has_preset(user.selected_preset):
            raise ObaError(
                "preset-not-found", f"no preset {user.selected_preset!r} in scene"
            )
        return user.selected_preset
    for kind in user.kind_preferences:
        if kind not in STANDARD_PRESET_KINDS:
            continue
        for preset in scene.presets:
            if preset.kind == kind:
                return preset.preset_id
    return scene.default_preset_id


class _Issues:
    def __init__(self):
        self.items: list[ValidationIssue] = []

    def error(self, code: str, path: str, message: str):
        self.items.append(ValidationIssue("error", code, path, message))

    def warning(self, code: str, path: str, message: str):
        self.items.append(ValidationIssue("warning", code, path, message))


def _validate_limits(limits: InteractivityLimits, path: str, issues: _Issues):
    if not (limits.gain_min <= 0.0 <= limits.gain_max):
        issues.error(
            "invalid-limits", path, f"gain range [{limits.gain_min}, {limits.gain_max}] must bracket 0"
        )
    if not (0.0 <= limits.azimuth_range <= 180.0):
        issues.error("invalid-limits", path, f"azimuth range {limits.azimuth_range} outside [0, 180]")
    if not (-90.0 <= limits.elevation_min <= limits.elevation_max <= 90.0):
        issues.error(
            "invalid-limits",
            path,
            f"elevation range [{limits.elevation_min}, {limits.elevation_max}] invalid",
        )


def _validate_labels(labels: LabelSet, path: str, issues: _Issues, scene_languages: set[str]):
    if not labels.entries:
        issues.error("empty-labels", path, "label set has no entries")
        return
    if labels.default_language not in labels.entries:
        issues.error(
            "missing-default-label",
            path,
            f"default language {labels.default_language!r} has no entry",
        )
    for lang in sorted(scene_languages - set(labels.entries)):
        issues.warning("missing-label", path, f"no label for language {lang!r}")


def validate_scene(scene: AudioScene) -> ValidationReport:
    """Check every scene invariant; returns a report instead of raising.

    The report is empty of errors exactly when the scene satisfies all
    structural invariants and carries measured loudness on every component
    and preset, i.e. when it is fit for export.
    """
    issues = _Issues()

    scene_languages: set[str] = set()
    for comp in scene.components:
        scene_languages.update(comp.labels.entries)
    for preset in scene.presets:
        scene_languages.update(preset.labels.entries)

    if scene.sample_rate <= 0:
        issues.error("invalid-scene", "/sample_rate", "sample rate must be positive")
    if scene.frame_length <= 0:
        issues.error("invalid-scene", "/frame_length", "frame length must be positive")

    seen_components: set[str] = set()
    seen_tracks: dict[int, str] = {}
    for ci, comp in enumerate(scene.components):
        path = f"/components/{ci}"
        if comp.component_id in seen_components:
            issues.error("duplicate-id", path, f"duplicate component id {comp.component_id!r}")
        seen_components.add(comp.component_id)
        _validate_labels(comp.labels, path + "/labels", issues, scene_languages)
        if comp.content_kind not in CONTENT_KINDS:
            issues.error(
                "invalid-content-kind", path, f"unknown content kind {comp.content_kind!r}"
            )
        if isinstance(comp.geometry, ObjectGeometry):
            if len(comp.tracks) != 1:
                issues.error(
                    "bad-track-count",
                    path,
                    f"object component has {len(comp.tracks)} tracks, expected 1",
                )
            pos = comp.geometry.position
            if not (-90.0 <= pos.elevation <= 90.0):
                issues.error("invalid-position", path, f"elevation {pos.elevation} outside [-90, 90]")
            if pos.distance < 0.0:
                issues.error("invalid-position", path, f"distance {pos.distance} negative")
        else:
            expected = comp.geometry.layout.channel_count
            if len(comp.tracks) != expected:
                issues.error(
                    "bad-track-count",
                    path,
                    f"bed has {len(comp.tracks)} tracks, layout "
                    f"{comp.geometry.layout.layout_id} needs {expected}",
                )
        for track in comp.tracks:
            if track < 0:
                issues.error("bad-track-count", path, f"negative track index {track}")
            elif track in seen_tracks:
                issues.error(
                    "track-overlap",
                    path,
                    f"track {track} already used by component {seen_tracks[track]!r}",
                )
            else:
                seen_tracks[track] = comp.component_id
        _validate_limits(comp.interactivity, path + "/interactivity", issues)
        if comp.measured_loudness is None:
            issues.error(
                "missing-loudness",
                path,
                f"component {comp.component_id!r} has no measured loudness",
            )

    if not scene.presets:
        issues.error("empty-presets", "/presets", "scene has no presets")

    referenced: set[str] = set()
    seen_presets: set[str] = set()
    seen_kinds: dict[str, str] = {}
    for pi, preset in enumerate(scene.presets):
        path = f"/presets/{pi}"
        if preset.preset_id in seen_presets:
            issues.error("duplicate-id", path, f"duplicate preset id {preset.preset_id!r}")
        seen_presets.add(preset.preset_id)
        _validate_labels(preset.labels, path + "/labels", issues, scene_languages)
        if preset.kind in STANDARD_PRESET_KINDS:
            if preset.kind in seen_kinds:
                issues.error(
                    "duplicate-kind",
                    path,
                    f"kind {preset.kind!r} already used by preset {seen_kinds[preset.kind]!r}",
                )
            seen_kinds[preset.kind] = preset.preset_id
        if not preset.members:
            issues.error("empty-members", path, "preset has no members")
        for mi, member in enumerate(preset.members):
            mpath = f"{path}/members/{mi}"
            if member.component_id not in seen_components:
                issues.error(
                    "dangling-component-ref",
                    mpath,
                    f"member references unknown component {member.component_id!r}",
                )
            else:
                referenced.add(member.component_id)
                if member.interactivity_override is not None:
                    _validate_limits(member.interactivity_override, mpath, issues)
                    outer = scene.component(member.component_id).interactivity
                    if not member.interactivity_override.is_subrange_of(outer):
                        issues.error(
                            "override-not-subrange",
                            mpath,
                            "interactivity override exceeds the component's limits",
                        )
            if member.dynamic_gain is not None and member.dynamic_gain not in scene.gain_tracks:
                issues.error(
                    "dangling-track-ref",
                    mpath,
                    f"member references unknown gain track {member.dynamic_gain!r}",
                )
        if preset.measured_loudness is None:
            issues.error(
                "missing-loudness",
                path,
                f"preset {preset.preset_id!r} has no measured loudness",
            )

    if scene.presets and scene.default_preset_id not in seen_presets:
        issues.error(
            "default-preset-missing",
            "/default_preset_id",
            f"default preset {scene.default_preset_id!r} does not exist",
        )

    for ci, comp in enumerate(scene.components):
        if comp.component_id not in referenced:
            issues.error(
                "orphan-component",
                f"/components/{ci}",
                f"component {comp.component_id!r} is not used by any preset",
            )

    return ValidationReport(tuple(issues.items))
