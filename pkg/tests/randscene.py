"""Randomized scene generator for round-trip and fuzz testing.

Scenes are structurally arbitrary but schema-complete; every dB/LKFS field
is quantized to two decimals to match the canonical JSON form, so a
write/read cycle must reproduce the scene exactly.
"""

from __future__ import annotations

import numpy as np

from obakit.dynamics import DrcProfile, DynamicGainTrack
from obakit.layouts import MONO, STEREO, SURROUND_5_1
from obakit.scene import (
    AudioScene,
    BedGeometry,
    ComponentGroup,
    InteractivityLimits,
    LabelSet,
    ObjectGeometry,
    Position,
    Preset,
    PresetMember,
    STANDARD_PRESET_KINDS,
    CONTENT_KINDS,
)

_LANGS = ["en", "de", "fr", "es", "fi", "ja"]
_WORDS = ["Mix", "Voice", "Crowd", "Narrator", "Band", "Rain", "Choir", "Echo"]


def _db(rng, lo=-24.0, hi=12.0) -> float:
    return round(float(rng.uniform(lo, hi)), 2)


def _labels(rng) -> LabelSet:
    n = int(rng.integers(1, 4))
    langs = list(rng.choice(_LANGS, size=n, replace=False))
    text = str(rng.choice(_WORDS))
    return LabelSet({lang: f"{text} {lang}" for lang in langs}, default_language=langs[0])


def _limits(rng) -> InteractivityLimits:
    el_lo = round(float(rng.uniform(-45, 0)), 2)
    el_hi = round(float(rng.uniform(0, 45)), 2)
    return InteractivityLimits(
        gain_min=_db(rng, -20, 0),
        gain_max=_db(rng, 0, 20),
        azimuth_range=round(float(rng.uniform(0, 180)), 2),
        elevation_min=el_lo,
        elevation_max=el_hi,
        on_off_allowed=bool(rng.integers(2)),
    )


def _gain_track(rng, track_id: str) -> DynamicGainTrack:
    n = int(rng.integers(2, 8))
    times = np.round(np.sort(rng.uniform(0, 30, size=n)), 4)
    times = np.unique(times)
    if times.size < 2:
        times = np.array([0.0, 1.0])
    gains = [_db(rng, -30, 6) for _ in times]
    return DynamicGainTrack(track_id, tuple(zip(times.tolist(), gains)))


def _drc_profile(rng, profile_id: str) -> DrcProfile:
    xs = [-70.0, round(float(rng.uniform(-50, -20)), 2), 0.0]
    gains = [_db(rng, -6, 6)]
    for x0, x1 in zip(xs, xs[1:]):
        ceiling = gains[-1] + (x1 - x0) - 0.01
        gains.append(round(min(float(rng.uniform(-18, 6)), ceiling), 2))
    return DrcProfile(
        profile_id,
        tuple(zip(xs, gains)),
        attack=round(float(rng.uniform(0.5, 50)), 2),
        release=round(float(rng.uniform(20, 500)), 2),
    )


def random_scene(rng: np.random.Generator) -> AudioScene:
    n_components = int(rng.integers(1, 5))
    components = []
    next_track = 0
    for i in range(n_components):
        if rng.integers(2):
            geometry = ObjectGeometry(
                Position(
                    azimuth=float(rng.uniform(-179.9, 180.0)),
                    elevation=float(rng.uniform(-90, 90)),
                    distance=round(float(rng.uniform(0.2, 3.0)), 3),
                )
            )
            tracks = (next_track,)
            next_track += 1
        else:
            layout = [MONO, STEREO, SURROUND_5_1][int(rng.integers(3))]
            geometry = BedGeometry(layout)
            tracks = tuple(range(next_track, next_track + layout.channel_count))
            next_track += layout.channel_count
        components.append(
            ComponentGroup(
                component_id=f"comp-{i}",
                labels=_labels(rng),
                content_kind=str(rng.choice(sorted(CONTENT_KINDS))),
                tracks=tracks,
                geometry=geometry,
                default_gain=_db(rng, -12, 6),
                interactivity=_limits(rng),
                measured_loudness=_db(rng, -40, -10),
            )
        )

    gain_tracks = {}
    if rng.integers(2):
        for t in range(int(rng.integers(1, 3))):
            track_id = f"track-{t}"
            gain_tracks[track_id] = _gain_track(rng, track_id)

    drc_profiles = {}
    if rng.integers(3) == 0:
        drc_profiles["custom"] = _drc_profile(rng, "custom")

    kinds = list(rng.permutation(sorted(STANDARD_PRESET_KINDS)))
    n_presets = int(rng.integers(1, 4))
    presets = []
    for p in range(n_presets):
        member_ids = list(
            rng.choice(
                [c.component_id for c in components],
                size=int(rng.integers(1, n_components + 1)),
                replace=False,
            )
        )
        # every component must appear in some preset
        if p == n_presets - 1:
            used = {m for preset in presets for m in (x.component_id for x in preset.members)}
            used.update(member_ids)
            member_ids.extend(c.component_id for c in components if c.component_id not in used)
        members = []
        for cid in member_ids:
            dynamic = None
            if gain_tracks and rng.integers(3) == 0:
                dynamic = str(rng.choice(sorted(gain_tracks)))
            members.append(
                PresetMember(
                    component_id=cid,
                    static_gain=_db(rng, -12, 12),
                    dynamic_gain=dynamic,
                )
            )
        kind = kinds[p] if rng.integers(4) else f"vendor-{p}"
        presets.append(
            Preset(
                preset_id=f"preset-{p}",
                labels=_labels(rng),
                kind=kind,
                members=tuple(members),
                measured_loudness=_db(rng, -40, -10),
            )
        )

    return AudioScene(
        scene_id=f"random-{rng.integers(1_000_000)}",
        sample_rate=48000,
        frame_length=int(rng.choice([256, 512, 1024])),
        components=tuple(components),
        presets=tuple(presets),
        default_preset_id=str(rng.choice([p.preset_id for p in presets])),
        gain_tracks=gain_tracks,
        drc_profiles=drc_profiles,
    )


def track_count(scene: AudioScene) -> int:
    return 1 + max(t for c in scene.components for t in c.tracks)
