"""Canonical speaker layouts.

Angles follow the scene convention: azimuth 0 is front, positive azimuths
are to the left, measured in degrees on the horizontal plane.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ObaError


@dataclass(frozen=True)
class Speaker:
    name: str
    azimuth: float
    elevation: float
    is_lfe: bool = False


@dataclass(frozen=True)
class SpeakerLayout:
    layout_id: str
    speakers: tuple[Speaker, ...]

    @property
    def channel_count(self) -> int:
        return len(self.speakers)

    def lfe_indices(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.speakers) if s.is_lfe)


MONO = SpeakerLayout("mono_1_0", (Speaker("M", 0.0, 0.0),))

STEREO = SpeakerLayout(
    "stereo_2_0",
    (
        Speaker("L", 30.0, 0.0),
        Speaker("R", -30.0, 0.0),
    ),
)

SURROUND_5_1 = SpeakerLayout(
    "surround_5_1",
    (
        Speaker("L", 30.0, 0.0),
        Speaker("R", -30.0, 0.0),
        Speaker("C", 0.0, 0.0),
        Speaker("LFE", 0.0, -15.0, is_lfe=True),
        Speaker("Ls", 110.0, 0.0),
        Speaker("Rs", -110.0, 0.0),
    ),
)

LAYOUTS: dict[str, SpeakerLayout] = {
    layout.layout_id: layout for layout in (MONO, STEREO, SURROUND_5_1)
}


def get_layout(layout_id: str) -> SpeakerLayout:
    try:
        return LAYOUTS[layout_id]
    except KeyError:
        raise ObaError(
            "unknown-layout",
            f"unknown speaker layout {layout_id!r}; supported: {sorted(LAYOUTS)}",
        ) from None


def layout_for_channel_count(channels: int) -> SpeakerLayout:
    """Pick the canonical layout matching a channel count."""
    for layout in LAYOUTS.values():
        if layout.channel_count == channels:
            return layout
    raise ObaError(
        "unknown-layout", f"no canonical layout with {channels} channels"
    )
