"""Object panning, bed downmix, and the per-frame mixing pipeline.

Per frame the pipeline: fetches component tracks, applies member gains
(authored static gain, dynamic ducking track, user offset), pans objects at
their clamped positions, maps beds through the downmix matrix, sums into
the target layout, applies the loudness-compensation trajectory, then DRC,
then a hard clip guard at +/-1.

Everything runs in float64 and is deterministic: identical requests render
bit-identical output. Gain scalars multiply the spatialized signal last, so
two presets differing only by a member's static gain produce outputs that
are exact scalar multiples of each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .container import ContainerReader
from .dynamics import EnvelopeState, apply_drc, builtin_drc_profiles, gain_at
from .errors import ObaError
from .layouts import SpeakerLayout
from .loudness import (
    CompensatorState,
    advance_compensator,
    compensation_gain,
    estimate_active_loudness,
    measure_integrated,
)
from .scene import (
    AudioScene,
    BedGeometry,
    ComponentGroup,
    Position,
    Preset,
    UserState,
    clamp_position,
    select_preset,
)

DEFAULT_RAMP_SECONDS = 0.1
_SQRT2_INV = 2.0 ** -0.5
_MAX_DISTANCE_GAIN = 2.0  # +6 dB cap for close objects


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 20.0)


@dataclass(frozen=True)
class PanningGains:
    """Per-speaker linear gains for one object; power-normalized, LFE silent."""

    layout: SpeakerLayout
    gains: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=np.float64))


def _ring_arcs(layout: SpeakerLayout) -> list[tuple[int, float, int, float]]:
    """Adjacent non-LFE speaker pairs as (index_lo, az_lo, index_hi, az_hi)."""
    ring = sorted(
        ((s.azimuth, i) for i, s in enumerate(layout.speakers) if not s.is_lfe)
    )
    arcs = []
    for (az_lo, i_lo), (az_hi, i_hi) in zip(ring, ring[1:]):
        arcs.append((i_lo, az_lo, i_hi, az_hi))
    az_last, i_last = ring[-1]
    az_first, i_first = ring[0]
    arcs.append((i_last, az_last, i_first, az_first + 360.0))
    return arcs


def pan(position: Position, layout: SpeakerLayout) -> PanningGains:
    """Tangent-law pairwise panning between the two azimuth-nearest speakers.

    Elevation is folded onto the horizontal plane without attenuation. For
    layouts that only cover a frontal sector (stereo), rear azimuths fold
    to the mirrored frontal angle and pin at the outermost speakers, which
    keeps the gains continuous all the way around the circle.
    """
    ring = [(s.azimuth, i) for i, s in enumerate(layout.speakers) if not s.is_lfe]
    gains = np.zeros(layout.channel_count)
    if len(ring) == 1:
        gains[ring[0][1]] = 1.0
        return PanningGains(layout, gains)

    azimuth = position.azimuth
    arcs = _ring_arcs(layout)
    widest_gap = max(az_hi - az_lo for _, az_lo, _, az_hi in arcs)
    if widest_gap > 180.0:
        # frontal-sector layout: mirror the rear onto the front, then pin
        # inside the covered sector
        if abs(azimuth) > 90.0:
            azimuth = math.copysign(180.0 - abs(azimuth), azimuth)
        sector_lo = min(az for az, _ in ring)
        sector_hi = max(az for az, _ in ring)
        azimuth = min(max(azimuth, sector_lo), sector_hi)
        arcs = [arc for arc in arcs if arc[3] - arc[1] <= 180.0]

    for i_lo, az_lo, i_hi, az_hi in arcs:
        az = azimuth if azimuth >= az_lo else azimuth + 360.0
        if az_lo <= az <= az_hi:
            center = 0.5 * (az_lo + az_hi)
            half = 0.5 * (az_hi - az_lo)
            ratio = math.tan(math.radians(az - center)) / math.tan(math.radians(half))
            ratio = min(max(ratio, -1.0), 1.0)
            g_lo = 1.0 - ratio
            g_hi = 1.0 + ratio
            norm = math.hypot(g_lo, g_hi)
            gains[i_lo] = g_lo / norm
            gains[i_hi] = g_hi / norm
            return PanningGains(layout, gains)

    raise ObaError("panning-failed", f"no arc encloses azimuth {position.azimuth}")


def downmix_matrix(from_layout: SpeakerLayout, to_layout: SpeakerLayout) -> np.ndarray:
    """Fixed downmix coefficients, shape (to_channels, from_channels).

    5.1 to stereo folds the center and surrounds in at -3 dB and rescales
    by 1/(1 + 2/sqrt(2)) to prevent overload; 5.1 to mono composes that
    with the stereo average.
    """
    pair = (from_layout.layout_id, to_layout.layout_id)
    if from_layout.layout_id == to_layout.layout_id:
        return np.eye(from_layout.channel_count)
    if pair == ("surround_5_1", "stereo_2_0"):
        c = _SQRT2_INV
        scale = 1.0 / (1.0 + c + c)
        #                 L    R    C    LFE  Ls   Rs
        return scale * np.array(
            [
                [1.0, 0.0, c, 0.0, c, 0.0],
                [0.0, 1.0, c, 0.0, 0.0, c],
            ]
        )
    if pair == ("stereo_2_0", "mono_1_0"):
        return np.array([[0.5, 0.5]])
    if pair == ("surround_5_1", "mono_1_0"):
        from .layouts import STEREO

        return downmix_matrix(STEREO, to_layout) @ downmix_matrix(from_layout, STEREO)
    raise ObaError(
        "unsupported-downmix", f"no downmix from {pair[0]} to {pair[1]}"
    )


class ArraySource:
    """In-memory audio source with the same frame interface as a container."""

    def __init__(self, signal: np.ndarray, sample_rate: int, frame_length: int):
        samples = np.asarray(signal, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, np.newaxis]
        self._samples = samples
        self.sample_rate = sample_rate
        self.channel_count = samples.shape[1]
        self.frame_length = frame_length
        self.frame_count = max(1, -(-samples.shape[0] // frame_length))

    def read_frame(self, frame_index: int) -> np.ndarray:
        if not (0 <= frame_index < self.frame_count):
            raise ObaError("eof", f"frame {frame_index} out of range")
        start = frame_index * self.frame_length
        chunk = self._samples[start : start + self.frame_length]
        if chunk.shape[0] < self.frame_length:
            padded = np.zeros((self.frame_length, self.channel_count))
            padded[: chunk.shape[0]] = chunk
            return padded
        return chunk.copy()


AudioSource = Union[ContainerReader, ArraySource]


@dataclass
class RenderRequest:
    scene: AudioScene
    source: AudioSource
    user: UserState = field(default_factory=UserState)
    preset_id: Optional[str] = None  # explicit override of preset selection
    start_frame: int = 0
    end_frame: Optional[int] = None
    compensation: bool = True


@dataclass
class RenderStats:
    clipped_samples: int
    integrated_loudness: Optional[float]

    def to_json_dict(self) -> dict:
        loudness = (
            None if self.integrated_loudness is None else round(self.integrated_loudness, 2)
        )
        return {
            "clipped_samples": self.clipped_samples,
            "integrated_loudness_lkfs": loudness,
        }


class _MemberChannel:
    """Render state for one preset member: spatialization plus gain ramps.

    ``amp`` is the linear member gain (authored gains, user offset, and
    distance law folded together). Transitions ramp ``amp`` linearly in
    amplitude so members can fade from and to silence; pan vectors ramp
    linearly per speaker. A settled channel uses pure scalar/constant
    paths, which keeps untouched renders bit-identical to offline ones.
    """

    def __init__(self, component: ComponentGroup, pipeline: "RenderPipeline"):
        self.component = component
        self.amp_current = 0.0
        self.amp_target = 0.0
        self.amp_ramp_remaining = 0
        self.pan_current: Optional[np.ndarray] = None
        self.pan_target: Optional[np.ndarray] = None
        self.pan_ramp_remaining = 0
        self.bed_matrix: Optional[np.ndarray] = None
        self.bed_identity = False
        self.dyn_track_id: Optional[str] = None
        self.fading_out = False
        self._pipeline = pipeline

    def retarget(self, amp: float, pan_gains: Optional[np.ndarray], immediate: bool):
        ramp = self._pipeline.ramp_length
        if immediate:
            self.amp_current = self.amp_target = amp
            self.amp_ramp_remaining = 0
            self.pan_current = self.pan_target = pan_gains
            self.pan_ramp_remaining = 0
            return
        if amp != self.amp_target:
            self.amp_current = self._current_amp()
            self.amp_target = amp
            self.amp_ramp_remaining = ramp
        if pan_gains is not None:
            if self.pan_target is None:
                # fresh channel: it fades in via amp, pan applies at once
                self.pan_current = self.pan_target = pan_gains
                self.pan_ramp_remaining = 0
            elif not np.array_equal(pan_gains, self.pan_target):
                self.pan_current = self._current_pan()
                self.pan_target = pan_gains
                self.pan_ramp_remaining = ramp

    def _current_amp(self) -> float:
        if self.amp_ramp_remaining == 0:
            return self.amp_target
        return self.amp_current

    def _current_pan(self) -> Optional[np.ndarray]:
        if self.pan_ramp_remaining == 0:
            return self.pan_target
        return self.pan_current

    def settled(self) -> bool:
        return self.amp_ramp_remaining == 0 and self.pan_ramp_remaining == 0

    def amp_trajectory(self, n: int):
        """Scalar when settled, else a per-sample linear amplitude ramp."""
        if self.amp_ramp_remaining == 0:
            return self.amp_target
        ramp_n = min(n, self.amp_ramp_remaining)
        steps = np.arange(1, ramp_n + 1) / self.amp_ramp_remaining
        out = np.empty(n)
        out[:ramp_n] = self.amp_current + (self.amp_target - self.amp_current) * steps
        out[ramp_n:] = self.amp_target
        self.amp_ramp_remaining -= ramp_n
        self.amp_current = (
            self.amp_target if self.amp_ramp_remaining == 0 else float(out[ramp_n - 1])
        )
        return out

    def pan_trajectory(self, n: int):
        """Pan vector (settled) or per-sample (n, channels) matrix mid-ramp."""
        if self.pan_ramp_remaining == 0:
            return self.pan_target
        ramp_n = min(n, self.pan_ramp_remaining)
        steps = np.arange(1, ramp_n + 1) / self.pan_ramp_remaining
        path = self.pan_current[np.newaxis, :] + (
            self.pan_target - self.pan_current
        )[np.newaxis, :] * steps[:, np.newaxis]
        if ramp_n < n:
            tail = np.repeat(self.pan_target[np.newaxis, :], n - ramp_n, axis=0)
            path = np.concatenate([path, tail], axis=0)
        self.pan_ramp_remaining -= ramp_n
        self.pan_current = (
            self.pan_target if self.pan_ramp_remaining == 0 else path[ramp_n - 1].copy()
        )
        return path


class RenderPipeline:
    """Stateful frame renderer for one scene / source / user combination.

    Single-owner: compensator, DRC, and transition state live here. The
    pipeline may move between threads between frames but must not be
    driven concurrently.
    """

    def __init__(
        self,
        scene: AudioScene,
        source: AudioSource,
        user: UserState,
        preset_id: Optional[str] = None,
        compensation: bool = True,
    ):
        if source.sample_rate != scene.sample_rate:
            raise ObaError(
                "sample-rate-mismatch",
                f"scene at {scene.sample_rate} Hz, source at {source.sample_rate} Hz",
            )
        self.scene = scene
        self.source = source
        self.compensation = compensation
        self.ramp_length = max(1, int(round(DEFAULT_RAMP_SECONDS * scene.sample_rate)))
        self.clipped_samples = 0
        self._channels: dict[str, _MemberChannel] = {}
        self._drc_state = EnvelopeState()
        self._compensator: Optional[CompensatorState] = None
        self.user = user
        self.preset: Preset = scene.preset(preset_id or select_preset(scene, user))
        self._layout_id = user.target_layout.layout_id
        self._apply_settings(immediate=True)

    # -- configuration ----------------------------------------------------

    def update_user(self, user: UserState, preset_id: Optional[str] = None):
        """Adopt new user settings; level/pan changes ramp over 100 ms.

        A target layout change cannot crossfade (the channel shape changes)
        and rebuilds the routing instantly instead.
        """
        layout_changed = user.target_layout.layout_id != self._layout_id
        self.user = user
        self.preset = self.scene.preset(preset_id or select_preset(self.scene, user))
        self._layout_id = user.target_layout.layout_id
        self._apply_settings(immediate=layout_changed)

    def _member_amp(self, member, component: ComponentGroup) -> float:
        offset = self.user.gain_offsets.get(component.component_id, 0.0)
        amp = db_to_linear(component.default_gain + member.static_gain + offset)
        if component.is_object:
            distance = component.geometry.position.distance
            amp *= _MAX_DISTANCE_GAIN if distance <= 0 else min(
                1.0 / distance, _MAX_DISTANCE_GAIN
            )
        return amp

    def _member_pan(self, component: ComponentGroup) -> Optional[np.ndarray]:
        if not component.is_object:
            return None
        limits = self.scene.effective_limits(self.preset, component.component_id)
        offset = self.user.position_offsets.get(component.component_id, (0.0, 0.0))
        position = clamp_position(limits, component.geometry.position, offset)
        return pan(position, self.user.target_layout).gains

    def _apply_settings(self, immediate: bool):
        layout = self.user.target_layout
        active: dict[str, tuple] = {}
        for member in self.preset.members:
            component = self.scene.component(member.component_id)
            muted = member.component_id in self.user.muted
            amp = 0.0 if muted else self._member_amp(member, component)
            active[member.component_id] = (member, component, amp)

        for component_id, (member, component, amp) in active.items():
            channel = self._channels.get(component_id)
            if channel is None:
                channel = _MemberChannel(component, self)
                self._channels[component_id] = channel
            channel.component = component
            channel.fading_out = False
            channel.dyn_track_id = member.dynamic_gain
            if component.is_object:
                channel.bed_matrix = None
                channel.bed_identity = False
                channel.retarget(amp, self._member_pan(component), immediate)
            else:
                bed_layout = component.geometry.layout
                channel.bed_matrix = downmix_matrix(bed_layout, layout)
                channel.bed_identity = bed_layout.layout_id == layout.layout_id
                channel.retarget(amp, None, immediate)

        for component_id, channel in list(self._channels.items()):
            if component_id not in active:
                if immediate:
                    del self._channels[component_id]
                else:
                    channel.fading_out = True
                    channel.retarget(0.0, channel.pan_target, immediate=False)

        if self.compensation:
            target = self._compensation_target()
            if self._compensator is None or immediate:
                self._compensator = CompensatorState.at_gain(target, self.ramp_length)
        elif self._compensator is None:
            self._compensator = CompensatorState.at_gain(0.0, self.ramp_length)

        profile_id = self.user.drc_profile
        if profile_id is None:
            self._drc_profile = None
        else:
            profile = self.scene.drc_profiles.get(profile_id) or builtin_drc_profiles().get(
                profile_id
            )
            if profile is None:
                raise ObaError("unknown-drc-profile", f"no DRC profile {profile_id!r}")
            self._drc_profile = None if profile.is_identity() else profile

    def _compensation_target(self) -> float:
        loudness_map = {
            c.component_id: c.measured_loudness for c in self.scene.components
        }
        estimated = estimate_active_loudness(
            self.preset, loudness_map, dict(self.user.gain_offsets), self.user.muted
        )
        if not math.isfinite(estimated):
            return 0.0
        return compensation_gain(self.user.target_loudness, estimated)

    # -- rendering ---------------------------------------------------------

    def render_frame(self, frame_index: int) -> np.ndarray:
        """Render one frame to (frame_length, target channels) float64."""
        n = self.source.frame_length
        frame = self.source.read_frame(frame_index)
        out = np.zeros((n, self.user.target_layout.channel_count))
        times = None

        for component_id, channel in list(self._channels.items()):
            amp = channel.amp_trajectory(n)
            if channel.fading_out and channel.amp_ramp_remaining == 0 and (
                isinstance(amp, float) and amp == 0.0
            ):
                del self._channels[component_id]
                continue
            if isinstance(amp, float) and amp == 0.0:
                continue

            component = channel.component
            if component.is_object:
                sig = frame[:, component.tracks[0]]
                pan_path = channel.pan_trajectory(n)
                if pan_path.ndim == 1:
                    spatial = sig[:, np.newaxis] * pan_path[np.newaxis, :]
                else:
                    spatial = sig[:, np.newaxis] * pan_path
            else:
                sig = frame[:, list(component.tracks)]
                spatial = sig if channel.bed_identity else sig @ channel.bed_matrix.T

            scale = amp
            if channel.dyn_track_id is not None:
                if times is None:
                    start = frame_index * n
                    times = (start + np.arange(n)) / self.scene.sample_rate
                track = self.scene.gain_tracks[channel.dyn_track_id]
                dyn = 10.0 ** (gain_at(track, times) / 20.0)
                scale = dyn * amp

            if isinstance(scale, float):
                if scale == 1.0:
                    out += spatial
                else:
                    out += spatial * scale
            else:
                out += spatial * scale[:, np.newaxis]

        if self.compensation:
            trajectory, self._compensator = advance_compensator(
                self._compensator, self._compensation_target(), n
            )
            out *= trajectory[:, np.newaxis]

        if self._drc_profile is not None:
            out, self._drc_state = apply_drc(
                out, self._drc_profile, self._drc_state, self.scene.sample_rate
            )

        over = np.abs(out) > 1.0
        if over.any():
            self.clipped_samples += int(np.count_nonzero(over))
            np.clip(out, -1.0, 1.0, out=out)
        return out


def render_offline(request: RenderRequest) -> tuple[np.ndarray, RenderStats]:
    """Render a frame range to a single signal plus stats measured on it."""
    pipeline = RenderPipeline(
        request.scene,
        request.source,
        request.user,
        preset_id=request.preset_id,
        compensation=request.compensation,
    )
    end = request.end_frame if request.end_frame is not None else request.source.frame_count
    if not (0 <= request.start_frame <= end <= request.source.frame_count):
        raise ObaError("eof", f"frame range {request.start_frame}..{end} out of bounds")
    frames = [pipeline.render_frame(i) for i in range(request.start_frame, end)]
    if frames:
        signal = np.concatenate(frames, axis=0)
    else:
        signal = np.zeros((0, request.user.target_layout.channel_count))

    loudness = None
    block = int(round(0.4 * request.scene.sample_rate))
    if signal.shape[0] >= block:
        measurement = measure_integrated(
            signal, request.user.target_layout, request.scene.sample_rate
        )
        loudness = measurement.integrated if measurement.valid else None
    return signal, RenderStats(pipeline.clipped_samples, loudness)
