"""Persistence: scene JSON, multichannel WAV, and the .obas container.

The container is a single deliverable holding the scene metadata and the
interleaved float PCM it references::

    header  28 bytes  magic "OBAS", version, sample_rate, channel_count,
                      frame_length, frame_count, scene_json_length
                      (all little-endian u32 after the 4-byte magic)
    scene   UTF-8 JSON, scene_json_length bytes
    payload float32 LE, channel-interleaved, frame_count full frames

All declared lengths are validated against the actual file size before
anything is allocated, so truncated or inflated files fail with structured
errors instead of crashes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .dynamics import DrcProfile, DynamicGainTrack
from .errors import ObaError
from .layouts import get_layout
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
)

MAGIC = b"OBAS"
CONTAINER_VERSION = 1
_HEADER = struct.Struct("<4sIIIIII")

SCENE_FORMAT = "oba-scene"
SCENE_VERSION = 1

# sanity bounds applied before trusting any header-declared size
_MAX_CHANNELS = 1024
_MAX_FRAME_LENGTH = 1 << 22


def _round_db(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(float(value), 2)


# ---------------------------------------------------------------------------
# scene JSON


def _labels_to_json(labels: LabelSet) -> dict:
    return {
        "default_language": labels.default_language,
        "entries": {tag: labels.entries[tag] for tag in sorted(labels.entries)},
    }


def _limits_to_json(limits: InteractivityLimits) -> dict:
    return {
        "gain_min_db": _round_db(limits.gain_min),
        "gain_max_db": _round_db(limits.gain_max),
        "azimuth_range_deg": limits.azimuth_range,
        "elevation_min_deg": limits.elevation_min,
        "elevation_max_deg": limits.elevation_max,
        "on_off_allowed": limits.on_off_allowed,
    }


def scene_to_json_dict(scene: AudioScene) -> dict:
    """Canonical JSON form: fixed key order, dB/LKFS rounded to 2 decimals."""
    components = []
    for comp in scene.components:
        if isinstance(comp.geometry, ObjectGeometry):
            pos = comp.geometry.position
            geometry = {
                "type": "object",
                "position": {
                    "azimuth_deg": pos.azimuth,
                    "elevation_deg": pos.elevation,
                    "distance": pos.distance,
                },
            }
        else:
            geometry = {"type": "bed", "layout": comp.geometry.layout.layout_id}
        components.append(
            {
                "component_id": comp.component_id,
                "labels": _labels_to_json(comp.labels),
                "content_kind": comp.content_kind,
                "tracks": list(comp.tracks),
                "geometry": geometry,
                "default_gain_db": _round_db(comp.default_gain),
                "interactivity": _limits_to_json(comp.interactivity),
                "measured_loudness_lkfs": _round_db(comp.measured_loudness),
            }
        )

    presets = []
    for preset in scene.presets:
        members = []
        for member in preset.members:
            override = member.interactivity_override
            members.append(
                {
                    "component_id": member.component_id,
                    "static_gain_db": _round_db(member.static_gain),
                    "dynamic_gain": member.dynamic_gain,
                    "interactivity_override": None
                    if override is None
                    else _limits_to_json(override),
                }
            )
        presets.append(
            {
                "preset_id": preset.preset_id,
                "labels": _labels_to_json(preset.labels),
                "kind": preset.kind,
                "members": members,
                "measured_loudness_lkfs": _round_db(preset.measured_loudness),
            }
        )

    return {
        "format": SCENE_FORMAT,
        "version": SCENE_VERSION,
        "scene_id": scene.scene_id,
        "sample_rate": scene.sample_rate,
        "frame_length": scene.frame_length,
        "default_preset_id": scene.default_preset_id,
        "components": components,
        "presets": presets,
        "gain_tracks": [
            {
                "track_id": track_id,
                "breakpoints": [[t, _round_db(g)] for t, g in track.breakpoints],
            }
            for track_id, track in scene.gain_tracks.items()
        ],
        "drc_profiles": [
            {
                "profile_id": profile_id,
                "static_curve": [[x, _round_db(g)] for x, g in profile.static_curve],
                "attack_ms": profile.attack,
                "release_ms": profile.release,
            }
            for profile_id, profile in scene.drc_profiles.items()
        ],
    }


def write_scene_json(scene: AudioScene) -> bytes:
    return json.dumps(scene_to_json_dict(scene), indent=2).encode("utf-8")


class _SchemaReader:
    """Typed field access over parsed JSON with JSON-pointer error paths."""

    def __init__(self):
        self.warnings: list[str] = []

    def fail(self, path: str, message: str):
        raise ObaError("schema-error", f"{path}: {message}")

    def obj(self, value: Any, path: str, known_keys: set[str]) -> dict:
        if not isinstance(value, dict):
            self.fail(path, f"expected object, got {type(value).__name__}")
        for key in value:
            if key not in known_keys:
                self.warnings.append(f"{path}/{key}: unknown field ignored")
        return value

    def get(self, obj: dict, key: str, path: str) -> Any:
        if key not in obj:
            self.fail(path, f"missing required field {key!r}")
        return obj[key]

    def string(self, obj: dict, key: str, path: str) -> str:
        value = self.get(obj, key, path)
        if not isinstance(value, str):
            self.fail(f"{path}/{key}", "expected string")
        return value

    def integer(self, obj: dict, key: str, path: str) -> int:
        value = self.get(obj, key, path)
        if not isinstance(value, int) or isinstance(value, bool):
            self.fail(f"{path}/{key}", "expected integer")
        return value

    def number(self, obj: dict, key: str, path: str, optional: bool = False):
        value = self.get(obj, key, path) if not optional else obj.get(key)
        if value is None and optional:
            return None
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            self.fail(f"{path}/{key}", "expected number")
        return float(value)

    def boolean(self, obj: dict, key: str, path: str) -> bool:
        value = self.get(obj, key, path)
        if not isinstance(value, bool):
            self.fail(f"{path}/{key}", "expected boolean")
        return value

    def array(self, obj: dict, key: str, path: str) -> list:
        value = self.get(obj, key, path)
        if not isinstance(value, list):
            self.fail(f"{path}/{key}", "expected array")
        return value


def _labels_from_json(reader: _SchemaReader, value: Any, path: str) -> LabelSet:
    obj = reader.obj(value, path, {"default_language", "entries"})
    default = reader.string(obj, "default_language", path)
    entries = reader.get(obj, "entries", path)
    if not isinstance(entries, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in entries.items()
    ):
        reader.fail(f"{path}/entries", "expected object of strings")
    if not entries:
        reader.fail(f"{path}/entries", "label set must not be empty")
    if default not in entries:
        reader.fail(path, f"default language {default!r} missing from entries")
    return LabelSet(entries, default)


_LIMIT_KEYS = {
    "gain_min_db",
    "gain_max_db",
    "azimuth_range_deg",
    "elevation_min_deg",
    "elevation_max_deg",
    "on_off_allowed",
}


def _limits_from_json(reader: _SchemaReader, value: Any, path: str) -> InteractivityLimits:
    obj = reader.obj(value, path, _LIMIT_KEYS)
    return InteractivityLimits(
        gain_min=reader.number(obj, "gain_min_db", path),
        gain_max=reader.number(obj, "gain_max_db", path),
        azimuth_range=reader.number(obj, "azimuth_range_deg", path),
        elevation_min=reader.number(obj, "elevation_min_deg", path),
        elevation_max=reader.number(obj, "elevation_max_deg", path),
        on_off_allowed=reader.boolean(obj, "on_off_allowed", path),
    )


def _breakpoint_list(reader: _SchemaReader, value: Any, path: str) -> list[tuple[float, float]]:
    if not isinstance(value, list):
        reader.fail(path, "expected array")
    points = []
    for i, item in enumerate(value):
        if (
            not isinstance(item, list)
            or len(item) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in item)
        ):
            reader.fail(f"{path}/{i}", "expected [number, number]")
        points.append((float(item[0]), float(item[1])))
    return points


def parse_scene_json(data: bytes | str) -> tuple[AudioScene, list[str]]:
    """Parse scene JSON; returns the scene and warnings for ignored fields."""
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ObaError("schema-error", f"/: not valid JSON ({exc})") from None

    reader = _SchemaReader()
    root = reader.obj(
        raw,
        "",
        {
            "format",
            "version",
            "scene_id",
            "sample_rate",
            "frame_length",
            "default_preset_id",
            "components",
            "presets",
            "gain_tracks",
            "drc_profiles",
        },
    )
    fmt = reader.string(root, "format", "")
    if fmt != SCENE_FORMAT:
        reader.fail("/format", f"expected {SCENE_FORMAT!r}, got {fmt!r}")
    version = reader.integer(root, "version", "")
    if version != SCENE_VERSION:
        reader.fail("/version", f"unsupported scene version {version}")

    components = []
    comp_entries = reader.array(root, "components", "")
    for ci, entry in enumerate(comp_entries):
        path = f"/components/{ci}"
        obj = reader.obj(
            entry,
            path,
            {
                "component_id",
                "labels",
                "content_kind",
                "tracks",
                "geometry",
                "default_gain_db",
                "interactivity",
                "measured_loudness_lkfs",
            },
        )
        tracks = reader.array(obj, "tracks", path)
        if not all(isinstance(t, int) and not isinstance(t, bool) for t in tracks):
            reader.fail(f"{path}/tracks", "expected array of integers")
        geometry_obj = reader.obj(
            reader.get(obj, "geometry", path), f"{path}/geometry", {"type", "position", "layout"}
        )
        geom_type = reader.string(geometry_obj, "type", f"{path}/geometry")
        geometry: ObjectGeometry | BedGeometry
        if geom_type == "object":
            pos_obj = reader.obj(
                reader.get(geometry_obj, "position", f"{path}/geometry"),
                f"{path}/geometry/position",
                {"azimuth_deg", "elevation_deg", "distance"},
            )
            geometry = ObjectGeometry(
                Position(
                    azimuth=reader.number(pos_obj, "azimuth_deg", f"{path}/geometry/position"),
                    elevation=reader.number(pos_obj, "elevation_deg", f"{path}/geometry/position"),
                    distance=reader.number(pos_obj, "distance", f"{path}/geometry/position"),
                )
            )
        elif geom_type == "bed":
            layout_id = reader.string(geometry_obj, "layout", f"{path}/geometry")
            try:
                geometry = BedGeometry(get_layout(layout_id))
            except ObaError:
                reader.fail(f"{path}/geometry/layout", f"unknown layout {layout_id!r}")
        else:
            reader.fail(f"{path}/geometry/type", f"unknown geometry type {geom_type!r}")
        components.append(
            ComponentGroup(
                component_id=reader.string(obj, "component_id", path),
                labels=_labels_from_json(reader, reader.get(obj, "labels", path), f"{path}/labels"),
                content_kind=reader.string(obj, "content_kind", path),
                tracks=tuple(tracks),
                geometry=geometry,
                default_gain=reader.number(obj, "default_gain_db", path),
                interactivity=_limits_from_json(
                    reader, reader.get(obj, "interactivity", path), f"{path}/interactivity"
                ),
                measured_loudness=reader.number(obj, "measured_loudness_lkfs", path, optional=True),
            )
        )

    presets = []
    preset_entries = reader.array(root, "presets", "")
    if not preset_entries:
        reader.fail("/presets", "scene must declare at least one preset")
    for pi, entry in enumerate(preset_entries):
        path = f"/presets/{pi}"
        obj = reader.obj(
            entry, path, {"preset_id", "labels", "kind", "members", "measured_loudness_lkfs"}
        )
        members = []
        for mi, member_entry in enumerate(reader.array(obj, "members", path)):
            mpath = f"{path}/members/{mi}"
            member_obj = reader.obj(
                member_entry,
                mpath,
                {"component_id", "static_gain_db", "dynamic_gain", "interactivity_override"},
            )
            dynamic = member_obj.get("dynamic_gain")
            if dynamic is not None and not isinstance(dynamic, str):
                reader.fail(f"{mpath}/dynamic_gain", "expected string or null")
            override = member_obj.get("interactivity_override")
            members.append(
                PresetMember(
                    component_id=reader.string(member_obj, "component_id", mpath),
                    static_gain=reader.number(member_obj, "static_gain_db", mpath),
                    dynamic_gain=dynamic,
                    interactivity_override=None
                    if override is None
                    else _limits_from_json(reader, override, f"{mpath}/interactivity_override"),
                )
            )
        presets.append(
            Preset(
                preset_id=reader.string(obj, "preset_id", path),
                labels=_labels_from_json(reader, reader.get(obj, "labels", path), f"{path}/labels"),
                kind=reader.string(obj, "kind", path),
                members=tuple(members),
                measured_loudness=reader.number(obj, "measured_loudness_lkfs", path, optional=True),
            )
        )

    gain_tracks = {}
    for ti, entry in enumerate(root.get("gain_tracks", [])):
        path = f"/gain_tracks/{ti}"
        obj = reader.obj(entry, path, {"track_id", "breakpoints"})
        track_id = reader.string(obj, "track_id", path)
        points = _breakpoint_list(reader, reader.get(obj, "breakpoints", path), f"{path}/breakpoints")
        try:
            gain_tracks[track_id] = DynamicGainTrack(track_id, tuple(points))
        except ObaError as exc:
            reader.fail(f"{path}/breakpoints", exc.message)

    drc_profiles = {}
    for di, entry in enumerate(root.get("drc_profiles", [])):
        path = f"/drc_profiles/{di}"
        obj = reader.obj(entry, path, {"profile_id", "static_curve", "attack_ms", "release_ms"})
        profile_id = reader.string(obj, "profile_id", path)
        curve = _breakpoint_list(reader, reader.get(obj, "static_curve", path), f"{path}/static_curve")
        try:
            drc_profiles[profile_id] = DrcProfile(
                profile_id,
                tuple(curve),
                attack=reader.number(obj, "attack_ms", path),
                release=reader.number(obj, "release_ms", path),
            )
        except ObaError as exc:
            reader.fail(path, exc.message)

    scene = AudioScene(
        scene_id=reader.string(root, "scene_id", ""),
        sample_rate=reader.integer(root, "sample_rate", ""),
        frame_length=reader.integer(root, "frame_length", ""),
        components=tuple(components),
        presets=tuple(presets),
        default_preset_id=reader.string(root, "default_preset_id", ""),
        gain_tracks=gain_tracks,
        drc_profiles=drc_profiles,
    )
    return scene, reader.warnings


def read_scene_json(data: bytes | str) -> AudioScene:
    scene, _ = parse_scene_json(data)
    return scene


# ---------------------------------------------------------------------------
# WAV I/O


def read_wav(path: str | Path) -> tuple[int, np.ndarray]:
    """Read a WAV file into (sample_rate, float64 array of shape (n, channels)).

    Supports 16/24-bit integer PCM and 32-bit float, including the
    WAVE_FORMAT_EXTENSIBLE wrapping of either. Integer samples scale by
    1 / 2^(bits-1) exactly.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise ObaError("malformed-wav", f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    offset = 12
    while offset + 8 <= len(raw):
        chunk_id = raw[offset : offset + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, offset + 4)
        body = raw[offset + 8 : offset + 8 + chunk_size]
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            data = body
        offset += 8 + chunk_size + (chunk_size & 1)

    if fmt is None or len(fmt) < 16:
        raise ObaError("malformed-wav", f"{path}: missing fmt chunk")
    if data is None:
        raise ObaError("malformed-wav", f"{path}: missing data chunk")

    tag, channels, sample_rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == 0xFFFE:  # extensible: actual format lives in the GUID
        if len(fmt) < 26:
            raise ObaError("malformed-wav", f"{path}: truncated extensible fmt chunk")
        (tag,) = struct.unpack_from("<H", fmt, 24)
    if channels < 1:
        raise ObaError("malformed-wav", f"{path}: channel count {channels}")

    n_frames = len(data) // block_align if block_align else 0
    if tag == 3 and bits == 32:
        samples = np.frombuffer(data[: n_frames * channels * 4], dtype="<f4").astype(np.float64)
    elif tag == 1 and bits == 16:
        ints = np.frombuffer(data[: n_frames * channels * 2], dtype="<i2")
        samples = ints.astype(np.float64) / 32768.0
    elif tag == 1 and bits == 24:
        packed = np.frombuffer(data[: n_frames * channels * 3], dtype=np.uint8)
        as_bytes = packed.reshape(-1, 3)
        ints = (
            as_bytes[:, 0].astype(np.int32)
            | (as_bytes[:, 1].astype(np.int32) << 8)
            | (as_bytes[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        samples = ints.astype(np.float64) / 8388608.0
    else:
        raise ObaError(
            "unsupported-wav",
            f"{path}: unsupported format tag {tag} / {bits}-bit; "
            "supported: PCM 16/24-bit int, 32-bit float",
        )
    return sample_rate, samples.reshape(-1, channels)


def write_wav(path: str | Path, signal: np.ndarray, sample_rate: int) -> None:
    """Write a 32-bit float WAV file from a (n,) or (n, channels) array."""
    samples = np.asarray(signal, dtype=np.float32)
    if samples.ndim == 1:
        samples = samples[:, np.newaxis]
    n_frames, channels = samples.shape
    payload = samples.astype("<f4").tobytes()

    fmt = struct.pack(
        "<HHIIHH", 3, channels, sample_rate, sample_rate * channels * 4, channels * 4, 32
    )
    fact = struct.pack("<I", n_frames)
    body = (
        b"WAVE"
        + b"fmt " + struct.pack("<I", len(fmt)) + fmt
        + b"fact" + struct.pack("<I", len(fact)) + fact
        + b"data" + struct.pack("<I", len(payload)) + payload
    )
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


# ---------------------------------------------------------------------------
# .obas container


def pack_array(scene: AudioScene, signal: np.ndarray, out_path: str | Path) -> None:
    """Pack a scene plus its multichannel audio into one container file."""
    samples = np.asarray(signal)
    if samples.ndim == 1:
        samples = samples[:, np.newaxis]
    channels = samples.shape[1]
    used = [t for comp in scene.components for t in comp.tracks]
    if used and max(used) >= channels:
        raise ObaError(
            "track-mismatch",
            f"scene uses track {max(used)} but audio has {channels} channels",
        )
    frame_length = scene.frame_length
    frame_count = -(-samples.shape[0] // frame_length)  # ceil
    padded = np.zeros((frame_count * frame_length, channels), dtype="<f4")
    padded[: samples.shape[0]] = samples.astype("<f4")

    scene_json = write_scene_json(scene)
    header = _HEADER.pack(
        MAGIC,
        CONTAINER_VERSION,
        scene.sample_rate,
        channels,
        frame_length,
        frame_count,
        len(scene_json),
    )
    with open(out_path, "wb") as fh:
        fh.write(header)
        fh.write(scene_json)
        fh.write(padded.tobytes())


def pack(scene: AudioScene, wav_path: str | Path, out_path: str | Path) -> None:
    sample_rate, samples = read_wav(wav_path)
    if sample_rate != scene.sample_rate:
        raise ObaError(
            "sample-rate-mismatch",
            f"scene is {scene.sample_rate} Hz but {wav_path} is {sample_rate} Hz",
        )
    pack_array(scene, samples, out_path)


class ContainerReader:
    """Frame-addressable view of a container's PCM plus its scene.

    Reads at distinct frame offsets are independent, so one handle can be
    shared by concurrent readers.
    """

    def __init__(self, path: str | Path):
        path = Path(path)
        size = path.stat().st_size
        if size < _HEADER.size:
            raise ObaError("not-a-container", f"{path}: too small for a container header")
        with open(path, "rb") as fh:
            header = fh.read(_HEADER.size)
            magic, version, sample_rate, channels, frame_length, frame_count, json_len = (
                _HEADER.unpack(header)
            )
            if magic != MAGIC:
                raise ObaError("not-a-container", f"{path}: bad magic {magic!r}")
            if version != CONTAINER_VERSION:
                raise ObaError("not-a-container", f"{path}: unsupported version {version}")
            if not (1 <= channels <= _MAX_CHANNELS):
                raise ObaError("container-corrupt", f"{path}: channel count {channels}")
            if not (1 <= frame_length <= _MAX_FRAME_LENGTH):
                raise ObaError("container-corrupt", f"{path}: frame length {frame_length}")
            if json_len > size - _HEADER.size:
                raise ObaError("container-corrupt", f"{path}: scene JSON length exceeds file")
            expected_payload = frame_count * frame_length * channels * 4
            actual_payload = size - _HEADER.size - json_len
            if expected_payload != actual_payload:
                raise ObaError(
                    "container-corrupt",
                    f"{path}: payload is {actual_payload} bytes, header implies {expected_payload}",
                )
            scene_json = fh.read(json_len)

        scene, warnings = parse_scene_json(scene_json)
        if scene.sample_rate != sample_rate or scene.frame_length != frame_length:
            raise ObaError(
                "container-corrupt",
                f"{path}: header rate/frame length disagree with embedded scene",
            )
        used = [t for comp in scene.components for t in comp.tracks]
        if used and max(used) >= channels:
            raise ObaError(
                "container-corrupt",
                f"{path}: scene uses track {max(used)} of {channels} channels",
            )

        self.path = path
        self.scene = scene
        self.warnings = warnings
        self.sample_rate = sample_rate
        self.channel_count = channels
        self.frame_length = frame_length
        self.frame_count = frame_count
        self._pcm = np.memmap(
            path,
            dtype="<f4",
            mode="r",
            offset=_HEADER.size + json_len,
            shape=(frame_count * frame_length, channels),
        )

    def read_frame(self, frame_index: int) -> np.ndarray:
        """One frame as float64 (frame_length, channels)."""
        if not (0 <= frame_index < self.frame_count):
            raise ObaError("eof", f"frame {frame_index} out of range 0..{self.frame_count - 1}")
        start = frame_index * self.frame_length
        return np.array(self._pcm[start : start + self.frame_length], dtype=np.float64)

    def read_all(self) -> np.ndarray:
        return np.array(self._pcm, dtype=np.float64)

    def close(self):
        self._pcm = None

    def __enter__(self) -> "ContainerReader":
        return self

    def __exit__(self, *exc):
        self.close()


def unpack(path: str | Path) -> tuple[AudioScene, ContainerReader]:
    reader = ContainerReader(path)
    return reader.scene, reader
