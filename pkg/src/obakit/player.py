"""Playback engine and its control protocol.

State transitions are pure: ``handle_command(state, command)`` maps an
immutable :class:`PlayerState` to the next one plus the events to publish,
so the protocol can be tested without audio or threads. Out-of-range gain
and position requests are clamped, never rejected, and the applied value
is echoed back. The engine wraps these transitions with a render thread:
commands arrive through a queue and apply between frames, renders go to a
sink, and observers receive immutable JSON-ready snapshots.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .container import ContainerReader
from .dynamics import builtin_drc_profiles
from .errors import ObaError
from .layouts import LAYOUTS, get_layout
from .loudness import measure_momentary
from .render import RenderPipeline, downmix_matrix
from .scene import (
    AudioScene,
    BedGeometry,
    UserState,
    clamp_gain,
    resolve_label,
    select_preset,
    validate_scene,
    wrap_azimuth,
)

ACTIONS = frozenset(
    {
        "load",
        "play",
        "pause",
        "seek",
        "select_preset",
        "set_kind_preferences",
        "set_gain",
        "set_position",
        "set_mute",
        "set_layout",
        "set_target_loudness",
        "set_drc",
        "set_ui_language",
    }
)


@dataclass(frozen=True)
class ControlCommand:
    action: str
    path: Optional[str] = None
    frame: Optional[int] = None
    preset_id: Optional[str] = None
    kinds: Optional[tuple[str, ...]] = None
    component_id: Optional[str] = None
    gain_db: Optional[float] = None
    azimuth_deg: Optional[float] = None
    elevation_deg: Optional[float] = None
    muted: Optional[bool] = None
    layout_id: Optional[str] = None
    target_lkfs: Optional[float] = None
    profile_id: Optional[str] = None
    language: Optional[str] = None


def _require(condition: bool, message: str):
    if not condition:
        raise ObaError("bad-command", message)


def command_from_json(doc: dict) -> ControlCommand:
    """Validate a protocol message and build the typed command."""
    _require(isinstance(doc, dict), "command must be an object")
    action = doc.get("action")
    _require(isinstance(action, str) and action in ACTIONS, f"unknown action {action!r}")

    def number(key):
        value = doc.get(key)
        _require(
            isinstance(value, (int, float)) and not isinstance(value, bool),
            f"{action}: {key} must be a number",
        )
        return float(value)

    def string(key):
        value = doc.get(key)
        _require(isinstance(value, str), f"{action}: {key} must be a string")
        return value

    if action == "load":
        return ControlCommand(action, path=string("path"))
    if action == "seek":
        frame = doc.get("frame")
        _require(isinstance(frame, int) and not isinstance(frame, bool), "seek: frame must be an integer")
        return ControlCommand(action, frame=frame)
    if action == "select_preset":
        return ControlCommand(action, preset_id=string("preset_id"))
    if action == "set_kind_preferences":
        kinds = doc.get("kinds")
        _require(
            isinstance(kinds, list) and all(isinstance(k, str) for k in kinds),
            "set_kind_preferences: kinds must be a list of strings",
        )
        return ControlCommand(action, kinds=tuple(kinds))
    if action == "set_gain":
        return ControlCommand(action, component_id=string("component_id"), gain_db=number("gain_db"))
    if action == "set_position":
        return ControlCommand(
            action,
            component_id=string("component_id"),
            azimuth_deg=number("azimuth_deg"),
            elevation_deg=number("elevation_deg"),
        )
    if action == "set_mute":
        muted = doc.get("muted")
        _require(isinstance(muted, bool), "set_mute: muted must be a boolean")
        return ControlCommand(action, component_id=string("component_id"), muted=muted)
    if action == "set_layout":
        return ControlCommand(action, layout_id=string("layout_id"))
    if action == "set_target_loudness":
        value = number("target_lkfs")
        _require(np.isfinite(value), "set_target_loudness: target must be finite")
        return ControlCommand(action, target_lkfs=value)
    if action == "set_drc":
        profile = doc.get("profile_id")
        _require(profile is None or isinstance(profile, str), "set_drc: profile_id must be a string or null")
        return ControlCommand(action, profile_id=profile)
    if action == "set_ui_language":
        return ControlCommand(action, language=string("language"))
    return ControlCommand(action)


@dataclass(frozen=True)
class Event:
    type: str  # "state-changed" | "error" | "eof"
    code: Optional[str] = None
    message: Optional[str] = None
    data: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        doc: dict = {"type": self.type}
        if self.code:
            doc["code"] = self.code
        if self.message:
            doc["message"] = self.message
        if self.data:
            doc.update(self.data)
        return doc


@dataclass(frozen=True)
class PlayerState:
    """Immutable control-plane state; audio state lives in the pipeline."""

    scene: Optional[AudioScene] = None
    source_path: Optional[str] = None
    frame_count: int = 0
    transport: str = "stopped"
    position: int = 0
    active_preset: Optional[str] = None
    user: UserState = field(default_factory=UserState)
    ui_language: str = "en"

    @property
    def loaded(self) -> bool:
        return self.scene is not None


def _clamped_offset(limits, offset: tuple[float, float]) -> tuple[float, float]:
    az = wrap_azimuth(offset[0])
    az = min(max(az, -limits.azimuth_range), limits.azimuth_range)
    el = min(max(offset[1], limits.elevation_min), limits.elevation_max)
    return (az, el)


def _sanitize_user(scene: AudioScene, preset_id: str, user: UserState) -> UserState:
    """Re-clamp all offsets against the active preset and drop stale ids."""
    preset = scene.preset(preset_id)
    known = {c.component_id for c in scene.components}
    gain_offsets = {}
    for cid, value in user.gain_offsets.items():
        if cid in known:
            gain_offsets[cid] = clamp_gain(scene.effective_limits(preset, cid), value)
    position_offsets = {}
    for cid, offset in user.position_offsets.items():
        if cid in known:
            position_offsets[cid] = _clamped_offset(
                scene.effective_limits(preset, cid), offset
            )
    muted = frozenset(
        cid
        for cid in user.muted
        if cid in known and scene.component(cid).interactivity.on_off_allowed
    )
    return replace(
        user, gain_offsets=gain_offsets, position_offsets=position_offsets, muted=muted
    )


def _bed_layouts_supported(scene: AudioScene, layout_id: str) -> bool:
    layout = get_layout(layout_id)
    for component in scene.components:
        if isinstance(component.geometry, BedGeometry):
            try:
                downmix_matrix(component.geometry.layout, layout)
            except ObaError:
                return False
    return True


def handle_command(
    state: PlayerState,
    command: ControlCommand,
    open_container: Callable[[str], ContainerReader] = ContainerReader,
) -> tuple[PlayerState, list[Event]]:
    """Apply one command; errors leave the state untouched.

    Accepted commands return the new state plus a ``state-changed`` event
    whose data echoes any clamped values.
    """

    def error(code: str, message: str) -> tuple[PlayerState, list[Event]]:
        return state, [Event("error", code=code, message=message)]

    def changed(new_state: PlayerState, **echo) -> tuple[PlayerState, list[Event]]:
        return new_state, [Event("state-changed", data={"command": command.action, **echo})]

    if command.action == "load":
        try:
            reader = open_container(command.path)
        except (ObaError, OSError) as exc:
            code = exc.code if isinstance(exc, ObaError) else "io-error"
            return error(code, str(exc))
        report = validate_scene(reader.scene)
        if not report.ok:
            first = report.errors[0]
            return error("invalid-scene", f"{first.code} at {first.path}: {first.message}")
        user = replace(state.user, selected_preset=None)
        active = select_preset(reader.scene, user)
        user = _sanitize_user(reader.scene, active, user)
        if not _bed_layouts_supported(reader.scene, user.target_layout.layout_id):
            user = replace(user, target_layout=get_layout("stereo_2_0"))
        return changed(
            PlayerState(
                scene=reader.scene,
                source_path=command.path,
                frame_count=reader.frame_count,
                transport="stopped",
                position=0,
                active_preset=active,
                user=user,
                ui_language=state.ui_language,
            )
        )

    if command.action == "set_ui_language":
        return changed(replace(state, ui_language=command.language))

    if not state.loaded:
        return error("no-scene", "load a container first")
    scene = state.scene

    if command.action == "play":
        position = 0 if state.position >= state.frame_count else state.position
        return changed(replace(state, transport="playing", position=position))

    if command.action == "pause":
        transport = "paused" if state.transport == "playing" else state.transport
        return changed(replace(state, transport=transport))

    if command.action == "seek":
        frame = max(0, command.frame)
        if frame >= state.frame_count:
            new_state = replace(state, position=state.frame_count, transport="stopped")
            return new_state, [
                Event("eof", message="seek past end"),
                Event("state-changed", data={"command": "seek"}),
            ]
        return changed(replace(state, position=frame))

    if command.action == "select_preset":
        if not scene.has_preset(command.preset_id):
            return error("preset-not-found", f"no preset {command.preset_id!r}")
        user = replace(state.user, selected_preset=command.preset_id)
        user = _sanitize_user(scene, command.preset_id, user)
        return changed(
            replace(state, user=user, active_preset=command.preset_id),
            preset_id=command.preset_id,
        )

    if command.action == "set_kind_preferences":
        user = replace(state.user, kind_preferences=command.kinds)
        active = select_preset(scene, user)
        user = _sanitize_user(scene, active, user)
        return changed(
            replace(state, user=user, active_preset=active), active_preset=active
        )

    if command.action in ("set_gain", "set_position", "set_mute"):
        try:
            component = scene.component(command.component_id)
        except ObaError as exc:
            return error(exc.code, exc.message)
        preset = scene.preset(state.active_preset)
        limits = scene.effective_limits(preset, command.component_id)

        if command.action == "set_gain":
            applied = clamp_gain(limits, command.gain_db)
            offsets = dict(state.user.gain_offsets)
            offsets[command.component_id] = applied
            user = replace(state.user, gain_offsets=offsets)
            return changed(
                replace(state, user=user),
                component_id=command.component_id,
                applied_gain_db=applied,
            )

        if command.action == "set_position":
            applied = _clamped_offset(limits, (command.azimuth_deg, command.elevation_deg))
            offsets = dict(state.user.position_offsets)
            offsets[command.component_id] = applied
            user = replace(state.user, position_offsets=offsets)
            return changed(
                replace(state, user=user),
                component_id=command.component_id,
                applied_azimuth_deg=applied[0],
                applied_elevation_deg=applied[1],
            )

        # set_mute
        if command.muted and not component.interactivity.on_off_allowed:
            return error(
                "mute-not-allowed",
                f"component {command.component_id!r} does not allow on/off",
            )
        muted = set(state.user.muted)
        if command.muted:
            muted.add(command.component_id)
        else:
            muted.discard(command.component_id)
        user = replace(state.user, muted=frozenset(muted))
        return changed(
            replace(state, user=user),
            component_id=command.component_id,
            applied_muted=command.muted,
        )

    if command.action == "set_layout":
        try:
            layout = get_layout(command.layout_id)
        except ObaError as exc:
            return error(exc.code, exc.message)
        if not _bed_layouts_supported(scene, layout.layout_id):
            return error(
                "unsupported-downmix",
                f"scene beds cannot be rendered to {layout.layout_id}",
            )
        user = replace(state.user, target_layout=layout)
        return changed(replace(state, user=user), layout_id=layout.layout_id)

    if command.action == "set_target_loudness":
        user = replace(state.user, target_loudness=command.target_lkfs)
        return changed(replace(state, user=user), target_lkfs=command.target_lkfs)

    if command.action == "set_drc":
        profile_id = command.profile_id
        if profile_id is not None and profile_id not in builtin_drc_profiles():
            if profile_id not in scene.drc_profiles:
                return error("unknown-drc-profile", f"no DRC profile {profile_id!r}")
        user = replace(state.user, drc_profile=profile_id)
        return changed(replace(state, user=user), profile_id=profile_id)

    raise ObaError("bad-command", f"unhandled action {command.action}")


# ---------------------------------------------------------------------------
# snapshots


def scene_summary(scene: AudioScene, language: str) -> dict:
    presets = []
    for preset in scene.presets:
        presets.append(
            {
                "preset_id": preset.preset_id,
                "label": resolve_label(preset.labels, language),
                "kind": preset.kind,
                "members": [m.component_id for m in preset.members],
                "measured_loudness_lkfs": preset.measured_loudness,
            }
        )
    components = []
    for comp in scene.components:
        limits = comp.interactivity
        entry = {
            "component_id": comp.component_id,
            "label": resolve_label(comp.labels, language),
            "content_kind": comp.content_kind,
            "is_object": comp.is_object,
            "on_off_allowed": limits.on_off_allowed,
            "limits": {
                "gain_min_db": limits.gain_min,
                "gain_max_db": limits.gain_max,
                "azimuth_range_deg": limits.azimuth_range,
                "elevation_min_deg": limits.elevation_min,
                "elevation_max_deg": limits.elevation_max,
            },
            "has_position_interactivity": comp.is_object and limits.allows_position(),
        }
        components.append(entry)
    layouts = [
        layout_id
        for layout_id in LAYOUTS
        if _bed_layouts_supported(scene, layout_id)
    ]
    return {
        "scene_id": scene.scene_id,
        "presets": presets,
        "components": components,
        "layouts": layouts,
        "drc_profiles": sorted(set(builtin_drc_profiles()) | set(scene.drc_profiles)),
    }


def state_snapshot(state: PlayerState, meters: Optional[dict] = None) -> dict:
    user = state.user
    return {
        "transport": state.transport,
        "position_frame": state.position,
        "frame_count": state.frame_count,
        "active_preset": state.active_preset,
        "ui_language": state.ui_language,
        "user": {
            "selected_preset": user.selected_preset,
            "kind_preferences": list(user.kind_preferences),
            "gain_offsets": dict(user.gain_offsets),
            "position_offsets": {
                cid: {"azimuth_deg": az, "elevation_deg": el}
                for cid, (az, el) in user.position_offsets.items()
            },
            "muted": sorted(user.muted),
            "target_layout": user.target_layout.layout_id,
            "target_loudness_lkfs": user.target_loudness,
            "drc_profile": user.drc_profile,
        },
        "scene": None
        if state.scene is None
        else scene_summary(state.scene, state.ui_language),
        "meters": meters or {"momentary_lkfs": None, "clipped_samples": 0},
    }


# ---------------------------------------------------------------------------
# engine


class NullSink:
    def write(self, frame: np.ndarray):
        pass


class CaptureSink:
    """Accumulates rendered frames in memory; optionally writes a WAV."""

    def __init__(self, path: Optional[str | Path] = None, sample_rate: int = 48000):
        self.frames: list[np.ndarray] = []
        self.path = path
        self.sample_rate = sample_rate

    def write(self, frame: np.ndarray):
        self.frames.append(frame)

    def signal(self) -> np.ndarray:
        if not self.frames:
            return np.zeros((0, 2))
        return np.concatenate(self.frames, axis=0)

    def save(self):
        if self.path is not None:
            from .container import write_wav

            write_wav(self.path, self.signal(), self.sample_rate)


class _Ticket:
    __slots__ = ("command", "done", "events")

    def __init__(self, command: ControlCommand):
        self.command = command
        self.done = threading.Event()
        self.events: list[Event] = []


_METER_INTERVAL_SECONDS = 0.0875  # >= 10 Hz updates while playing


class PlayerEngine:
    """Single active scene, one render context, queue-fed control plane.

    The engine thread owns the pipeline and all DSP state. Commands are
    appended to a queue and applied between frames; ``submit`` blocks until
    the engine has applied the command and returns its events. Snapshots
    are immutable dicts republished after every change.
    """

    def __init__(
        self,
        sink=None,
        realtime: bool = False,
        settings_path: Optional[str | Path] = None,
    ):
        self.sink = sink if sink is not None else NullSink()
        self.realtime = realtime
        self.settings_path = Path(settings_path) if settings_path else None
        self.state = PlayerState()
        self._pipeline: Optional[RenderPipeline] = None
        self._reader: Optional[ContainerReader] = None
        self._queue: "queue.Queue[_Ticket]" = queue.Queue()
        self._wake = threading.Condition()
        self._running = False
        self._thread: Optional[threading.Thread] = None
        self._subscribers: list[Callable[[dict], None]] = []
        self._snapshot = state_snapshot(self.state)
        self._meters = {"momentary_lkfs": None, "clipped_samples": 0}
        self._meter_tail: Optional[np.ndarray] = None
        self._frames_since_meter = 0
        if self.settings_path is not None:
            self._load_settings()

    # -- settings persistence (preferences only) ---------------------------

    def _load_settings(self):
        try:
            doc = json.loads(self.settings_path.read_text())
        except (OSError, json.JSONDecodeError):
            return
        user = self.state.user
        if isinstance(doc.get("kind_preferences"), list):
            user = replace(
                user,
                kind_preferences=tuple(
                    k for k in doc["kind_preferences"] if isinstance(k, str)
                ),
            )
        if isinstance(doc.get("target_loudness_lkfs"), (int, float)):
            user = replace(user, target_loudness=float(doc["target_loudness_lkfs"]))
        if isinstance(doc.get("drc_profile"), str):
            user = replace(user, drc_profile=doc["drc_profile"])
        if isinstance(doc.get("target_layout"), str) and doc["target_layout"] in LAYOUTS:
            user = replace(user, target_layout=get_layout(doc["target_layout"]))
        language = doc.get("ui_language")
        self.state = replace(
            self.state,
            user=user,
            ui_language=language if isinstance(language, str) else self.state.ui_language,
        )
        self._snapshot = state_snapshot(self.state, self._meters)

    def _save_settings(self):
        if self.settings_path is None:
            return
        user = self.state.user
        doc = {
            "kind_preferences": list(user.kind_preferences),
            "target_loudness_lkfs": user.target_loudness,
            "drc_profile": user.drc_profile,
            "target_layout": user.target_layout.layout_id,
            "ui_language": self.state.ui_language,
        }
        try:
            self.settings_path.write_text(json.dumps(doc, indent=2))
        except OSError:
            pass

    # -- pub/sub ------------------------------------------------------------

    def subscribe(self, callback: Callable[[dict], None]):
        self._subscribers.append(callback)

    def unsubscribe(self, callback: Callable[[dict], None]):
        if callback in self._subscribers:
            self._subscribers.remove(callback)

    def _publish(self, event: Event):
        doc = event.to_json_dict()
        if event.type == "state-changed":
            doc["state"] = self._snapshot
        for callback in list(self._subscribers):
            callback(doc)

    # -- command plane -------------------------------------------------------

    def submit(self, command: ControlCommand, timeout: float = 10.0) -> list[Event]:
        """Queue a command and wait until the engine has applied it."""
        ticket = _Ticket(command)
        self._queue.put(ticket)
        with self._wake:
            self._wake.notify_all()
        if self._thread is None:
            self.process_pending()
        if not ticket.done.wait(timeout):
            raise ObaError("engine-timeout", "engine did not apply the command in time")
        return ticket.events

    def submit_json(self, doc: dict, timeout: float = 10.0) -> list[Event]:
        return self.submit(command_from_json(doc), timeout)

    def process_pending(self):
        """Apply queued commands; runs on the engine thread between frames."""
        while True:
            try:
                ticket = self._queue.get_nowait()
            except queue.Empty:
                return
            ticket.events = self._apply(ticket.command)
            ticket.done.set()

    def _apply(self, command: ControlCommand) -> list[Event]:
        old_state = self.state
        try:
            new_state, events = handle_command(old_state, command)
        except ObaError as exc:
            events = [Event("error", code=exc.code, message=exc.message)]
            new_state = old_state

        if any(e.type == "state-changed" for e in events):
            try:
                self._adopt(new_state, command)
            except ObaError as exc:
                self.state = old_state
                events = [Event("error", code=exc.code, message=exc.message)]

        for event in events:
            self._publish(event)
        return events

    def _adopt(self, new_state: PlayerState, command: ControlCommand):
        if command.action == "load":
            reader = ContainerReader(new_state.source_path)
            pipeline = RenderPipeline(
                reader.scene, reader, new_state.user, preset_id=new_state.active_preset
            )
            self._reader = reader
            self._pipeline = pipeline
            self._meter_tail = None
            self._meters = {"momentary_lkfs": None, "clipped_samples": 0}
        elif self._pipeline is not None and command.action not in (
            "play",
            "pause",
            "seek",
            "set_ui_language",
        ):
            self._pipeline.update_user(new_state.user, preset_id=new_state.active_preset)
        self.state = new_state
        self._snapshot = state_snapshot(self.state, self._meters)
        if command.action in (
            "set_kind_preferences",
            "set_target_loudness",
            "set_drc",
            "set_layout",
            "set_ui_language",
        ):
            self._save_settings()

    # -- render plane ---------------------------------------------------------

    def snapshot(self) -> dict:
        return self._snapshot

    def scene_json_dict(self) -> Optional[dict]:
        if self.state.scene is None:
            return None
        from .container import scene_to_json_dict

        return scene_to_json_dict(self.state.scene)

    def _update_meters(self, frame: np.ndarray):
        sr = self.state.scene.sample_rate
        block = int(round(0.4 * sr))
        tail = frame if self._meter_tail is None else np.concatenate([self._meter_tail, frame])
        if tail.shape[0] > block:
            tail = tail[-block:]
        self._meter_tail = tail
        self._frames_since_meter += 1
        interval = max(1, int(_METER_INTERVAL_SECONDS * sr / self.state.scene.frame_length))
        if self._frames_since_meter >= interval:
            self._frames_since_meter = 0
            measurement = measure_momentary(tail, self.state.user.target_layout, sr)
            self._meters = {
                "momentary_lkfs": round(measurement.integrated, 2)
                if measurement.valid
                else None,
                "clipped_samples": self._pipeline.clipped_samples,
            }
            self._snapshot = state_snapshot(self.state, self._meters)

    def render_tick(self) -> bool:
        """Render one frame if playing; returns whether audio was produced."""
        if self.state.transport != "playing" or self._pipeline is None:
            return False
        position = self.state.position
        if position >= self.state.frame_count:
            self.state = replace(self.state, transport="stopped")
            self._snapshot = state_snapshot(self.state, self._meters)
            self._publish(Event("eof", message="end of stream"))
            self._publish(Event("state-changed", data={"command": "transport"}))
            return False
        try:
            frame = self._pipeline.render_frame(position)
        except ObaError as exc:
            self.state = replace(self.state, transport="stopped")
            self._snapshot = state_snapshot(self.state, self._meters)
            self._publish(Event("error", code=exc.code, message=exc.message))
            self._publish(Event("state-changed", data={"command": "transport"}))
            return False
        self.sink.write(frame)
        self.state = replace(self.state, position=position + 1)
        self._update_meters(frame)
        self._snapshot = state_snapshot(self.state, self._meters)
        if self.state.position >= self.state.frame_count:
            self.state = replace(self.state, transport="stopped")
            self._snapshot = state_snapshot(self.state, self._meters)
            self._publish(Event("eof", message="end of stream"))
            self._publish(Event("state-changed", data={"command": "transport"}))
        return True

    def run(self):
        """Engine loop: apply queued commands, then render while playing."""
        self._running = True
        next_deadline = None
        while self._running:
            self.process_pending()
            rendered = self.render_tick()
            if rendered and self.realtime:
                frame_seconds = self.state.scene.frame_length / self.state.scene.sample_rate
                now = time.monotonic()
                next_deadline = (next_deadline or now) + frame_seconds
                delay = next_deadline - now
                if delay > 0:
                    time.sleep(delay)
            elif not rendered:
                next_deadline = None
                with self._wake:
                    if self._queue.empty() and self._running:
                        self._wake.wait(timeout=0.05)

    def start(self):
        self._thread = threading.Thread(target=self.run, name="oba-engine", daemon=True)
        self._thread.start()

    def stop(self):
        self._running = False
        with self._wake:
            self._wake.notify_all()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def play_to_end(self):
        """Drive the engine inline (no thread) until playback stops."""
        self.process_pending()
        while self.state.transport == "playing":
            self.process_pending()
            if not self.render_tick():
                break
