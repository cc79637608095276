"""Acceptance suite: one test per criterion, tolerances pinned.

Each test appends a PASS/FAIL line to the summary printed at the end of
the run. All audio is generated, 48 kHz, at most 60 s.
"""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

import conftest
from conftest import SR, make_dialog_scene, noise, noise_audio_for_scene, sine
from randscene import random_scene, track_count

from obakit.authoring import (
    BedSpec,
    VoiceSpec,
    author_ad_scene,
    author_dialog_plus_scene,
    stamp_loudness,
)
from obakit.cli import main as cli_main
from obakit.container import (
    ContainerReader,
    pack_array,
    read_scene_json,
    unpack,
    write_scene_json,
)
from obakit.dynamics import import_automation
from obakit.errors import ObaError
from obakit.layouts import STEREO, SURROUND_5_1
from obakit.loudness import measure_integrated
from obakit.player import CaptureSink, ControlCommand, PlayerEngine, PlayerState, handle_command
from obakit.render import (
    ArraySource,
    RenderPipeline,
    RenderRequest,
    db_to_linear,
    downmix_matrix,
    pan,
    render_offline,
)
from obakit.scene import (
    AudioScene,
    ComponentGroup,
    InteractivityLimits,
    LabelSet,
    ObjectGeometry,
    Position,
    Preset,
    PresetMember,
    UserState,
    clamp_gain,
)

SQ2 = 2.0 ** -0.5


@contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except BaseException:
        conftest.ACCEPTANCE_LINES.append(f"FAIL criterion {number}: {description}")
        raise
    conftest.ACCEPTANCE_LINES.append(f"PASS criterion {number}: {description}")


def speech_shaped(seconds: float, level: float, seed: int) -> np.ndarray:
    from scipy import signal as sps

    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(int(SR * seconds))
    sos = sps.butter(4, [300, 3000], btype="bandpass", fs=SR, output="sos")
    shaped = sps.sosfilt(sos, raw)
    return level * shaped / np.max(np.abs(shaped))


@pytest.fixture(scope="module")
def b1_container(tmp_path_factory):
    """Dialog+ scene: synthetic dipped bed + speech-shaped dialog, 10 s."""
    bed = BedSpec(noise(10.0, 0.08, channels=2, seed=101), label="Background")
    dialog = VoiceSpec(speech_shaped(10.0, 0.18, seed=102), label="Voice-over")
    scene, audio = author_dialog_plus_scene(bed, dialog)
    stamped = stamp_loudness(scene, audio)
    path = tmp_path_factory.mktemp("b1") / "dialogplus.obas"
    pack_array(stamped, audio, path)
    return str(path)


@pytest.fixture(scope="module")
def b2_bundle(tmp_path_factory):
    """AD scene with a -12 dB ducking automation, 8 s."""
    film = BedSpec(noise(8.0, 0.12, channels=2, seed=103), label="Film mix")
    ad = VoiceSpec(
        speech_shaped(8.0, 0.15, seed=104),
        label="Audio description",
        content_kind="audio_description",
    )
    # dense automation at 5 ms resolution: unity, 50 ms fade to -12 dB
    # during speech, 50 ms recovery; values quantized like a DAW export
    t = np.round(np.arange(0.0, 8.0, 0.005), 4)
    g = np.zeros_like(t)
    g[(t >= 2.0) & (t < 2.05)] = np.linspace(0, -12, 10)
    g[(t >= 2.05) & (t < 5.0)] = -12.0
    g[(t >= 5.0) & (t < 5.05)] = np.linspace(-12, 0, 10)
    automation = import_automation(list(zip(t.tolist(), np.round(g, 2).tolist())))
    scene, audio = author_ad_scene(film, ad, automation, epsilon_db=0.1)
    stamped = stamp_loudness(scene, audio)
    path = tmp_path_factory.mktemp("b2") / "ad.obas"
    pack_array(stamped, audio, path)
    return str(path), automation


def test_criterion_1_dialog_plus_end_to_end(b1_container, tmp_path, capsys):
    with criterion(1, "Dialog+ end-to-end: kind selection, +6 dB dialog, both presets at -24 +/- 0.5 LU"):
        # `render --preset hearing_impaired` selects the Dialog+ preset
        out = tmp_path / "hi.wav"
        assert cli_main(["render", b1_container, "--preset", "hearing_impaired", "-o", str(out)]) == 0
        stats_hi = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert stats_hi["preset_id"] == "dialog-plus"

        assert cli_main(
            ["render", b1_container, "--preset", "high_quality_loudspeakers", "-o", str(tmp_path / "d.wav")]
        ) == 0
        stats_default = json.loads(capsys.readouterr().out.strip().splitlines()[-1])

        # both presets land on the -24 LKFS target
        assert abs(stats_hi["integrated_loudness_lkfs"] - (-24.0)) <= 0.5
        assert abs(stats_default["integrated_loudness_lkfs"] - (-24.0)) <= 0.5

        # pre-compensation dialog contribution differs by exactly +6 dB:
        # bit-level scaling check on a source with the bed silenced
        scene, reader = unpack(b1_container)
        audio = reader.read_all()
        audio[:, :2] = 0.0
        solo = ArraySource(audio, SR, scene.frame_length)
        o_default, _ = render_offline(
            RenderRequest(scene, solo, UserState(), preset_id="default-mix", compensation=False)
        )
        o_plus, _ = render_offline(
            RenderRequest(scene, solo, UserState(), preset_id="dialog-plus", compensation=False)
        )
        assert np.array_equal(o_plus, o_default * db_to_linear(6.0))


def test_criterion_2_audio_description_end_to_end(b2_bundle):
    with criterion(2, "AD end-to-end: ducked render matches premix oracle; Default preset is bed passthrough"):
        path, automation = b2_bundle
        scene, reader = unpack(path)
        audio = reader.read_all()

        rendered, _ = render_offline(
            RenderRequest(
                scene, reader, UserState(), preset_id="audio-description", compensation=False
            )
        )

        # offline premix oracle: film scaled by the *original* automation
        # (interpolated in dB) plus the center-panned AD voice
        n = rendered.shape[0]
        t = np.arange(n) / SR
        auto_t = automation.times()
        auto_g = automation.gains()
        duck = 10.0 ** (np.interp(t, auto_t, auto_g) / 20.0)
        oracle = audio[:, :2] * duck[:, np.newaxis]
        oracle = oracle + audio[:, 2][:, np.newaxis] * np.array([[SQ2, SQ2]])

        bound = abs(10.0 ** (-0.1 / 20.0) - 1.0) * np.max(np.abs(oracle))
        deviation = np.max(np.abs(rendered - oracle))
        assert deviation <= bound, f"deviation {deviation} > bound {bound}"

        # the Default preset must be a bit-identical film-mix passthrough
        passthrough, _ = render_offline(
            RenderRequest(scene, reader, UserState(), preset_id="default", compensation=False)
        )
        assert np.array_equal(passthrough, audio[:, :2])


def test_criterion_3_loudness_meter():
    with criterion(3, "loudness meter: 997 Hz sine at -3.01 +/- 0.1 LKFS; gain linearity +/- 0.05 LU"):
        stereo = np.zeros((SR * 10, 2))
        stereo[:, 0] = sine(997.0, 10.0)
        measured = measure_integrated(stereo, STEREO, SR)
        assert measured.valid
        assert abs(measured.integrated - (-3.01)) <= 0.1

        rng = np.random.default_rng(31)
        x = 0.25 * rng.standard_normal((SR * 5, 2))
        base = measure_integrated(x, STEREO, SR).integrated
        for gain_db in (-20.0, -10.0, -3.0):
            scaled = measure_integrated(x * 10 ** (gain_db / 20.0), STEREO, SR).integrated
            assert abs((scaled - base) - gain_db) <= 0.05


def test_criterion_4_interactivity_clamping(packed_dialog):
    with criterion(4, "clamping: 10,000 random pairs in-range/idempotent/monotone; player echo == clamp_gain"):
        rng = np.random.default_rng(41)
        for _ in range(10_000):
            limits = InteractivityLimits(
                gain_min=float(rng.uniform(-30, 0)), gain_max=float(rng.uniform(0, 30))
            )
            lo_req, hi_req = sorted(rng.uniform(-90, 90, size=2))
            lo_out = clamp_gain(limits, float(lo_req))
            hi_out = clamp_gain(limits, float(hi_req))
            assert limits.gain_min <= lo_out <= limits.gain_max
            assert limits.gain_min <= hi_out <= limits.gain_max
            assert clamp_gain(limits, lo_out) == lo_out
            assert lo_out <= hi_out

        state, _ = handle_command(PlayerState(), ControlCommand("load", path=packed_dialog))
        limits = state.scene.component("dialog").interactivity
        for requested in rng.uniform(-60, 60, size=300):
            _, events = handle_command(
                state,
                ControlCommand("set_gain", component_id="dialog", gain_db=float(requested)),
            )
            assert events[0].data["applied_gain_db"] == clamp_gain(limits, float(requested))


@pytest.fixture(scope="module")
def continuity_container(tmp_path_factory):
    """Low-frequency sine scene so transition steps stand out, 12 s."""
    bed_audio = np.stack(
        [0.15 * sine(80.0, 12.0), 0.15 * sine(97.0, 12.0)], axis=1
    )
    dialog_audio = 0.2 * sine(150.0, 12.0)
    scene, audio = author_dialog_plus_scene(BedSpec(bed_audio), VoiceSpec(dialog_audio))
    stamped = stamp_loudness(scene, audio)
    path = tmp_path_factory.mktemp("cont") / "continuity.obas"
    pack_array(stamped, audio, path)
    return str(path)


def test_criterion_5_preset_switch_continuity(continuity_container):
    with criterion(5, "preset switch: steady-segment loudness diff <= 0.5 LU, steps within the 100 ms ramp bound"):
        sink = CaptureSink()
        engine = PlayerEngine(sink=sink)
        engine.submit(ControlCommand("load", path=continuity_container))
        engine.submit(ControlCommand("play"))

        scene = engine.state.scene
        switch_frame = int(6.0 * SR / scene.frame_length)
        while engine.state.transport == "playing":
            if engine.state.position == switch_frame:
                engine.submit(ControlCommand("select_preset", preset_id="dialog-plus"))
            if not engine.render_tick():
                break

        out = sink.signal()
        seg_a = out[SR : int(5.5 * SR)]
        seg_b = out[int(7.0 * SR) : int(11.5 * SR)]
        loud_a = measure_integrated(seg_a, STEREO, SR).integrated
        loud_b = measure_integrated(seg_b, STEREO, SR).integrated
        assert abs(loud_a - loud_b) <= 0.5, f"{loud_a} vs {loud_b}"

        # per-sample steps across the transition stay within the ramp
        # bound: natural signal motion (with margin for the gain change)
        # plus the per-sample ramp increment against the signal peak
        mono = np.max(np.abs(np.diff(out, axis=0)), axis=1)
        switch_sample = switch_frame * scene.frame_length
        steady_step = np.max(mono[SR : int(5.5 * SR)])
        window = mono[switch_sample - 100 : switch_sample + int(0.15 * SR)]
        peak = np.max(np.abs(out))
        ramp_len = int(0.1 * SR)
        bound = steady_step * 1.5 + peak * 4.0 / ramp_len
        assert np.max(window) <= bound, f"step {np.max(window)} > bound {bound}"

        # sanity: an instant switch would overshoot that bound
        jump = abs(db_to_linear(6.0) - 1.0) * 0.2 * SQ2
        assert jump > bound


def test_criterion_6_panning_and_downmix():
    with criterion(6, "panning power norm over 3601 azimuths; golden 5.1->2.0 matrix; center at 1/sqrt(2)"):
        for layout in (STEREO, SURROUND_5_1):
            for az in np.linspace(-180.0, 180.0, 3601):
                gains = pan(Position(float(az), 0.0), layout).gains
                assert abs(float(np.sum(gains * gains)) - 1.0) <= 1e-9

        c = 1.0 / np.sqrt(2.0)
        scale = 1.0 / (1.0 + 2.0 * c)
        golden = np.array(
            [
                [scale, 0.0, scale * c, 0.0, scale * c, 0.0],
                [0.0, scale, scale * c, 0.0, 0.0, scale * c],
            ]
        )
        np.testing.assert_allclose(downmix_matrix(SURROUND_5_1, STEREO), golden, atol=1e-15)

        center = pan(Position(0.0, 0.0), STEREO).gains
        assert abs(center[0] - SQ2) <= 1e-9
        assert abs(center[1] - SQ2) <= 1e-9


def test_criterion_7_serialization(tmp_path):
    with criterion(7, "round-trips: 200 random scenes lossless; 1,000 mutated containers fail structurally"):
        rng = np.random.default_rng(71)
        for i in range(200):
            scene = random_scene(rng)
            assert read_scene_json(write_scene_json(scene)) == scene

            channels = track_count(scene)
            samples = (0.2 * rng.standard_normal((scene.frame_length * 2, channels))).astype(
                np.float32
            )
            path = tmp_path / "roundtrip.obas"
            pack_array(scene, samples, path)
            loaded_scene, reader = unpack(path)
            assert loaded_scene == scene
            np.testing.assert_array_equal(
                reader.read_all().astype(np.float32), samples
            )
            reader.close()

        base_scene = make_dialog_scene()
        base_path = tmp_path / "base.obas"
        pack_array(base_scene, noise_audio_for_scene(0.5).astype(np.float32), base_path)
        base = base_path.read_bytes()
        header_len = 28

        crashes = 0
        must_fail_ok = 0
        for i in range(1000):
            kind = i % 5
            mutated = bytearray(base)
            must_fail = False
            if kind == 0:  # truncate
                cut = int(rng.integers(0, len(base)))
                mutated = mutated[:cut]
                must_fail = True
            elif kind == 1:  # header byte flip
                offset = int(rng.integers(0, header_len))
                mutated[offset] ^= int(rng.integers(1, 256))
                must_fail = True
            elif kind == 2:  # scene JSON region flip
                offset = int(rng.integers(header_len, header_len + 200))
                mutated[offset] ^= int(rng.integers(1, 256))
            elif kind == 3:  # payload flip
                offset = int(rng.integers(len(base) - 500, len(base)))
                mutated[offset] ^= int(rng.integers(1, 256))
            else:  # garbage appended
                mutated.extend(rng.integers(0, 256, size=int(rng.integers(1, 64))).astype(np.uint8).tobytes())
                must_fail = True

            target = tmp_path / "mutated.obas"
            target.write_bytes(bytes(mutated))
            try:
                _, mutated_reader = unpack(target)
                mutated_reader.close()
                outcome = "ok"
            except ObaError:
                outcome = "error"
            except Exception:
                crashes += 1
                outcome = "crash"
            if must_fail:
                assert outcome == "error", f"mutation kind {kind} iteration {i}: {outcome}"
                must_fail_ok += 1
        assert crashes == 0
        assert must_fail_ok == 600  # all truncation/header/append mutations errored


@pytest.fixture(scope="module")
def eight_object_container(tmp_path_factory):
    """60 s, 8 mono objects at spread azimuths, two with ducking tracks."""
    from obakit.dynamics import DynamicGainTrack

    seconds = 60.0
    n = int(SR * seconds)
    t = np.arange(n) / SR
    freqs = [110.0, 220.0, 330.0, 440.0, 550.0, 660.0, 770.0, 880.0]
    azimuths = [0.0, 45.0, -45.0, 90.0, -90.0, 135.0, -135.0, 180.0]
    audio = np.empty((n, 8), dtype=np.float32)
    for ch, freq in enumerate(freqs):
        audio[:, ch] = (0.1 * np.sin(2 * np.pi * freq * t)).astype(np.float32)

    tracks = {
        "duck-a": DynamicGainTrack("duck-a", ((0.0, 0.0), (20.0, -9.0), (40.0, 0.0), (60.0, -3.0))),
        "duck-b": DynamicGainTrack("duck-b", ((0.0, -6.0), (30.0, 0.0), (60.0, -6.0))),
    }
    components = tuple(
        ComponentGroup(
            component_id=f"obj-{i}",
            labels=LabelSet.of(f"Object {i}"),
            content_kind="effects",
            tracks=(i,),
            geometry=ObjectGeometry(Position(azimuths[i], 0.0, 1.0)),
            interactivity=InteractivityLimits(gain_min=-6.0, gain_max=6.0),
            measured_loudness=-20.0,
        )
        for i in range(8)
    )
    members = tuple(
        PresetMember(
            f"obj-{i}",
            dynamic_gain="duck-a" if i == 0 else ("duck-b" if i == 3 else None),
        )
        for i in range(8)
    )
    scene = AudioScene(
        scene_id="benchmark-8",
        sample_rate=SR,
        frame_length=1024,
        components=components,
        presets=(
            Preset("all", LabelSet.of("All"), "default", members, measured_loudness=-11.0),
        ),
        default_preset_id="all",
        gain_tracks=tracks,
    )
    path = tmp_path_factory.mktemp("bench") / "bench.obas"
    pack_array(scene, audio, path)
    return str(path)


def test_criterion_8_determinism_and_performance(eight_object_container):
    with criterion(8, "determinism: repeated renders bit-identical; 60 s / 8 objects renders >= 1x real time"):
        scene, reader = unpack(eight_object_container)

        start = time.perf_counter()
        first, stats = render_offline(RenderRequest(scene, reader, UserState()))
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, f"render took {elapsed:.1f} s"

        second, _ = render_offline(RenderRequest(scene, reader, UserState()))
        assert np.array_equal(first, second)
        conftest.ACCEPTANCE_LINES.append(
            f"      (criterion 8 render: {elapsed:.1f} s for 60 s of audio, "
            f"clipped={stats.clipped_samples})"
        )


def test_criterion_9_player_protocol(packed_dialog):
    with criterion(9, "player protocol: 1,000 random command sequences keep invariants; service == offline"):
        base, _ = handle_command(PlayerState(), ControlCommand("load", path=packed_dialog))
        scene = base.scene
        components = [c.component_id for c in scene.components] + ["ghost"]
        presets = [p.preset_id for p in scene.presets] + ["ghost"]
        kinds = ["hearing_impaired", "audio_description", "vendor-x"]
        layouts = ["mono_1_0", "stereo_2_0", "surround_5_1"]
        rng = np.random.default_rng(91)

        def random_command():
            roll = int(rng.integers(0, 11))
            if roll == 0:
                return ControlCommand("play")
            if roll == 1:
                return ControlCommand("pause")
            if roll == 2:
                return ControlCommand("seek", frame=int(rng.integers(-10, 300)))
            if roll == 3:
                return ControlCommand("select_preset", preset_id=presets[rng.integers(len(presets))])
            if roll == 4:
                size = int(rng.integers(0, 3))
                return ControlCommand(
                    "set_kind_preferences",
                    kinds=tuple(rng.choice(kinds, size=size, replace=False)),
                )
            if roll == 5:
                return ControlCommand(
                    "set_gain",
                    component_id=components[rng.integers(len(components))],
                    gain_db=float(rng.uniform(-40, 40)),
                )
            if roll == 6:
                return ControlCommand(
                    "set_position",
                    component_id=components[rng.integers(len(components))],
                    azimuth_deg=float(rng.uniform(-500, 500)),
                    elevation_deg=float(rng.uniform(-120, 120)),
                )
            if roll == 7:
                return ControlCommand(
                    "set_mute",
                    component_id=components[rng.integers(len(components))],
                    muted=bool(rng.integers(2)),
                )
            if roll == 8:
                return ControlCommand("set_layout", layout_id=layouts[rng.integers(3)])
            if roll == 9:
                return ControlCommand("set_drc", profile_id=["none", "limited", "bogus", None][rng.integers(4)])
            return ControlCommand("set_target_loudness", target_lkfs=float(rng.uniform(-40, -6)))

        for _ in range(1000):
            state = base
            for _ in range(8):
                state, _ = handle_command(state, random_command())
                _assert_player_invariants(state)

        # a fixed user state end to end: the engine's audio equals offline
        sink = CaptureSink()
        engine = PlayerEngine(sink=sink)
        engine.submit(ControlCommand("load", path=packed_dialog))
        engine.submit(ControlCommand("play"))
        engine.play_to_end()
        offline_scene, offline_reader = unpack(packed_dialog)
        offline, _ = render_offline(RenderRequest(offline_scene, offline_reader, UserState()))
        assert np.array_equal(sink.signal(), offline)


def _assert_player_invariants(state: PlayerState):
    scene = state.scene
    assert state.transport in ("stopped", "playing", "paused")
    assert 0 <= state.position <= state.frame_count
    assert scene.has_preset(state.active_preset)
    preset = scene.preset(state.active_preset)
    for cid, offset in state.user.gain_offsets.items():
        limits = scene.effective_limits(preset, cid)
        assert limits.gain_min <= offset <= limits.gain_max
    for cid, (az, el) in state.user.position_offsets.items():
        limits = scene.effective_limits(preset, cid)
        assert -limits.azimuth_range <= az <= limits.azimuth_range
        assert limits.elevation_min <= el <= limits.elevation_max
    for cid in state.user.muted:
        assert scene.component(cid).interactivity.on_off_allowed
    if state.user.drc_profile is not None:
        from obakit.dynamics import builtin_drc_profiles

        assert (
            state.user.drc_profile in builtin_drc_profiles()
            or state.user.drc_profile in scene.drc_profiles
        )
