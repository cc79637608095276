import dataclasses
import math

import numpy as np
import pytest

from obakit.errors import ObaError
from obakit.layouts import MONO, STEREO, SURROUND_5_1
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
    LabelSet,
    ObjectGeometry,
    Position,
    Preset,
    PresetMember,
    UserState,
)

from conftest import SR, sine, noise

SQ2 = 2.0 ** -0.5


def object_scene(position=Position(0, 0, 1.0), default_gain=0.0, loudness=-20.0):
    comp = ComponentGroup(
        component_id="obj",
        labels=LabelSet.of("Object"),
        content_kind="effects",
        tracks=(0,),
        geometry=ObjectGeometry(position),
        default_gain=default_gain,
        measured_loudness=loudness,
    )
    preset = Preset(
        "main", LabelSet.of("Main"), "default", (PresetMember("obj"),), measured_loudness=loudness
    )
    return AudioScene(
        scene_id="obj-scene",
        sample_rate=SR,
        frame_length=512,
        components=(comp,),
        presets=(preset,),
        default_preset_id="main",
    )


class TestPan:
    def test_center_on_stereo(self):
        gains = pan(Position(0, 0), STEREO).gains
        assert abs(gains[0] - SQ2) < 1e-9
        assert abs(gains[1] - SQ2) < 1e-9

    def test_at_left_speaker(self):
        gains = pan(Position(30, 0), STEREO).gains
        np.testing.assert_allclose(gains, [1.0, 0.0], atol=1e-12)

    def test_rear_on_51_splits_surrounds(self):
        gains = pan(Position(180, 0), SURROUND_5_1).gains
        ls = SURROUND_5_1.speakers.index(
            next(s for s in SURROUND_5_1.speakers if s.name == "Ls")
        )
        rs = SURROUND_5_1.speakers.index(
            next(s for s in SURROUND_5_1.speakers if s.name == "Rs")
        )
        assert abs(gains[ls] - SQ2) < 1e-9
        assert abs(gains[rs] - SQ2) < 1e-9

    def test_mono_is_unity(self):
        np.testing.assert_array_equal(pan(Position(123, 45), MONO).gains, [1.0])

    @pytest.mark.parametrize("layout", [STEREO, SURROUND_5_1])
    def test_power_normalized_everywhere(self, layout):
        azimuths = np.linspace(-180.0, 180.0, 3601)
        for az in azimuths:
            gains = pan(Position(az, 0), layout).gains
            assert abs(np.sum(gains**2) - 1.0) <= 1e-9
            assert np.all(gains >= 0.0)

    def test_lfe_always_silent(self):
        lfe = SURROUND_5_1.lfe_indices()[0]
        for az in (-170, -90, 0, 45, 110):
            assert pan(Position(az, 0), SURROUND_5_1).gains[lfe] == 0.0

    @pytest.mark.parametrize("layout", [STEREO, SURROUND_5_1])
    def test_no_discontinuity_at_speaker_boundaries(self, layout):
        eps = 1e-5
        boundaries = [s.azimuth for s in layout.speakers if not s.is_lfe]
        boundaries += [90.0, -90.0, 180.0, -180.0 + eps]
        for b in boundaries:
            lo = pan(Position(b - eps, 0), layout).gains
            hi = pan(Position(b + eps, 0), layout).gains
            assert np.max(np.abs(hi - lo)) < 1e-6

    def test_elevation_folds_without_attenuation(self):
        flat = pan(Position(10, 0), STEREO).gains
        raised = pan(Position(10, 25), STEREO).gains
        np.testing.assert_array_equal(flat, raised)


class TestDownmix:
    def test_identity(self):
        np.testing.assert_array_equal(downmix_matrix(STEREO, STEREO), np.eye(2))

    def test_5_1_to_stereo_golden(self):
        c = 1.0 / math.sqrt(2.0)
        scale = 1.0 / (1.0 + 2.0 * c)
        golden = np.array(
            [
                [scale, 0.0, scale * c, 0.0, scale * c, 0.0],
                [0.0, scale, scale * c, 0.0, 0.0, scale * c],
            ]
        )
        np.testing.assert_allclose(downmix_matrix(SURROUND_5_1, STEREO), golden, atol=1e-15)

    def test_stereo_to_mono_preserves_identical_channels(self):
        matrix = downmix_matrix(STEREO, MONO)
        x = np.array([[0.3, 0.3], [-0.2, -0.2]])
        np.testing.assert_array_equal(x @ matrix.T, [[0.3], [-0.2]])

    def test_upmix_unsupported(self):
        with pytest.raises(ObaError) as err:
            downmix_matrix(MONO, STEREO)
        assert err.value.code == "unsupported-downmix"

    def test_5_1_to_mono_is_composition(self):
        composed = downmix_matrix(STEREO, MONO) @ downmix_matrix(SURROUND_5_1, STEREO)
        np.testing.assert_array_equal(downmix_matrix(SURROUND_5_1, MONO), composed)


class TestRenderFrame:
    def test_center_object_is_input_over_sqrt2(self):
        scene = object_scene()
        x = sine(440.0, 0.25, 0.5)
        source = ArraySource(x, SR, scene.frame_length)
        pipeline = RenderPipeline(scene, source, UserState(), compensation=False)
        out = pipeline.render_frame(0)
        expected = x[: scene.frame_length, np.newaxis] * np.array([[SQ2, SQ2]])
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_muted_member_contributes_exact_zeros(self, dialog_scene):
        # muting must equal rendering with the member's track silenced
        audio = noise(0.2, 0.2, channels=3, seed=2)
        zeroed = audio.copy()
        zeroed[:, 2] = 0.0
        fl = dialog_scene.frame_length
        muted_render = RenderPipeline(
            dialog_scene,
            ArraySource(audio, SR, fl),
            UserState(muted=frozenset({"dialog"})),
            compensation=False,
        ).render_frame(0)
        silent_track = RenderPipeline(
            dialog_scene, ArraySource(zeroed, SR, fl), UserState(), compensation=False
        ).render_frame(0)
        np.testing.assert_array_equal(muted_render, silent_track)

    def test_static_gain_is_exact_scalar_factor(self, dialog_scene):
        # dialog differs by +6 dB between presets: outputs are exact multiples
        audio = np.zeros((SR // 2, 3))
        audio[:, 2] = sine(440.0, 0.5, 0.25)
        source = ArraySource(audio, SR, dialog_scene.frame_length)
        base = RenderPipeline(
            dialog_scene, source, UserState(), preset_id="default-mix", compensation=False
        )
        boosted = RenderPipeline(
            dialog_scene, source, UserState(), preset_id="dialog-plus", compensation=False
        )
        o1 = base.render_frame(1)
        o2 = boosted.render_frame(1)
        np.testing.assert_array_equal(o2, o1 * db_to_linear(6.0))

    def test_user_offset_applies(self, dialog_scene):
        audio = np.zeros((SR // 2, 3))
        audio[:, 2] = sine(300.0, 0.5, 0.2)
        source = ArraySource(audio, SR, dialog_scene.frame_length)
        plain = RenderPipeline(dialog_scene, source, UserState(), compensation=False)
        offset = RenderPipeline(
            dialog_scene, source, UserState(gain_offsets={"dialog": -9.0}), compensation=False
        )
        np.testing.assert_array_equal(
            offset.render_frame(0), plain.render_frame(0) * db_to_linear(-9.0)
        )

    def test_distance_gain_clamped(self):
        x = sine(200.0, 0.1, 0.1)
        near = object_scene(Position(0, 0, 0.1))
        source = ArraySource(x, SR, near.frame_length)
        out_near = RenderPipeline(near, source, UserState(), compensation=False).render_frame(0)
        reference = RenderPipeline(
            object_scene(Position(0, 0, 1.0)), source, UserState(), compensation=False
        ).render_frame(0)
        np.testing.assert_array_equal(out_near, reference * 2.0)

    def test_eof(self):
        scene = object_scene()
        source = ArraySource(np.zeros(1000), SR, scene.frame_length)
        pipeline = RenderPipeline(scene, source, UserState(), compensation=False)
        with pytest.raises(ObaError) as err:
            pipeline.render_frame(source.frame_count)
        assert err.value.code == "eof"

    def test_unsupported_layout_raises_up_front(self, dialog_scene):
        source = ArraySource(np.zeros((SR, 3)), SR, dialog_scene.frame_length)
        user = UserState(target_layout=SURROUND_5_1)  # stereo bed cannot upmix
        with pytest.raises(ObaError) as err:
            RenderPipeline(dialog_scene, source, user, compensation=False)
        assert err.value.code == "unsupported-downmix"

    def test_rendering_linear_in_signals(self, dialog_scene):
        # amplitudes kept low so the clip guard never engages
        rng = np.random.default_rng(11)
        a = 0.05 * rng.standard_normal((SR // 2, 3))
        b = 0.05 * rng.standard_normal((SR // 2, 3))
        fl = dialog_scene.frame_length

        def frame(sig):
            pipeline = RenderPipeline(
                dialog_scene, ArraySource(sig, SR, fl), UserState(), compensation=False
            )
            return pipeline.render_frame(0)

        np.testing.assert_allclose(frame(a + b), frame(a) + frame(b), atol=1e-12)

    def test_dynamic_track_equals_offline_premix(self):
        from obakit.dynamics import DynamicGainTrack

        scene = object_scene()
        track = DynamicGainTrack("duck", ((0.0, 0.0), (0.25, -12.0), (0.5, 0.0)))
        preset = Preset(
            "main",
            LabelSet.of("Main"),
            "default",
            (PresetMember("obj", dynamic_gain="duck"),),
            measured_loudness=-20.0,
        )
        scene = dataclasses.replace(scene, presets=(preset,), gain_tracks={"duck": track})
        x = noise(0.5, 0.3, seed=4)
        source = ArraySource(x, SR, scene.frame_length)
        request = RenderRequest(scene, source, UserState(), compensation=False)
        rendered, _ = render_offline(request)

        from obakit.dynamics import gain_at

        n = source.frame_count * scene.frame_length
        padded = np.zeros(n)
        padded[: x.shape[0]] = x
        t = np.arange(n) / SR
        premixed = padded * 10.0 ** (gain_at(track, t) / 20.0)
        np.testing.assert_allclose(
            rendered, premixed[:, np.newaxis] * np.array([[SQ2, SQ2]]), atol=1e-15
        )


class TestRenderOffline:
    def test_silence_scene(self):
        scene = object_scene()
        source = ArraySource(np.zeros(SR), SR, scene.frame_length)
        signal, stats = render_offline(
            RenderRequest(scene, source, UserState(), compensation=False)
        )
        assert np.all(signal == 0.0)
        assert stats.integrated_loudness is None
        assert stats.clipped_samples == 0

    def test_compensation_hits_target(self):
        scene = object_scene(loudness=None)
        x = noise(10.0, 0.2, seed=8)
        source = ArraySource(x, SR, scene.frame_length)
        # stamp the component with its true measured solo loudness first
        from obakit.loudness import measure_integrated

        solo = x[:, np.newaxis] * np.array([[SQ2, SQ2]])
        measured = measure_integrated(solo, STEREO, SR).integrated
        scene = scene.with_loudness({"obj": measured}, {"main": measured})
        signal, stats = render_offline(
            RenderRequest(scene, source, UserState(target_loudness=-24.0))
        )
        assert stats.integrated_loudness == pytest.approx(-24.0, abs=0.2)

    def test_determinism_bit_identical(self, dialog_scene):
        audio = noise(1.0, 0.2, channels=3, seed=13)
        source = ArraySource(audio, SR, dialog_scene.frame_length)
        request = RenderRequest(dialog_scene, source, UserState())
        first, _ = render_offline(request)
        second, _ = render_offline(request)
        np.testing.assert_array_equal(first, second)

    def test_clip_guard_counts_and_limits(self):
        scene = object_scene(default_gain=24.0)
        x = sine(100.0, 0.5, 0.9)
        source = ArraySource(x, SR, scene.frame_length)
        signal, stats = render_offline(
            RenderRequest(scene, source, UserState(), compensation=False)
        )
        assert stats.clipped_samples > 0
        assert np.max(np.abs(signal)) <= 1.0

    def test_preset_override_respected(self, dialog_scene):
        audio = noise(0.5, 0.1, channels=3, seed=3)
        source = ArraySource(audio, SR, dialog_scene.frame_length)
        request = RenderRequest(
            dialog_scene, source, UserState(), preset_id="dialog-plus", compensation=False
        )
        signal_plus, _ = render_offline(request)
        request_def = dataclasses.replace(request, preset_id="default-mix")
        signal_def, _ = render_offline(request_def)
        assert not np.array_equal(signal_plus, signal_def)


class TestLoudnessInvariance:
    def test_user_gain_offset_keeps_output_loudness(self):
        # compensation absorbs a +9 dB dialog boost to within 1 LU
        from obakit.authoring import BedSpec, VoiceSpec, author_dialog_plus_scene, stamp_loudness
        from obakit.loudness import measure_integrated

        rng = np.random.default_rng(55)
        bed = BedSpec(0.08 * rng.standard_normal((SR * 6, 2)))
        dialog = VoiceSpec(0.12 * rng.standard_normal(SR * 6))
        scene, audio = author_dialog_plus_scene(bed, dialog)
        scene = stamp_loudness(scene, audio)
        source = ArraySource(audio, SR, scene.frame_length)

        flat, _ = render_offline(RenderRequest(scene, source, UserState()))
        boosted, _ = render_offline(
            RenderRequest(scene, source, UserState(gain_offsets={"dialog": 9.0}))
        )
        loud_flat = measure_integrated(flat, STEREO, SR).integrated
        loud_boosted = measure_integrated(boosted, STEREO, SR).integrated
        assert abs(loud_boosted - loud_flat) <= 1.0
