"""Shared fixtures: deterministic signals and ready-made scenes."""

from __future__ import annotations

import numpy as np
import pytest

# filled by test_acceptance.py; printed after the run so the per-criterion
# verdicts are visible regardless of output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from obakit.layouts import STEREO
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
)

SR = 48000


def sine(freq: float, seconds: float, amplitude: float = 1.0, sr: int = SR) -> np.ndarray:
    t = np.arange(int(round(seconds * sr))) / sr
    return amplitude * np.sin(2.0 * np.pi * freq * t)


def noise(seconds: float, amplitude: float = 0.1, sr: int = SR, seed: int = 0, channels: int = 1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    data = amplitude * rng.standard_normal((int(round(seconds * sr)), channels))
    return data[:, 0] if channels == 1 else data


def make_dialog_scene() -> AudioScene:
    """Hand-built two-preset scene: stereo bed plus one dialog object."""
    bed = ComponentGroup(
        component_id="bed",
        labels=LabelSet.of("Background"),
        content_kind="mixed_bed",
        tracks=(0, 1),
        geometry=BedGeometry(STEREO),
        measured_loudness=-26.0,
    )
    dialog = ComponentGroup(
        component_id="dialog",
        labels=LabelSet.of("Voice-over"),
        content_kind="dialogue",
        tracks=(2,),
        geometry=ObjectGeometry(Position(0.0, 0.0, 1.0)),
        interactivity=InteractivityLimits(gain_min=-9.0, gain_max=9.0, on_off_allowed=True),
        measured_loudness=-25.0,
    )
    presets = (
        Preset(
            preset_id="default-mix",
            labels=LabelSet.of("Default mix"),
            kind="high_quality_loudspeakers",
            members=(PresetMember("bed"), PresetMember("dialog")),
            measured_loudness=-22.5,
        ),
        Preset(
            preset_id="dialog-plus",
            labels=LabelSet.of("Dialog+"),
            kind="hearing_impaired",
            members=(PresetMember("bed"), PresetMember("dialog", static_gain=6.0)),
            measured_loudness=-20.0,
        ),
    )
    return AudioScene(
        scene_id="fixture",
        sample_rate=SR,
        frame_length=1024,
        components=(bed, dialog),
        presets=presets,
        default_preset_id="default-mix",
    )


def noise_audio_for_scene(seconds: float = 2.0) -> np.ndarray:
    audio = np.zeros((int(SR * seconds), 3))
    audio[:, :2] = noise(seconds, 0.08, channels=2, seed=40)
    audio[:, 2] = sine(440.0, seconds, 0.1)
    return audio


@pytest.fixture
def dialog_scene() -> AudioScene:
    return make_dialog_scene()


@pytest.fixture(scope="session")
def packed_dialog(tmp_path_factory) -> str:
    """A container on disk: the fixture scene over 2 s of audio."""
    from obakit.container import pack_array

    path = tmp_path_factory.mktemp("container") / "fixture.obas"
    pack_array(make_dialog_scene(), noise_audio_for_scene(), path)
    return str(path)
