"""Integrated loudness measurement and real-time loudness compensation.

Measurement is the broadcast-standard K-weighted, two-stage-gated
integrated loudness: per-channel K-weighting (high-frequency shelf plus
high-pass), per-channel weights with surrounds raised 1.5 dB and the LFE
excluded, 400 ms blocks with 75% overlap, a -70 LKFS absolute gate and a
-10 LU relative gate.

Playback-side compensation never measures the output signal; it predicts
the loudness of the active mix from the per-component loudness stored at
authoring time (a power sum, which assumes components are mutually
incoherent) and ramps the correction gain to avoid level jumps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import ObaError
from .layouts import SpeakerLayout
from .scene import Preset

BLOCK_SECONDS = 0.4
BLOCK_OVERLAP = 0.75
ABSOLUTE_GATE_LKFS = -70.0
RELATIVE_GATE_LU = -10.0
_OFFSET_DB = -0.691  # calibrates a 997 Hz full-scale sine in one channel to -3.01 LKFS

SURROUND_WEIGHT = 10.0 ** (1.5 / 10.0)

SUPPORTED_RATES = (48000, 44100)


@dataclass(frozen=True)
class LoudnessMeasurement:
    integrated: float  # LKFS; -inf when invalid
    valid: bool

    @classmethod
    def invalid(cls) -> "LoudnessMeasurement":
        return cls(integrated=float("-inf"), valid=False)


def k_weighting_sos(sample_rate: int) -> np.ndarray:
    """Design the two-stage K-weighting filter for a sample rate.

    Shelf and high-pass parameters reproduce the standard 48 kHz
    coefficients exactly and scale analytically to other rates.
    """
    # stage 1: high-frequency shelf
    f0 = 1681.9744509555319
    gain_db = 3.99984385397
    q = 0.7071752369554193
    k = math.tan(math.pi * f0 / sample_rate)
    vh = 10.0 ** (gain_db / 20.0)
    vb = vh ** 0.499666774155
    a0 = 1.0 + k / q + k * k
    shelf_b = [
        (vh + vb * k / q + k * k) / a0,
        2.0 * (k * k - vh) / a0,
        (vh - vb * k / q + k * k) / a0,
    ]
    shelf_a = [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0]

    # stage 2: high-pass
    f0 = 38.13547087613982
    q = 0.5003270373253953
    k = math.tan(math.pi * f0 / sample_rate)
    a0 = 1.0 + k / q + k * k
    hp_b = [1.0, -2.0, 1.0]
    hp_a = [1.0, 2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0]

    return np.array([shelf_b + shelf_a, hp_b + hp_a])


def channel_weights(layout: SpeakerLayout) -> np.ndarray:
    """Per-channel energy weights: LFE excluded, surrounds +1.5 dB."""
    weights = []
    for speaker in layout.speakers:
        if speaker.is_lfe:
            weights.append(0.0)
        elif 60.0 <= abs(speaker.azimuth) <= 120.0:
            weights.append(SURROUND_WEIGHT)
        else:
            weights.append(1.0)
    return np.array(weights)


def measure_integrated(
    signal: np.ndarray, layout: SpeakerLayout, sample_rate: int
) -> LoudnessMeasurement:
    """Integrated loudness of a (samples, channels) buffer in LKFS.

    Returns an invalid measurement when every block sits below the
    absolute gate (e.g. digital silence).
    """
    if sample_rate not in SUPPORTED_RATES:
        raise ObaError(
            "unsupported-sample-rate",
            f"loudness measurement supports {SUPPORTED_RATES}, got {sample_rate}",
        )
    samples = np.asarray(signal, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, np.newaxis]
    if samples.shape[1] != layout.channel_count:
        raise ObaError(
            "layout-mismatch",
            f"signal has {samples.shape[1]} channels, layout "
            f"{layout.layout_id} has {layout.channel_count}",
        )
    block = int(round(BLOCK_SECONDS * sample_rate))
    hop = int(round(block * (1.0 - BLOCK_OVERLAP)))
    if samples.shape[0] < block:
        raise ObaError(
            "too-short",
            f"need at least {block} samples ({BLOCK_SECONDS * 1000:.0f} ms), got {samples.shape[0]}",
        )

    weights = channel_weights(layout)
    sos = k_weighting_sos(sample_rate)
    filtered = sps.sosfilt(sos, samples, axis=0)
    squared = filtered * filtered

    n_blocks = 1 + (samples.shape[0] - block) // hop
    # weighted mean-square power per complete 400 ms block
    powers = np.empty(n_blocks)
    cumulative = np.concatenate(
        [np.zeros((1, squared.shape[1])), np.cumsum(squared, axis=0)]
    )
    for j in range(n_blocks):
        start = j * hop
        block_ms = (cumulative[start + block] - cumulative[start]) / block
        powers[j] = float(block_ms @ weights)

    return _gated_loudness(powers)


def _gated_loudness(block_powers: np.ndarray) -> LoudnessMeasurement:
    absolute_threshold = 10.0 ** ((ABSOLUTE_GATE_LKFS - _OFFSET_DB) / 10.0)
    above_absolute = block_powers[block_powers > absolute_threshold]
    if above_absolute.size == 0:
        return LoudnessMeasurement.invalid()
    relative_threshold = (
        _OFFSET_DB
        + 10.0 * math.log10(float(np.mean(above_absolute)))
        + RELATIVE_GATE_LU
    )
    gate = 10.0 ** ((relative_threshold - _OFFSET_DB) / 10.0)
    gated = block_powers[
        (block_powers > absolute_threshold) & (block_powers > gate)
    ]
    if gated.size == 0:
        return LoudnessMeasurement.invalid()
    integrated = _OFFSET_DB + 10.0 * math.log10(float(np.mean(gated)))
    return LoudnessMeasurement(integrated=integrated, valid=True)


def measure_momentary(
    tail: np.ndarray, layout: SpeakerLayout, sample_rate: int
) -> LoudnessMeasurement:
    """Loudness of the most recent 400 ms block; used by the player meter."""
    samples = np.asarray(tail, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, np.newaxis]
    block = int(round(BLOCK_SECONDS * sample_rate))
    if samples.shape[0] < block:
        return LoudnessMeasurement.invalid()
    samples = samples[-block:]
    sos = k_weighting_sos(sample_rate)
    filtered = sps.sosfilt(sos, samples, axis=0)
    power = float(np.mean(filtered * filtered, axis=0) @ channel_weights(layout))
    absolute_threshold = 10.0 ** ((ABSOLUTE_GATE_LKFS - _OFFSET_DB) / 10.0)
    if power <= absolute_threshold:
        return LoudnessMeasurement.invalid()
    return LoudnessMeasurement(_OFFSET_DB + 10.0 * math.log10(power), True)


def estimate_active_loudness(
    preset: Preset,
    component_loudness: dict[str, float | None],
    offsets: dict[str, float],
    muted: frozenset[str] | set[str] = frozenset(),
) -> float:
    """Predicted loudness of the active mix from stored per-component values.

    Power sum over the preset's unmuted members of the component loudness
    plus the member's static gain plus the user's offset. Assumes the
    components are incoherent, which slightly overestimates correlated
    mixes.
    """
    total_power = 0.0
    active = 0
    for member in preset.members:
        if member.component_id in muted:
            continue
        loudness = component_loudness.get(member.component_id)
        if loudness is None or not math.isfinite(loudness):
            raise ObaError(
                "missing-metadata",
                f"no stored loudness for component {member.component_id!r}",
            )
        level = loudness + member.static_gain + offsets.get(member.component_id, 0.0)
        total_power += 10.0 ** (level / 10.0)
        active += 1
    if active == 0 or total_power <= 0.0:
        return float("-inf")
    return 10.0 * math.log10(total_power)


def compensation_gain(target: float, estimated: float) -> float:
    """Gain in dB that brings the estimated loudness to the target."""
    return target - estimated


@dataclass
class CompensatorState:
    """Smoothed gain state; ramps are linear in dB.

    When a new target arrives, the gain ramps there from its current value
    over ``ramp_length_default`` samples, so successive calls always
    produce a continuous trajectory with per-sample steps bounded by
    ``|delta| / ramp_length`` dB.
    """

    current_gain: float = 0.0
    ramp_remaining: int = 0
    ramp_target: float = 0.0
    ramp_length_default: int = 4800  # 100 ms at 48 kHz

    @classmethod
    def at_gain(cls, gain_db: float, ramp_length: int = 4800) -> "CompensatorState":
        return cls(
            current_gain=gain_db,
            ramp_remaining=0,
            ramp_target=gain_db,
            ramp_length_default=ramp_length,
        )


def advance_compensator(
    state: CompensatorState, new_target: float, n: int
) -> tuple[np.ndarray, CompensatorState]:
    """Produce n per-sample linear gains, retargeting the ramp if needed."""
    if n < 1:
        raise ObaError("bad-argument", "need at least one sample")
    current = state.current_gain
    target = state.ramp_target
    remaining = state.ramp_remaining
    if new_target != target:
        target = new_target
        remaining = max(1, state.ramp_length_default)

    trajectory_db = np.empty(n)
    if remaining == 0:
        trajectory_db[:] = current
    else:
        ramp_n = min(n, remaining)
        steps = np.arange(1, ramp_n + 1) / remaining
        trajectory_db[:ramp_n] = current + (target - current) * steps
        if ramp_n < n:
            trajectory_db[ramp_n:] = target
        remaining -= ramp_n
        current = target if remaining == 0 else float(trajectory_db[ramp_n - 1])

    new_state = CompensatorState(
        current_gain=current if remaining else target,
        ramp_remaining=remaining,
        ramp_target=target,
        ramp_length_default=state.ramp_length_default,
    )
    return 10.0 ** (trajectory_db / 20.0), new_state
