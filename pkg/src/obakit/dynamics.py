"""Dynamic gain tracks, automation import, and dynamic range control.

Gain curves live in dB: interpolation between breakpoints is linear in dB,
which matches fader semantics and keeps ramps perceptually even. Ducking
automation exported from a workstation arrives as a dense curve and is
thinned to a compact breakpoint track before it is attached to a preset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ObaError


@dataclass(frozen=True)
class DynamicGainTrack:
    """Breakpoint gain curve driving level changes at playback time."""

    track_id: str
    breakpoints: tuple[tuple[float, float], ...]  # (time s, gain dB), strictly increasing times

    def __post_init__(self):
        points = tuple((float(t), float(g)) for t, g in self.breakpoints)
        if not points:
            raise ObaError("empty-track", f"gain track {self.track_id!r} has no breakpoints")
        for (t0, g0), (t1, g1) in zip(points, points[1:]):
            if t1 <= t0:
                raise ObaError(
                    "unsorted-track",
                    f"gain track {self.track_id!r} breakpoint times must strictly increase",
                )
        for t, g in points:
            if not (math.isfinite(t) and math.isfinite(g)):
                raise ObaError(
                    "unsorted-track", f"gain track {self.track_id!r} has non-finite breakpoint"
                )
        object.__setattr__(self, "breakpoints", points)

    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.breakpoints])

    def gains(self) -> np.ndarray:
        return np.array([g for _, g in self.breakpoints])


def gain_at(track: DynamicGainTrack, t) -> float | np.ndarray:
    """Gain in dB at time(s) t: linear interpolation, constant outside the ends."""
    times = track.times()
    gains = track.gains()
    result = np.interp(t, times, gains)
    return float(result) if np.isscalar(t) else result


@dataclass(frozen=True)
class AutomationCurve:
    """Dense (time s, gain dB) samples as exported by a workstation."""

    samples: tuple[tuple[float, float], ...]

    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    def gains(self) -> np.ndarray:
        return np.array([g for _, g in self.samples])


def import_automation(rows: Iterable[tuple[float, float]]) -> AutomationCurve:
    """Turn raw automation rows into a clean curve.

    Rows are sorted by time; rows sharing a timestamp collapse to the last
    occurrence. Non-finite gains and negative times are rejected with the
    offending row index.
    """
    cleaned: list[tuple[float, float, int]] = []
    for index, (t, g) in enumerate(rows):
        t = float(t)
        g = float(g)
        if not math.isfinite(t) or t < 0.0:
            raise ObaError("malformed-automation", f"row {index}: bad time {t!r}")
        if not math.isfinite(g):
            raise ObaError("malformed-automation", f"row {index}: non-finite gain")
        cleaned.append((t, g, index))
    # stable sort by time, then keep the last row for each timestamp
    cleaned.sort(key=lambda row: (row[0], row[2]))
    collapsed: list[tuple[float, float]] = []
    for t, g, _ in cleaned:
        if collapsed and collapsed[-1][0] == t:
            collapsed[-1] = (t, g)
        else:
            collapsed.append((t, g))
    return AutomationCurve(tuple(collapsed))


def _max_vertical_deviation(
    times: np.ndarray, gains: np.ndarray, first: int, last: int
) -> tuple[int, float]:
    """Index and size of the largest dB deviation from the chord first->last."""
    t0, g0 = times[first], gains[first]
    t1, g1 = times[last], gains[last]
    seg_t = times[first + 1 : last]
    chord = g0 + (g1 - g0) * (seg_t - t0) / (t1 - t0)
    deviation = np.abs(gains[first + 1 : last] - chord)
    offset = int(np.argmax(deviation))
    return first + 1 + offset, float(deviation[offset])


def simplify_automation(
    curve: AutomationCurve, epsilon: float, track_id: str = "auto"
) -> DynamicGainTrack:
    """Thin a dense automation curve to breakpoints within epsilon dB.

    Recursive max-deviation splitting over (time, dB): a segment is split at
    its worst point until reconstructing the curve by linear interpolation
    deviates at most ``epsilon`` dB at every input sample time. Deviation is
    measured vertically (in dB), which is exactly the quantity the
    reconstruction guarantee bounds. Endpoints are always preserved.
    """
    if epsilon <= 0.0:
        raise ObaError("bad-epsilon", "simplification epsilon must be positive")
    if not curve.samples:
        raise ObaError("malformed-automation", "cannot simplify an empty curve")
    if len(curve.samples) <= 2:
        return DynamicGainTrack(track_id, curve.samples)

    times = curve.times()
    gains = curve.gains()
    keep = {0, len(times) - 1}
    stack = [(0, len(times) - 1)]
    while stack:
        first, last = stack.pop()
        if last - first < 2:
            continue
        index, deviation = _max_vertical_deviation(times, gains, first, last)
        if deviation > epsilon:
            keep.add(index)
            stack.append((first, index))
            stack.append((index, last))
    kept = sorted(keep)
    return DynamicGainTrack(track_id, tuple((times[i], gains[i]) for i in kept))


@dataclass(frozen=True)
class DrcProfile:
    """Static compression curve plus envelope ballistics.

    ``static_curve`` maps input level (dBFS) to applied gain (dB) as sorted
    knee points covering [-70, 0]. Between any two knees the gain may rise
    at most 1 dB per dB of level, so the curve can only compress relative
    to its stated knees, never expand beyond them.
    """

    profile_id: str
    static_curve: tuple[tuple[float, float], ...]
    attack: float = 10.0  # ms
    release: float = 200.0  # ms

    def __post_init__(self):
        points = tuple((float(x), float(g)) for x, g in self.static_curve)
        if len(points) < 2:
            raise ObaError("invalid-drc", f"profile {self.profile_id!r} needs >= 2 knee points")
        if points[0][0] > -70.0 or points[-1][0] < 0.0:
            raise ObaError(
                "invalid-drc", f"profile {self.profile_id!r} curve must cover [-70, 0] dBFS"
            )
        for (x0, g0), (x1, g1) in zip(points, points[1:]):
            if x1 <= x0:
                raise ObaError("invalid-drc", f"profile {self.profile_id!r} knees must increase")
            if (g1 - g0) > (x1 - x0) + 1e-9:
                raise ObaError(
                    "invalid-drc",
                    f"profile {self.profile_id!r} gain rises faster than 1 dB/dB",
                )
        if self.attack <= 0.0 or self.release <= 0.0:
            raise ObaError("invalid-drc", "attack and release must be positive")
        object.__setattr__(self, "static_curve", points)

    def gain_for_level(self, level_db) -> np.ndarray:
        xs = np.array([x for x, _ in self.static_curve])
        gs = np.array([g for _, g in self.static_curve])
        return np.interp(level_db, xs, gs)

    @property
    def max_positive_gain(self) -> float:
        return max(0.0, max(g for _, g in self.static_curve))

    def is_identity(self) -> bool:
        return all(g == 0.0 for _, g in self.static_curve)


@dataclass
class EnvelopeState:
    """Envelope follower memory carried across frames."""

    envelope_db: float = -100.0


_LEVEL_FLOOR_DB = -100.0


def apply_drc(
    frame: np.ndarray,
    profile: DrcProfile,
    state: EnvelopeState,
    sample_rate: int,
) -> tuple[np.ndarray, EnvelopeState]:
    """Compress one frame; the same gain goes to all channels.

    The detector tracks the per-sample peak across channels in dB with
    one-pole attack/release smoothing; the smoothed level indexes the
    static curve. An identity curve returns the input untouched.
    """
    samples = np.asarray(frame, dtype=np.float64)
    mono_input = samples.ndim == 1
    if mono_input:
        samples = samples[:, np.newaxis]
    if profile.is_identity():
        out = frame if isinstance(frame, np.ndarray) else samples
        return out, state

    peak = np.max(np.abs(samples), axis=1)
    level_db = 20.0 * np.log10(np.maximum(peak, 10.0 ** (_LEVEL_FLOOR_DB / 20.0)))

    attack_coeff = math.exp(-1.0 / (sample_rate * profile.attack / 1000.0))
    release_coeff = math.exp(-1.0 / (sample_rate * profile.release / 1000.0))

    envelope = np.empty_like(level_db)
    env = state.envelope_db
    for i in range(level_db.shape[0]):
        level = level_db[i]
        coeff = attack_coeff if level > env else release_coeff
        env = coeff * env + (1.0 - coeff) * level
        envelope[i] = env

    gain = 10.0 ** (profile.gain_for_level(envelope) / 20.0)
    processed = samples * gain[:, np.newaxis]
    if mono_input:
        processed = processed[:, 0]
    return processed, EnvelopeState(envelope_db=float(env))


def builtin_drc_profiles() -> dict[str, DrcProfile]:
    """Shipped profiles: none, limited (light), noisy-environment (heavy)."""
    return {
        "none": DrcProfile("none", ((-70.0, 0.0), (0.0, 0.0))),
        "limited": DrcProfile(
            "limited",
            ((-70.0, 0.0), (-30.0, 0.0), (0.0, -15.0)),
            attack=10.0,
            release=200.0,
        ),
        "noisy-environment": DrcProfile(
            "noisy-environment",
            ((-70.0, 6.0), (-60.0, 6.0), (-30.0, 0.0), (0.0, -15.0)),
            attack=5.0,
            release=100.0,
        ),
    }
