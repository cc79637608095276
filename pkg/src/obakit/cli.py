"""Command-line entry point.

Subcommands wrap the library one-to-one: validate, measure,
author-dialogplus, author-ad, pack, render, monitor, serve. Exit codes:
0 success, 1 validation errors, 2 I/O or format errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import container
from .authoring import (
    BedSpec,
    VoiceSpec,
    author_ad_scene,
    author_dialog_plus_scene,
    monitor_report,
    stamp_loudness,
)
from .dynamics import import_automation
from .errors import ObaError
from .layouts import LAYOUTS, get_layout, layout_for_channel_count
from .loudness import measure_integrated
from .player import CaptureSink, ControlCommand, PlayerEngine
from .render import RenderRequest, render_offline
from .scene import (
    STANDARD_PRESET_KINDS,
    UserState,
    clamp_gain,
    select_preset,
    validate_scene,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _read_track_spec(spec: str) -> tuple[Path, list[int] | None]:
    """Parse "file.wav" or "file.wav:0,1,2" into path plus channel picks."""
    if ":" in spec:
        path_part, _, channels_part = spec.rpartition(":")
        try:
            channels = [int(c) for c in channels_part.split(",") if c != ""]
            return Path(path_part), channels
        except ValueError:
            pass  # e.g. a drive-letter-free path that just contains ':'
    return Path(spec), None


def _load_channels(spec: str) -> tuple[int, np.ndarray]:
    path, picks = _read_track_spec(spec)
    sample_rate, samples = container.read_wav(path)
    if picks is not None:
        bad = [c for c in picks if c >= samples.shape[1]]
        if bad:
            raise ObaError(
                "missing-audio", f"{path} has {samples.shape[1]} channels, asked for {bad}"
            )
        samples = samples[:, picks]
    return sample_rate, samples


def _automation_from_csv(path: Path):
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["time_s", "gain_db"]:
                raise ObaError(
                    "malformed-automation",
                    f"{path}: expected header 'time_s,gain_db', got {header}",
                )
            for row in reader:
                if not row:
                    continue
                if len(row) != 2:
                    raise ObaError(
                        "malformed-automation", f"{path}: row {len(rows)}: expected 2 columns"
                    )
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    raise ObaError(
                        "malformed-automation",
                        f"{path}: row {len(rows)}: non-numeric value",
                    ) from None
    except OSError as exc:
        raise ObaError("io-error", str(exc)) from None
    return import_automation(rows)


def _parse_gain_flags(pairs: list[str]) -> dict[str, float]:
    offsets = {}
    for pair in pairs:
        if "=" not in pair:
            raise ObaError("bad-command", f"--gain expects component=dB, got {pair!r}")
        component, _, value = pair.partition("=")
        try:
            offsets[component] = float(value)
        except ValueError:
            raise ObaError("bad-command", f"--gain {pair!r}: not a number") from None
    return offsets


def cmd_validate(args) -> int:
    try:
        scene, warnings = container.parse_scene_json(Path(args.scene).read_bytes())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    report = validate_scene(scene)
    for warning in warnings:
        print(f"warning: {warning}")
    for issue in report.issues:
        print(f"{issue.severity}: [{issue.code}] {issue.path}: {issue.message}")
    if not report.ok:
        return EXIT_VALIDATION
    print(f"scene {scene.scene_id!r}: ok ({len(report.warnings)} warnings)")
    return EXIT_OK


def cmd_measure(args) -> int:
    sample_rate, samples = container.read_wav(args.wav)
    layout = (
        get_layout(args.layout)
        if args.layout
        else layout_for_channel_count(samples.shape[1])
    )
    result = measure_integrated(samples, layout, sample_rate)
    if result.valid:
        print(f"{result.integrated:.2f} LKFS")
    else:
        print("below gate (invalid)")
    return EXIT_OK


def _write_authoring_outputs(scene, audio, args) -> int:
    stamped = stamp_loudness(scene, audio)
    report = validate_scene(stamped)
    if not report.ok:
        for issue in report.errors:
            print(f"error: [{issue.code}] {issue.path}: {issue.message}", file=sys.stderr)
        return EXIT_VALIDATION
    Path(args.output).write_bytes(container.write_scene_json(stamped))
    print(f"wrote {args.output}")
    if args.audio_out:
        container.write_wav(args.audio_out, audio, scene.sample_rate)
        print(f"wrote {args.audio_out}")
    if args.pack:
        container.pack_array(stamped, audio, args.pack)
        print(f"wrote {args.pack}")
    return EXIT_OK


def cmd_author_dialogplus(args) -> int:
    bed_rate, bed_audio = _load_channels(args.bed)
    dialog_rate, dialog_audio = _load_channels(args.dialog)
    if bed_rate != dialog_rate:
        raise ObaError(
            "sample-rate-mismatch", f"bed at {bed_rate} Hz, dialog at {dialog_rate} Hz"
        )
    if dialog_audio.shape[1] != 1:
        raise ObaError("missing-audio", "--dialog must be a single channel")
    scene, audio = author_dialog_plus_scene(
        BedSpec(bed_audio),
        VoiceSpec(dialog_audio[:, 0]),
        interactivity_db=args.range_db,
        dialogplus_offset_db=args.offset_db,
        languages=args.language,
        sample_rate=bed_rate,
    )
    return _write_authoring_outputs(scene, audio, args)


def cmd_author_ad(args) -> int:
    mix_rate, mix_audio = _load_channels(args.mix)
    ad_rate, ad_audio = _load_channels(args.ad)
    if mix_rate != ad_rate:
        raise ObaError("sample-rate-mismatch", f"mix at {mix_rate} Hz, AD at {ad_rate} Hz")
    if ad_audio.shape[1] != 1:
        raise ObaError("missing-audio", "--ad must be a single channel")
    automation = _automation_from_csv(Path(args.automation))
    scene, audio = author_ad_scene(
        BedSpec(mix_audio, label="Film mix"),
        VoiceSpec(ad_audio[:, 0], label="Audio description", content_kind="audio_description"),
        automation,
        ad_gain_db=args.ad_gain_db,
        epsilon_db=args.epsilon_db,
        languages=args.language,
        sample_rate=mix_rate,
    )
    return _write_authoring_outputs(scene, audio, args)


def cmd_pack(args) -> int:
    scene, warnings = container.parse_scene_json(Path(args.scene).read_bytes())
    for warning in warnings:
        print(f"warning: {warning}")
    report = validate_scene(scene)
    if not report.ok:
        for issue in report.errors:
            print(f"error: [{issue.code}] {issue.path}: {issue.message}", file=sys.stderr)
        return EXIT_VALIDATION
    container.pack(scene, args.wav, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_render(args) -> int:
    scene, reader = container.unpack(args.container)
    offsets = _parse_gain_flags(args.gain or [])
    layout = get_layout(args.layout)

    preset_id = None
    user = UserState(target_layout=layout, target_loudness=args.target_lkfs)
    if args.preset:
        if scene.has_preset(args.preset):
            preset_id = args.preset
        elif args.preset in STANDARD_PRESET_KINDS:
            user = UserState(
                kind_preferences=(args.preset,),
                target_layout=layout,
                target_loudness=args.target_lkfs,
            )
            preset_id = select_preset(scene, user)
        else:
            raise ObaError("preset-not-found", f"no preset or kind {args.preset!r}")
    else:
        preset_id = select_preset(scene, user)

    preset = scene.preset(preset_id)
    clamped = {}
    for component_id, requested in offsets.items():
        limits = scene.effective_limits(preset, component_id)
        applied = clamp_gain(limits, requested)
        if applied != requested:
            print(
                f"warning: gain for {component_id!r} clamped from "
                f"{requested:+.2f} to {applied:+.2f} dB",
                file=sys.stderr,
            )
        clamped[component_id] = applied
    user = UserState(
        kind_preferences=user.kind_preferences,
        gain_offsets=clamped,
        target_layout=layout,
        target_loudness=args.target_lkfs,
        drc_profile=args.drc,
    )

    signal, stats = render_offline(
        RenderRequest(scene, reader, user, preset_id=preset_id)
    )
    container.write_wav(args.output, signal, scene.sample_rate)
    print(json.dumps({"preset_id": preset_id, **stats.to_json_dict()}))
    return EXIT_OK


def cmd_monitor(args) -> int:
    scene, reader = container.unpack(args.container)
    report = monitor_report(scene, reader.read_all(), target_loudness=args.target_lkfs)
    if args.json:
        print(json.dumps(report.to_json_dict(), indent=2))
    else:
        for row in report.rows:
            if row.note:
                print(
                    f"{row.preset_id:24} {row.layout_id:14} {row.user_case:8} {row.note}"
                )
            else:
                print(
                    f"{row.preset_id:24} {row.layout_id:14} {row.user_case:8} "
                    f"{row.loudness:8.2f} LKFS  dev {row.loudness_deviation:+5.2f} LU  "
                    f"clipped {row.clipped_samples}"
                )
    print(f"total clipped samples: {report.total_clipped}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve as run_service

    engine = PlayerEngine(
        sink=CaptureSink(args.capture) if args.capture else None,
        realtime=not args.no_realtime,
        settings_path=args.settings,
    )
    engine.start()
    events = engine.submit(ControlCommand("load", path=args.container))
    errors = [e for e in events if e.type == "error"]
    if errors:
        print(f"error: {errors[0].code}: {errors[0].message}", file=sys.stderr)
        engine.stop()
        return EXIT_IO
    ui_dir = args.ui_dir if args.ui_dir else _default_ui_dir()
    try:
        run_service(engine, port=args.port, host=args.host, ui_dir=ui_dir)
    finally:
        engine.stop()
    return EXIT_OK


def _default_ui_dir():
    bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
    return bundled if bundled.is_dir() else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obakit", description="object-based audio toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scene JSON file")
    p.add_argument("scene")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("measure", help="integrated loudness of a WAV file")
    p.add_argument("wav")
    p.add_argument("--layout", choices=sorted(LAYOUTS), default=None)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("author-dialogplus", help="author a Dialog+ scene")
    p.add_argument("--bed", required=True, help="wav[:channels] background bed")
    p.add_argument("--dialog", required=True, help="wav[:channel] voice-over")
    p.add_argument("--offset-db", type=float, default=6.0, dest="offset_db")
    p.add_argument("--range-db", type=float, default=9.0, dest="range_db")
    p.add_argument("--language", action="append", default=None)
    p.add_argument("-o", "--output", required=True, help="scene JSON output")
    p.add_argument("--audio-out", default=None, help="write assembled multitrack WAV")
    p.add_argument("--pack", default=None, help="also pack scene+audio to .obas")
    p.set_defaults(func=cmd_author_dialogplus)

    p = sub.add_parser("author-ad", help="author an audio-description scene")
    p.add_argument("--mix", required=True, help="wav[:channels] film mix")
    p.add_argument("--ad", required=True, help="wav[:channel] AD voice")
    p.add_argument("--automation", required=True, help="ducking CSV (time_s,gain_db)")
    p.add_argument("--ad-gain-db", type=float, default=6.0, dest="ad_gain_db")
    p.add_argument("--epsilon-db", type=float, default=0.1, dest="epsilon_db")
    p.add_argument("--language", action="append", default=None)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--audio-out", default=None)
    p.add_argument("--pack", default=None)
    p.set_defaults(func=cmd_author_ad)

    p = sub.add_parser("pack", help="pack scene JSON + WAV into a container")
    p.add_argument("scene")
    p.add_argument("wav")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("render", help="render a container offline to WAV")
    p.add_argument("container")
    p.add_argument("--preset", default=None, help="preset id or preset kind")
    p.add_argument("--layout", choices=sorted(LAYOUTS), default="stereo_2_0")
    p.add_argument("--target-lkfs", type=float, default=-24.0, dest="target_lkfs")
    p.add_argument("--gain", action="append", default=None, metavar="COMP=DB")
    p.add_argument("--drc", default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("monitor", help="render every preset/layout/extreme and report")
    p.add_argument("container")
    p.add_argument("--target-lkfs", type=float, default=-24.0, dest="target_lkfs")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("serve", help="run the interactive player service")
    p.add_argument("container")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", default=None)
    p.add_argument("--capture", default=None, help="capture rendered audio to WAV")
    p.add_argument("--settings", default=None, help="persist user preferences here")
    p.add_argument("--no-realtime", action="store_true", help="render as fast as possible")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    languages = getattr(args, "language", None)
    if hasattr(args, "language"):
        args.language = tuple(languages) if languages else ("en",)
    try:
        return args.func(args)
    except ObaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
