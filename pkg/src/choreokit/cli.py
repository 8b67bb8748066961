"""Command-line front door.

Every subcommand is a thin composition of library calls; anything it
prints or writes can be reproduced by the same calls in a REPL.

Exit codes: 0 ok, 2 validation failure, 3 input or parse error,
4 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .errors import ChoreoError, InputError
from .motion import load_motif, sample_motif
from .pose import FilterConfig, import_pose_video
from .robot_model import default_profile, load_profile, validate_trajectory
from .sequencer import TrajectoryStore, load_cue_sheet, validate_playlist
from .sim import demo_paths, read_force, run_performance
from .trajectory import write_csv

EX_OK = 0
EX_VALIDATION = 2
EX_INPUT = 3
EX_INTERNAL = 4

PROFILE_ENV = "CHOREO_PROFILE"
TOKEN_ENV = "CHOREO_TOKEN"
HOST_ENV = "CHOREO_HOST"
PORT_ENV = "CHOREO_PORT"
CUESHEET_ENV = "CHOREO_CUESHEET"
TRAJ_DIR_ENV = "CHOREO_TRAJECTORIES"


def _resolve_profile(args):
    """Flag beats env var beats the packaged UR5e."""
    path = args.config or os.environ.get(PROFILE_ENV)
    return load_profile(path) if path else default_profile()


def _demo_or(path_arg, key: str) -> Path:
    return Path(path_arg) if path_arg else demo_paths()[key]


def _load_show(args, profile):
    traj_dir = _demo_or(args.trajectories, "motifs")
    store = TrajectoryStore.from_dir(traj_dir, rate_hz=profile.control_rate_hz)
    sheet = load_cue_sheet(_demo_or(args.cuesheet, "cuesheet"), store=store)
    return sheet, store


def cmd_motif_render(args) -> int:
    profile = _resolve_profile(args)
    motif = load_motif(args.motif)
    if args.duration is not None:
        motif = dataclasses.replace(motif, duration_s=args.duration)
    traj = sample_motif(motif, rate=args.rate)
    report = validate_trajectory(profile, traj)
    if not report.ok:
        for line in report.lines(profile):
            print(line, file=sys.stderr)
        return EX_VALIDATION
    write_csv(traj, args.output)
    print(f"wrote {len(traj.ts)} samples at {args.rate:g} Hz to {args.output}")
    return EX_OK


def cmd_pose_import(args) -> int:
    config = FilterConfig(mode=args.mode)
    traj, meta = import_pose_video(
        args.frames_dir, side=args.side, config=config, frame_rate=args.frame_rate
    )
    out = Path(args.output)
    write_csv(traj, out)
    sidecar = out.with_suffix(".meta.json")
    sidecar.write_text(meta.to_json() + "\n", encoding="utf-8")
    print(
        f"imported {meta.frames} frames ({meta.side_selected} arm) -> "
        f"{out} + {sidecar.name}"
    )
    return EX_OK


def cmd_playlist_validate(args) -> int:
    profile = _resolve_profile(args)
    sheet, store = _load_show(args, profile)
    report = validate_playlist(sheet, profile, store)
    for line in report.lines():
        print(line)
    return EX_OK if report.ok else EX_VALIDATION


def _parse_force_scripts(pairs, seed: int):
    scripts = {}
    for pair in pairs:
        cue_str, sep, path = pair.partition("=")
        if not sep or not cue_str.isdigit():
            raise InputError(
                f"--force-script takes CUE=PATH with an integer cue, got {pair!r}"
            )
        scripts[int(cue_str)] = read_force(path, seed=seed)
    return scripts


def cmd_perform(args) -> int:
    if not args.sim:
        print("only --sim runs are supported; no robot transport is wired in", file=sys.stderr)
        return EX_INPUT
    profile = _resolve_profile(args)
    sheet, store = _load_show(args, profile)
    if args.force_script:
        scripts = _parse_force_scripts(args.force_script, seed=args.seed)
    elif args.cuesheet is None:
        # bundled demo show: hands-on push during the teach cue, one firm
        # tap to release the armed cue
        paths = demo_paths()
        scripts = {
            2: read_force(paths["teach_push"], seed=args.seed),
            4: read_force(paths["tap"], seed=args.seed),
        }
    else:
        scripts = {}
    report = run_performance(
        sheet,
        store,
        profile,
        force_scripts=scripts,
        seed=args.seed,
        max_sim_s=args.max_sim_s,
    )
    text = report.to_json()
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
        verdict = "ok" if report.ok else "FAILED"
        print(
            f"{verdict}: {report.ticks} ticks, {report.stop_count} stops, "
            f"report written to {args.report}"
        )
    else:
        print(text)
    return EX_OK if report.ok else EX_VALIDATION


def cmd_serve(args) -> int:
    import uvicorn

    from .server import Engine, create_app
    from .sim import SimSession

    profile = _resolve_profile(args)
    sheet, store = _load_show(args, profile)
    engine = Engine(SimSession(sheet, store, profile))
    app = create_app(engine, token=args.token)
    engine.run_background(realtime=True)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    finally:
        engine.shutdown()
    return EX_OK


def _add_show_source_args(sub, cuesheet_positional: bool) -> None:
    if cuesheet_positional:
        sub.add_argument(
            "cuesheet",
            nargs="?",
            default=os.environ.get(CUESHEET_ENV),
            help="cue sheet CSV (default: the bundled demo show)",
        )
    else:
        sub.add_argument(
            "--cuesheet",
            default=os.environ.get(CUESHEET_ENV),
            help="cue sheet CSV (default: the bundled demo show)",
        )
    sub.add_argument(
        "--trajectories",
        default=os.environ.get(TRAJ_DIR_ENV),
        help="directory of .motif/.csv sources (default: bundled motifs)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choreo", description="Robot choreography toolkit."
    )
    parser.add_argument(
        "--config",
        default=None,
        help=f"robot profile path (or set {PROFILE_ENV}; default: packaged UR5e)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    motif = commands.add_parser("motif", help="motif file operations")
    motif_ops = motif.add_subparsers(dest="op", required=True)
    render = motif_ops.add_parser("render", help="sample a motif to trajectory CSV")
    render.add_argument("motif", help="motif file")
    render.add_argument("--rate", type=float, required=True, help="sample rate in Hz")
    render.add_argument(
        "--duration", type=float, default=None, help="override the motif's duration_s"
    )
    render.add_argument("-o", "--output", required=True, help="output CSV path")
    render.set_defaults(func=cmd_motif_render)

    pose = commands.add_parser("pose", help="pose capture operations")
    pose_ops = pose.add_subparsers(dest="op", required=True)
    imp = pose_ops.add_parser("import", help="keypoint frame dir to trajectory CSV")
    imp.add_argument("frames_dir", help="directory of *_keypoints.json frames")
    imp.add_argument("--side", default="auto", choices=("auto", "left", "right"))
    imp.add_argument("--mode", default="magnitude", choices=("magnitude", "lowpass_bins"))
    imp.add_argument("--frame-rate", type=float, default=30.0)
    imp.add_argument("-o", "--output", required=True, help="output CSV path")
    imp.set_defaults(func=cmd_pose_import)

    playlist = commands.add_parser("playlist", help="cue sheet operations")
    playlist_ops = playlist.add_subparsers(dest="op", required=True)
    check = playlist_ops.add_parser("validate", help="dry-run every cue and seam")
    _add_show_source_args(check, cuesheet_positional=True)
    check.set_defaults(func=cmd_playlist_validate)

    perform = commands.add_parser("perform", help="run a show")
    perform.add_argument("--sim", action="store_true", help="run in the simulator")
    _add_show_source_args(perform, cuesheet_positional=True)
    perform.add_argument("--seed", type=int, default=0, help="noise seed")
    perform.add_argument(
        "--force-script",
        action="append",
        default=[],
        metavar="CUE=PATH",
        help="attach a .force script to a cue index (repeatable)",
    )
    perform.add_argument("--report", default=None, help="write the run report here")
    perform.add_argument(
        "--max-sim-s", type=float, default=300.0, help="give up after this much sim time"
    )
    perform.set_defaults(func=cmd_perform)

    serve = commands.add_parser("serve", help="run the operator service")
    _add_show_source_args(serve, cuesheet_positional=False)
    serve.add_argument("--host", default=os.environ.get(HOST_ENV, "127.0.0.1"))
    serve.add_argument(
        "--port", type=int, default=int(os.environ.get(PORT_ENV, "8765"))
    )
    serve.add_argument(
        "--token",
        default=os.environ.get(TOKEN_ENV, ""),
        help="shared operator token; empty disables the check",
    )
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_INPUT
    except ChoreoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
