"""Command line entry points.

Exit codes: 0 success, 1 semantic failure (task, replay or validation
failed), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from armphone.arm import DeviceProfile, calibrate_profile
from armphone.bench import (
    AGENTS,
    RunConfig,
    bundled,
    read_task_pack,
    run_benchmark,
    run_task,
)
from armphone.dataset import DatasetError, read_episode, replay_episode, validate, validate_dataset
from armphone.device import load_screen_pack
from armphone.errors import ArmPhoneError, CalibrationError, PackError

logger = logging.getLogger("armphone")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pack", type=Path, help="task pack (default: bundled synthetic pack)")
    p.add_argument("--agent", choices=AGENTS, default="scripted")
    p.add_argument("--env", default="sim",
                   help="'sim' (pack's screens), 'sim:<screens.json>' or 'live'")
    p.add_argument("--profile", type=Path, help="device profile JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, help="step budget (default max(10, 3 x golden steps))")
    p.add_argument("--out", type=Path, default=Path("out"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="armphone", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single task")
    p.add_argument("--task", required=True)
    _add_run_flags(p)

    p = sub.add_parser("bench", help="run every task of a pack and write a report")
    _add_run_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel simulated phones")

    p = sub.add_parser("calibrate", help="fit a device profile from correspondence points")
    p.add_argument("points", type=Path)
    p.add_argument("--out", type=Path, required=True, help="device profile to write")

    p = sub.add_parser("validate", help="validate a dataset directory or episode file")
    p.add_argument("path", type=Path)

    p = sub.add_parser("replay", help="replay an episode's hardware actions in the simulator")
    p.add_argument("episode", type=Path)
    p.add_argument("--profile", type=Path, help="override the recorded device profile")
    p.add_argument("--screens", type=Path, help="override the recorded screen pack")
    return parser


def _config(args, pack) -> RunConfig:
    screens = pack.screen_pack
    env = args.env
    if env.startswith("sim:"):
        screens, env = Path(env[4:]), "sim"
    profile = args.profile or pack.device_profile or bundled("device_profile.json")
    if not Path(profile).is_file():
        raise UsageError(f"device profile not found: {profile}")
    if screens is not None and not Path(screens).is_file():
        raise UsageError(f"screen pack not found: {screens}")
    return RunConfig(
        agent=args.agent, env=env, screen_pack=screens, profile=Path(profile), seed=args.seed,
        budget=args.budget, out=args.out, jobs=getattr(args, "jobs", 1),
    )


def _load_pack(args):
    path = args.pack or bundled("tasks.json")
    if not Path(path).is_file():
        raise UsageError(f"task pack not found: {path}")
    return read_task_pack(path)


def cmd_run(args) -> int:
    pack = _load_pack(args)
    try:
        task = pack.get(args.task)
    except KeyError:
        raise UsageError(f"unknown task id {args.task!r}") from None
    config = _config(args, pack)
    config.check([task])
    result = run_task(task, config, DeviceProfile.load(config.profile))
    print(result.episode_path)
    o = result.outcome
    logger.info("%s: %s, success=%s, steps %d/%d", task.task_id, result.terminal_status,
                o.success, o.agent_steps_successful, o.agent_steps_total)
    ok = result.terminal_status == "agent_done" and o.success is not False
    return EXIT_OK if ok else EXIT_FAIL


def cmd_bench(args) -> int:
    pack = _load_pack(args)
    config = _config(args, pack)
    report, _ = run_benchmark(pack.tasks, config)
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_calibrate(args) -> int:
    try:
        doc = json.loads(args.points.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read points file: {exc}") from None
    try:
        profile = calibrate_profile(doc)
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    profile.save(args.out)
    print(f"{args.out}: residual {profile.residual:.3g} mm")
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.path.is_dir():
        results = validate_dataset(args.path)
    elif args.path.is_file():
        results = {str(args.path): validate(args.path)}
    else:
        raise UsageError(f"no such dataset or episode: {args.path}")
    bad = 0
    for name, violations in results.items():
        for v in violations:
            print(f"{name}: {v}")
        bad += bool(violations)
    print(f"{len(results) - bad}/{len(results)} episodes valid")
    return EXIT_FAIL if bad else EXIT_OK


def cmd_replay(args) -> int:
    doc = read_episode(args.episode)
    meta = doc.get("metadata", {})
    screens = args.screens or meta.get("screen_pack")
    profile = args.profile or (meta.get("device_profile") or {}).get("path")
    if not screens or not Path(screens).is_file():
        raise UsageError(f"screen pack not found: {screens}")
    if not profile or not Path(profile).is_file():
        raise UsageError(f"device profile not found: {profile}")
    env = load_screen_pack(screens)
    result = replay_episode(doc, env, DeviceProfile.load(profile).calibration())
    for d in result.divergences:
        print(d)
    print(f"replayed {len(doc['steps'])} steps: {'identical' if result.ok else 'DIVERGED'}")
    return EXIT_OK if result.ok else EXIT_FAIL


COMMANDS = {
    "run": cmd_run,
    "bench": cmd_bench,
    "calibrate": cmd_calibrate,
    "validate": cmd_validate,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PackError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ArmPhoneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
