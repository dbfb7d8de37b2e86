"""Task packs and the benchmark runner.

A task pack (UTF-8 JSON, ``task_pack_version: 1``) lists tasks with their
category, level, apps, instruction, golden step count and optional golden
trajectory. Single-app tasks start from the app's home screen, cross-app
tasks from the phone's home screen.
"""

from __future__ import annotations

import json
import logging
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from armphone.actions import ExecutionContext, execute
from armphone.actionspace import ActionSpec
from armphone.agent import default_budget, run_episode
from armphone.arm import DeviceProfile, SimArm
from armphone.blobs import BlobStore
from armphone.dataset import episode_document, write_episode
from armphone.device import load_screen_pack
from armphone.errors import ArmPhoneError, PackError
from armphone.keyboard import LayoutCache
from armphone.metrics import MetricsReport, TaskOutcome, aggregate
from armphone.perception import MockGrounder
from armphone.policies import RandomPolicy, RemotePolicy, ScriptedPolicy

logger = logging.getLogger(__name__)

TASK_PACK_VERSION = 1
SINGLE_APP_CATEGORIES = (
    "Comm&Social",
    "Lifestyle",
    "News&Reading",
    "Prod&Tools",
    "SystemApps",
    "Travel&Nav",
    "Media&Entmt",
    "Shop&Fin",
)
CROSS_APP_CATEGORIES = (
    "General Tool",
    "Information Management",
    "Media Entertainment",
    "Multi-Apps",
    "Social Sharing",
    "Web Shopping",
)
LEVELS = ("simple", "medium", "hard")
SETS = ("standard", "challenging", "cross_app")
AGENTS = ("policy_service", "scripted", "random")


def bundled(name: str) -> Path:
    """Path of a file shipped in ``armphone/data``."""
    return Path(str(resources.files("armphone") / "data" / name))


@dataclass(frozen=True)
class GoldenStep:
    action: ActionSpec
    description: Optional[str] = None


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    category: str
    level: Optional[str]
    apps: tuple[str, ...]
    set: str
    instruction: str
    golden_steps: int
    origin: str
    golden_trajectory: Optional[tuple[GoldenStep, ...]] = None
    success: Optional[dict] = None  # {"screen": id, "variables": {...}}

    def __post_init__(self):
        def bad(msg):
            raise PackError(f"task {self.task_id!r}: {msg}")

        if self.set not in SETS:
            bad(f"unknown set {self.set!r}")
        if self.golden_steps < 1:
            bad("golden_steps must be >= 1")
        if not self.instruction:
            bad("empty instruction")
        if self.set == "cross_app":
            if self.origin != "phone_home":
                bad("cross-app tasks start from the phone home screen")
            if len(self.apps) < 2:
                bad("cross-app tasks involve at least two apps")
            if self.category not in CROSS_APP_CATEGORIES:
                bad(f"unknown cross-app category {self.category!r}")
            if self.level is not None:
                bad("cross-app tasks carry no level")
        else:
            if self.origin != "app_home":
                bad("single-app tasks start from the app home screen")
            if len(self.apps) != 1:
                bad("single-app tasks involve exactly one app")
            if self.category not in SINGLE_APP_CATEGORIES:
                bad(f"unknown category {self.category!r}")
            if self.level not in LEVELS:
                bad(f"level must be one of {LEVELS}")
        if self.golden_trajectory is not None and len(self.golden_trajectory) != self.golden_steps:
            bad(f"golden_trajectory has {len(self.golden_trajectory)} actions, "
                f"golden_steps is {self.golden_steps}")


@dataclass
class TaskPack:
    tasks: list
    screen_pack: Optional[Path] = None
    device_profile: Optional[Path] = None
    source: Optional[Path] = None

    def get(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise KeyError(task_id)

    def counts(self) -> dict:
        return task_counts(self.tasks)


def task_counts(tasks) -> dict:
    out: dict = {"total": len(tasks), "set": {}, "category": {}, "level": {}}
    for t in tasks:
        out["set"][t.set] = out["set"].get(t.set, 0) + 1
        out["category"][t.category] = out["category"].get(t.category, 0) + 1
        if t.level:
            out["level"][t.level] = out["level"].get(t.level, 0) + 1
    return out


def _task(doc: dict) -> TaskSpec:
    tid = doc.get("task_id", "?")
    try:
        golden = doc.get("golden_trajectory")
        if golden is not None:
            golden = tuple(GoldenStep(ActionSpec.from_json(g), g.get("description")) for g in golden)
        return TaskSpec(
            task_id=doc["task_id"],
            category=doc["category"],
            level=doc.get("level"),
            apps=tuple(doc["apps"]),
            set=doc["set"],
            instruction=doc["instruction"],
            golden_steps=int(doc["golden_steps"]),
            origin=doc["origin"],
            golden_trajectory=golden,
            success=doc.get("success"),
        )
    except KeyError as exc:
        raise PackError(f"task {tid!r}: missing field {exc.args[0]!r}") from None
    except ArmPhoneError as exc:
        if isinstance(exc, PackError):
            raise
        raise PackError(f"task {tid!r}: {exc}") from None


def read_task_pack(path) -> TaskPack:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PackError(f"cannot read task pack: {exc}", str(path)) from None
    if doc.get("task_pack_version") != TASK_PACK_VERSION:
        raise PackError(f"unsupported task_pack_version {doc.get('task_pack_version')!r}",
                        "$.task_pack_version")
    tasks = [_task(t) for t in doc.get("tasks", [])]
    if not tasks:
        raise PackError("task pack contains no tasks", "$.tasks")
    ids = [t.task_id for t in tasks]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise PackError(f"duplicate task ids {dup}", "$.tasks")

    def rel(key):
        return (path.parent / doc[key]).resolve() if doc.get(key) else None

    return TaskPack(tasks, rel("screen_pack"), rel("device_profile"), path)


def load_task_pack(path) -> list[TaskSpec]:
    pack = read_task_pack(path)
    logger.info("loaded %s: %s", path, pack.counts())
    return pack.tasks


class GoldenJudge:
    """Sim ground truth: per-step progress along the golden trajectory, final success.

    A step is correct when it moves the phone into a golden-path state beyond
    the furthest one reached so far.
    """

    def __init__(self, task: TaskSpec, golden_states: list, success_state):
        self.task = task
        self.golden_states = golden_states  # state after golden step k, k = 1..H
        self.success_state = success_state
        self.progress = 0

    @classmethod
    def build(cls, task: TaskSpec, screen_pack: Path, cmap) -> "GoldenJudge":
        states = []
        if task.golden_trajectory:
            env = load_screen_pack(screen_pack)
            _reset(env, task)
            ctx = ExecutionContext(env, SimArm(cmap, env), MockGrounder(), LayoutCache())
            for step in task.golden_trajectory:
                execute(step.action, ctx)
                states.append(env.state_key())
        success = task.success
        if success is None:
            if not states:
                raise PackError(f"task {task.task_id!r} needs a success predicate or golden trajectory")
            success = states[-1]
        return cls(task, states, success)

    def start(self, env) -> None:
        self.progress = 0

    def step(self, env) -> bool:
        state = env.state_key()
        for k in range(len(self.golden_states), self.progress, -1):
            if self.golden_states[k - 1] == state:
                self.progress = k
                return True
        return False

    def success(self, env) -> bool:
        if isinstance(self.success_state, dict):
            want = self.success_state
            if "screen" in want and env.screen_id != want["screen"]:
                return False
            return all(env.variables.get(k) == v for k, v in want.get("variables", {}).items())
        return env.state_key() == self.success_state


def _reset(env, task: TaskSpec):
    if task.origin == "phone_home":
        env.reset("phone_home")
    else:
        env.reset("app_home", task.apps[0])


@dataclass
class RunConfig:
    agent: str = "scripted"
    env: str = "sim"
    screen_pack: Optional[Path] = None
    profile: Optional[Path] = None
    seed: int = 0
    budget: Optional[int] = None
    out: Path = Path("out")
    jobs: int = 1

    def check(self, tasks) -> None:
        if self.agent not in AGENTS:
            raise PackError(f"unknown agent {self.agent!r}; choose from {AGENTS}")
        if self.env == "live":
            raise PackError("live environment requires a configured arm executor")
        if self.env != "sim":
            raise PackError(f"unknown env {self.env!r}")
        if self.screen_pack is None:
            raise PackError("sim environment needs a screen pack")
        if self.budget is not None and self.budget < 1:
            raise PackError(f"step budget must be >= 1, got {self.budget}")
        if self.jobs < 1:
            raise PackError("--jobs must be >= 1")
        if self.agent == "scripted":
            missing = [t.task_id for t in tasks if not t.golden_trajectory]
            if missing:
                raise PackError(f"scripted agent needs golden trajectories; missing for {missing}")


def make_policy(config: RunConfig, task: TaskSpec, blob_store=None):
    if config.agent == "scripted":
        return ScriptedPolicy(task.golden_trajectory)
    if config.agent == "random":
        return RandomPolicy(config.seed, salt=task.task_id)
    return RemotePolicy.from_env(blob_store=blob_store)


@dataclass
class TaskRun:
    outcome: TaskOutcome
    episode_path: Optional[Path] = None
    terminal_status: Optional[str] = None


def run_task(task: TaskSpec, config: RunConfig, profile: DeviceProfile) -> TaskRun:
    """Run one task in a fresh simulated phone and persist its episode file."""
    out = Path(config.out)
    blobs = BlobStore(out / "blobs")
    cmap = profile.calibration()
    env = load_screen_pack(config.screen_pack, blob_store=blobs)
    if env.dims != profile.screen:
        raise PackError(f"profile screen {profile.screen} != pack screen {env.dims}")
    judge = GoldenJudge.build(task, config.screen_pack, cmap)
    budget = config.budget or default_budget(task.golden_steps)
    episode = run_episode(
        task, env, SimArm(cmap, env), MockGrounder(), make_policy(config, task, blobs), budget,
        layouts=LayoutCache(out / "layouts"), device_id=profile.device_id, judge=judge,
    )
    meta = {
        "agent": config.agent,
        "seed": config.seed,
        "budget": budget,
        "device_profile": {"device_id": profile.device_id,
                           "path": str(profile.source) if profile.source else None},
        "screen_pack": str(Path(config.screen_pack).resolve()),
        "reset_origin": {"origin": task.origin,
                         "app_id": task.apps[0] if task.origin == "app_home" else None},
        "instruction": task.instruction,
        "error": episode.error,
    }
    path = write_episode(out / "episodes" / f"{task.task_id}.json", episode_document(episode, meta))
    outcome = TaskOutcome(
        task.task_id,
        bool(episode.success),
        episode.agent_steps_successful,
        episode.agent_steps_total,
        episode.error or "",
    )
    return TaskRun(outcome, path, episode.terminal_status)


def run_benchmark(tasks, config: RunConfig) -> tuple[MetricsReport, list[TaskOutcome]]:
    """Run every task (crashes become failed outcomes) and write the report files."""
    config.check(tasks)
    profile = DeviceProfile.load(config.profile)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    def one(task):
        try:
            return run_task(task, config, profile)
        except Exception as exc:  # a crashing task must not abort the run
            logger.exception("task %s crashed", task.task_id)
            diag = "".join(traceback.format_exception_only(type(exc), exc)).strip()
            return TaskRun(TaskOutcome(task.task_id, False, 0, 0, diag))

    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            runs = list(pool.map(one, tasks))
    else:
        runs = [one(t) for t in tasks]

    outcomes = [r.outcome for r in runs]
    report = aggregate(outcomes, tasks)
    _write_json(out / "report.json", report.to_json())
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    _write_json(out / "outcomes.json", {"outcomes": [o.to_json() for o in outcomes]})
    _write_json(out / "manifest.json", {
        "dataset_version": 1,
        "episodes": [str(r.episode_path.relative_to(out)) for r in runs if r.episode_path],
    })
    return report, outcomes


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
