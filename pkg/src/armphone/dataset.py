"""Operation-episode records: the ten per-step attributes, validation, replay.

Dataset directory layout::

    <root>/manifest.json
    <root>/episodes/<task_id>.json
    <root>/blobs/sha256/<first2>/<hex>
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from armphone.actions import ExecutionReport, parse_hardware_line
from armphone.arm import CalibrationMap, SimArm, plan_swipe, plan_tap
from armphone.blobs import BlobStore
from armphone.device import ScreenObservation
from armphone.errors import ArmPhoneError
from armphone.geometry import BBox

EPISODE_VERSION = 1
STEP_ATTRIBUTES = (
    "screenshot",
    "instruction",
    "observation",
    "thought",
    "action",
    "action_hardware",
    "gui_bboxes",
    "bbox_type",
    "is_step_correct",
    "is_final_success",
)
METADATA_KEYS = ("task_id", "device_profile", "seed", "timestamps_normalized", "terminal_status")
NO_HARDWARE = "none"


class DatasetError(ArmPhoneError):
    pass


@dataclass
class StepContext:
    instruction: str
    observation: ScreenObservation


@dataclass
class EpisodeStep:
    screenshot: str
    instruction: str
    observation: str
    thought: str
    action: str
    action_hardware: str
    gui_bboxes: list = field(default_factory=list)  # [{"index", "bbox", "label"}]
    bbox_type: list = field(default_factory=list)  # "icon" | "text" per box
    is_step_correct: Optional[bool] = None
    is_final_success: Optional[bool] = None

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in STEP_ATTRIBUTES}


def describe_action(action, detections) -> str:
    """Abstract description such as ``tap text (Settings)`` for the Action attribute."""
    if action is None:
        return "done"
    if action.type == "tap":
        hits = [d for d in detections if d.bbox.contains((action.x, action.y))]
        if hits:
            d = min(hits, key=lambda d: d.bbox.width * d.bbox.height)
            return f"tap {d.kind} ({d.label})" if d.label else f"tap {d.kind} [{d.index}]"
        return str(action)
    if action.type == "swipe":
        return f"swipe {action.direction} ({action.distance})"
    if action.type == "text":
        return f"type ({action.text})"
    return action.type


def record_step(ctx: StepContext, decision, report: Optional[ExecutionReport],
                detections: Sequence, is_step_correct: Optional[bool] = None) -> EpisodeStep:
    """Build the dataset record for one executed agent step."""
    if ctx.instruction is None or decision.thought is None or decision.observation_summary is None:
        raise DatasetError("instruction, observation and thought are required")
    if not ctx.observation.raster_ref:
        raise DatasetError("screenshot reference is required")
    lines = report.hardware_lines() if report is not None else []
    return EpisodeStep(
        screenshot=ctx.observation.raster_ref,
        instruction=ctx.instruction,
        observation=decision.observation_summary,
        thought=decision.thought,
        action=decision.description or describe_action(decision.env_action, detections),
        action_hardware="\n".join(lines) if lines else NO_HARDWARE,
        gui_bboxes=[{"index": d.index, "bbox": d.bbox.as_list(), "label": d.label}
                    for d in detections],
        bbox_type=[d.kind for d in detections],
        is_step_correct=is_step_correct,
    )


def episode_document(episode, metadata: dict) -> dict:
    meta = {
        "task_id": episode.task_id,
        "terminal_status": episode.terminal_status,
        "timestamps_normalized": False,
        "step_times_ms": list(episode.step_times_ms),
        "final_screenshot": episode.final_screenshot,
        "label_audit": [],
    }
    meta.update(metadata)
    return {
        "episode_version": EPISODE_VERSION,
        "metadata": dict(sorted(meta.items())),
        "steps": [s.to_json() for s in episode.steps],
    }


def normalize_timestamps(doc: dict) -> dict:
    out = copy.deepcopy(doc)
    meta = out["metadata"]
    meta["step_times_ms"] = [0] * len(meta.get("step_times_ms", []))
    meta["timestamps_normalized"] = True
    return out


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def write_episode(path, doc: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc), encoding="utf-8")
    return path


def read_episode(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetError(f"unreadable episode file {path}: {exc}") from None


def annotate_correctness(doc: dict, step_labels: Sequence[bool], final_label: bool) -> dict:
    """Apply human labels; previous non-null labels go to ``metadata.label_audit``."""
    steps = doc["steps"]
    if len(step_labels) != len(steps):
        raise ValueError(f"label count mismatch: expected {len(steps)} step labels, got {len(step_labels)}")
    out = copy.deepcopy(doc)
    audit = out["metadata"].setdefault("label_audit", [])
    updates = [(i, "is_step_correct", bool(v)) for i, v in enumerate(step_labels)]
    updates.append((len(steps) - 1, "is_final_success", bool(final_label)))
    for i, attr, value in updates:
        previous = out["steps"][i].get(attr)
        if previous is not None:
            audit.append({"step": i, "attribute": attr, "previous": previous, "new": value})
        out["steps"][i][attr] = value
    return out


def _check_step(i: int, step, terminal: bool, blobs: Optional[BlobStore]) -> list[str]:
    where = f"step {i}"
    if not isinstance(step, dict):
        return [f"{where}: not an object"]
    out = [f"{where}: missing attribute {a!r}" for a in STEP_ATTRIBUTES if a not in step]
    out += [f"{where}: unexpected attribute {a!r}" for a in step if a not in STEP_ATTRIBUTES]

    if "screenshot" in step:
        ref = step["screenshot"]
        if not isinstance(ref, str) or not ref.startswith("sha256:"):
            out.append(f"{where}: 'screenshot' is not a sha256 reference")
        elif blobs is not None and not blobs.has(ref):
            out.append(f"{where}: 'screenshot' blob {ref} does not resolve")
    for a in ("instruction", "observation", "thought", "action", "action_hardware"):
        if a in step and not isinstance(step[a], str):
            out.append(f"{where}: {a!r} must be a string")
    if isinstance(step.get("action_hardware"), str) and step["action_hardware"] != NO_HARDWARE:
        for line in step["action_hardware"].splitlines():
            try:
                parse_hardware_line(line)
            except ValueError:
                out.append(f"{where}: 'action_hardware' line {line!r} does not parse")

    boxes = step.get("gui_bboxes")
    if "gui_bboxes" in step:
        if not isinstance(boxes, list):
            out.append(f"{where}: 'gui_bboxes' must be a list")
            boxes = None
        else:
            idx = [b.get("index") if isinstance(b, dict) else None for b in boxes]
            if idx != list(range(1, len(boxes) + 1)):
                out.append(f"{where}: 'gui_bboxes' indices are not contiguous from 1")
            for b in boxes:
                try:
                    BBox.from_seq(b["bbox"])
                except (KeyError, TypeError, ValueError):
                    out.append(f"{where}: 'gui_bboxes' entry {b!r} has an invalid bbox")
                    break
    types = step.get("bbox_type")
    if "bbox_type" in step:
        if not isinstance(types, list) or any(t not in ("icon", "text") for t in types):
            out.append(f"{where}: 'bbox_type' must list 'icon'/'text' labels")
        elif isinstance(boxes, list) and len(types) != len(boxes):
            out.append(f"{where}: 'bbox_type' has {len(types)} labels for {len(boxes)} boxes")

    if "is_step_correct" in step and step["is_step_correct"] not in (None, True, False):
        out.append(f"{where}: 'is_step_correct' must be boolean or null")
    if "is_final_success" in step:
        v = step["is_final_success"]
        if v not in (None, True, False):
            out.append(f"{where}: 'is_final_success' must be boolean or null")
        elif v is not None and not terminal:
            out.append(f"{where}: 'is_final_success' set on a non-terminal step")
    return out


def validate(source, blob_root=None) -> list[str]:
    """List of violations for an episode file or document; empty means valid.

    Blobs resolve under ``blob_root`` or, for files, ``<episode dir>/../blobs``.
    """
    if isinstance(source, dict):
        doc = source
    else:
        doc = read_episode(source)
        if blob_root is None:
            candidate = Path(source).resolve().parent.parent / "blobs"
            blob_root = candidate if candidate.is_dir() else None
    blobs = BlobStore(blob_root) if blob_root is not None else None

    out = []
    if doc.get("episode_version") != EPISODE_VERSION:
        out.append(f"episode_version must be {EPISODE_VERSION}")
    meta = doc.get("metadata")
    if not isinstance(meta, dict):
        out.append("metadata missing")
    else:
        out += [f"metadata: missing {k!r}" for k in METADATA_KEYS if k not in meta]
    steps = doc.get("steps")
    if not isinstance(steps, list) or not steps:
        out.append("steps must be a non-empty list")
        return out
    for i, step in enumerate(steps):
        out += _check_step(i, step, i == len(steps) - 1, blobs)
    return out


def validate_dataset(root) -> dict[str, list[str]]:
    root = Path(root)
    episodes = sorted((root / "episodes").glob("*.json"))
    if not episodes:
        raise DatasetError(f"no episodes under {root / 'episodes'}")
    return {str(p.relative_to(root)): validate(p, root / "blobs") for p in episodes}


@dataclass
class ReplayResult:
    screens: list
    divergences: list

    @property
    def ok(self) -> bool:
        return not self.divergences


def replay_episode(doc: dict, env, cmap: CalibrationMap) -> ReplayResult:
    """Re-execute the hardware strings from the episode's reset origin and compare screens."""
    meta = doc["metadata"]
    origin = meta.get("reset_origin", {"origin": "phone_home"})
    env.reset(origin["origin"], origin.get("app_id"))
    arm = SimArm(cmap, env)
    screens, divergences = [], []
    for i, step in enumerate(doc["steps"]):
        ref = env.observe().raster_ref
        screens.append(ref)
        if ref != step["screenshot"]:
            divergences.append(f"step {i}: screen {ref} != recorded {step['screenshot']}")
        if step["action_hardware"] == NO_HARDWARE:
            continue
        for line in step["action_hardware"].splitlines():
            parsed = parse_hardware_line(line)
            if parsed[0] == "tap":
                traj = plan_tap(cmap, parsed[1])
            else:
                traj = plan_swipe(cmap, parsed[1], parsed[2])
            arm.execute(traj)
    final = env.observe().raster_ref
    screens.append(final)
    if "final_screenshot" in meta and final != meta["final_screenshot"]:
        divergences.append(f"final: screen {final} != recorded {meta['final_screenshot']}")
    return ReplayResult(screens, divergences)
