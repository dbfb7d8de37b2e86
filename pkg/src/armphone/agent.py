"""Agent loop: history, prompt assembly, decision parsing, reflection.

Each step the policy produces a thought and then an environment action; the
step's log-likelihood is the sum of the two components' log-probabilities
(:func:`joint_logprob`).
"""

from __future__ import annotations

import json
import logging
import math
import re
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from armphone.actions import ExecutionContext, ExecutionReport, execute
from armphone.actionspace import ACTION_TYPES, DIRECTIONS, DISTANCES, ActionSpec
from armphone.device import ScreenDelta, ScreenObservation, screen_delta
from armphone.errors import (
    ActionError,
    ArmPhoneError,
    DecisionError,
    PolicyServiceError,
)
from armphone.geometry import center_of
from armphone.keyboard import LayoutCache
from armphone.perception import IndexedBBox, MarkedImage, annotate_marks, perceive

logger = logging.getLogger(__name__)

MAX_REPAIRS = 2
NO_CHANGE_EXPECTATIONS = {"", "none", "no_change", "no change", "unchanged"}
TERMINAL_STATUSES = ("agent_done", "step_budget_exhausted", "unrecoverable_error")

ACTION_SPACE_TEXT = (
    "tap(x, y) | tap(mark) - tap a pixel or the center of a marked element\n"
    f"swipe(x, y, direction in {list(DIRECTIONS)}, distance in {list(DISTANCES)}) - "
    "short/medium/long = 1/4, 1/3, 1/2 of the screen\n"
    "text(text) - type into the focused field using the on-screen keyboard\n"
    "back - navigate to the previous screen\n"
    "exit - close the app and return to the home screen"
)

RESPONSE_FORMAT_TEXT = (
    'Reply with one JSON object: {"observation": str, "thought": str, '
    '"action": {"type": one of ' + json.dumps(list(ACTION_TYPES)) + ', "params": {...}}, '
    '"expected_outcome": str, "status": "continue" | "done"}. '
    'Params: tap {"x", "y"} or {"mark"}; swipe {"x", "y", "direction", "distance"} '
    '(or "mark" instead of x/y); text {"text"}. Omit "action" only when status is "done".'
)


@dataclass
class StepRecord:
    observation_summary: str
    thought: str
    env_action: Optional[ActionSpec]
    status: str = "continue"
    expected_outcome: str = ""
    component_logprobs: Optional[tuple[float, float]] = None  # (thought, env action)
    description: Optional[str] = None
    suspected_wrong: bool = False
    corrective: bool = False
    execution_error: Optional[str] = None

    def __post_init__(self):
        if self.status not in ("continue", "done"):
            raise DecisionError(f"status must be 'continue' or 'done', got {self.status!r}")
        if self.env_action is None and self.status != "done":
            raise DecisionError("an action is required unless status is 'done'")
        if self.component_logprobs is not None:
            lps = tuple(float(v) for v in self.component_logprobs)
            if len(lps) != 2 or not all(math.isfinite(v) and v <= 0 for v in lps):
                raise DecisionError(f"log-probabilities must be two finite values <= 0: {lps}")
            self.component_logprobs = lps

    def summary(self, step: int) -> dict:
        return {
            "step": step,
            "observation": self.observation_summary,
            "thought": self.thought,
            "action": self.env_action.to_json() if self.env_action else None,
            "status": self.status,
            "expected_outcome": self.expected_outcome,
            "suspected_wrong": self.suspected_wrong,
            "corrective": self.corrective,
            "execution_error": self.execution_error,
        }


@dataclass
class History:
    instruction: str
    entries: list = field(default_factory=list)
    current_observation: Optional[ScreenObservation] = None

    def append(self, record: StepRecord) -> None:
        self.entries.append(record)

    def mark_suspected(self, index: int) -> None:
        # the only permitted mutation of a past record
        self.entries[index].suspected_wrong = True


@dataclass(frozen=True)
class PromptBundle:
    instruction: str
    step: int  # 1-based index of the step being decided
    prior_steps: tuple
    image_ref: str
    marks: tuple
    dims: tuple[int, int]
    action_space: str = ACTION_SPACE_TEXT
    response_format: str = RESPONSE_FORMAT_TEXT
    image_png: bytes = field(default=b"", compare=False, repr=False)

    def serialize(self) -> str:
        return json.dumps(
            {
                "instruction": self.instruction,
                "step": self.step,
                "prior_steps": list(self.prior_steps),
                "image": self.image_ref,
                "marks": list(self.marks),
                "screen": list(self.dims),
                "action_space": self.action_space,
                "response_format": self.response_format,
            },
            sort_keys=True,
            ensure_ascii=False,
        )

    def messages(self, image_url: Optional[str] = None, repair_note: Optional[str] = None) -> list:
        system = (
            "You operate a smartphone through a robotic arm that can only tap and swipe "
            "with a single finger. You see the screen as an image with numbered marks.\n"
            f"Action space:\n{self.action_space}\n{self.response_format}"
        )
        history = "\n".join(json.dumps(s, ensure_ascii=False) for s in self.prior_steps) or "(none)"
        marks = "\n".join(
            f"[{m['index']}] {m['kind']} {m.get('label') or ''} bbox={m['bbox']}" for m in self.marks
        )
        text = (
            f"Instruction: {self.instruction}\nStep: {self.step}\n"
            f"Screen size: {self.dims[0]}x{self.dims[1]}\nPrevious steps:\n{history}\n"
            f"Marked elements:\n{marks or '(none)'}"
        )
        content: list = [{"type": "text", "text": text}]
        if image_url:
            content.append({"type": "image_url", "image_url": {"url": image_url}})
        msgs = [{"role": "system", "content": system}, {"role": "user", "content": content}]
        if repair_note:
            msgs.append({"role": "user", "content": repair_note})
        return msgs


def build_prompt(history: History, obs: ScreenObservation, marked: MarkedImage) -> PromptBundle:
    history.current_observation = obs
    return PromptBundle(
        instruction=history.instruction,
        step=len(history.entries) + 1,
        prior_steps=tuple(r.summary(i) for i, r in enumerate(history.entries, 1)),
        image_ref=marked.raster_ref,
        marks=tuple(m.to_json() for m in marked.marks),
        dims=obs.dims,
        image_png=marked.png,
    )


_FENCE = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.S)


def _extract_json(raw: str) -> dict:
    candidates = [raw.strip()]
    m = _FENCE.search(raw)
    if m:
        candidates.append(m.group(1))
    lo, hi = raw.find("{"), raw.rfind("}")
    if 0 <= lo < hi:
        candidates.append(raw[lo:hi + 1])
    for text in candidates:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError:
            continue
        if isinstance(doc, dict):
            return doc
    raise DecisionError("response is not a JSON object")


def _resolve_marks(action: dict, marks: Optional[Sequence[IndexedBBox]]) -> dict:
    params = action.get("params")
    if not isinstance(params, dict) or "mark" not in params:
        return action
    if not marks:
        raise DecisionError("action refers to a mark but no marks were shown")
    by_index = {m.index: m for m in marks}
    idx = params["mark"]
    if idx not in by_index:
        raise DecisionError(f"unknown mark index {idx!r}")
    x, y = center_of(by_index[idx].bbox)
    params = {k: v for k, v in params.items() if k != "mark"}
    params.update(x=x, y=y)
    return {**action, "params": params}


def parse_decision(raw: str, marks: Optional[Sequence[IndexedBBox]] = None,
                   dims: Optional[tuple[int, int]] = None) -> StepRecord:
    """Parse one policy response; raises :class:`DecisionError` subclasses."""
    doc = _extract_json(raw)
    status = doc.get("status", "continue")
    action_doc = doc.get("action")
    action = None
    if action_doc is not None:
        action = ActionSpec.from_json(_resolve_marks(action_doc, marks))
        if dims is not None:
            action.check_bounds(dims)
    thought = doc.get("thought", "")
    if not isinstance(thought, str):
        raise DecisionError("thought must be a string")
    lps = doc.get("logprobs")
    component = None
    if isinstance(lps, dict):
        try:
            component = (float(lps["thought"]), float(lps["action"]))
        except (KeyError, TypeError, ValueError):
            raise DecisionError("logprobs must carry numeric 'thought' and 'action'") from None
    return StepRecord(
        observation_summary=str(doc.get("observation", "")),
        thought=thought,
        env_action=action,
        status=status,
        expected_outcome=str(doc.get("expected_outcome") or ""),
        component_logprobs=component,
        description=doc.get("action_description"),
    )


def request_decision(policy, bundle: PromptBundle, marks=None, dims=None,
                     max_repairs: int = MAX_REPAIRS) -> StepRecord:
    """Ask the policy, re-prompting with the parse error up to ``max_repairs`` times."""
    note = None
    for attempt in range(max_repairs + 1):
        reply = policy.complete(bundle, repair_note=note)
        try:
            record = parse_decision(reply.text, marks, dims)
        except DecisionError as exc:
            logger.info("unparseable policy reply (attempt %d): %s", attempt + 1, exc)
            note = (f"Your previous reply was rejected: {exc}. "
                    "Answer again with a single JSON object in the required format.")
            continue
        if reply.logprobs is not None:
            record.component_logprobs = tuple(reply.logprobs)
            record.__post_init__()
        return record
    raise DecisionError(f"policy reply still malformed after {max_repairs} repairs: {note}")


def reflect(history: History, delta: ScreenDelta) -> Optional[ActionSpec]:
    """Corrective Back when the last step expected a change that did not happen."""
    if not history.entries:
        return None
    last = history.entries[-1]
    if last.env_action is None or last.corrective:
        return None
    if last.expected_outcome.strip().lower() in NO_CHANGE_EXPECTATIONS:
        return None
    if delta.unchanged:
        history.mark_suspected(len(history.entries) - 1)
        return ActionSpec.back()
    return None


def joint_logprob(record: StepRecord) -> float:
    if record.component_logprobs is None:
        raise ValueError("step record has no component log-probabilities")
    lp_thought, lp_env = record.component_logprobs
    return lp_env + lp_thought


def default_budget(golden_steps: int) -> int:
    return max(10, 3 * golden_steps)


@dataclass
class Episode:
    task_id: str
    instruction: str
    steps: list  # EpisodeStep
    records: list  # StepRecord
    terminal_status: str
    step_times_ms: list
    final_screenshot: str
    success: Optional[bool] = None
    agent_steps_successful: int = 0
    agent_steps_total: int = 0
    error: Optional[str] = None


def run_episode(task, env, arm, grounder, policy, budget: int, *,
                layouts: Optional[LayoutCache] = None, device_id: str = "default",
                judge=None) -> Episode:
    """Observe, perceive, prompt, decide, execute and record until done or out of budget."""
    from armphone.dataset import StepContext, record_step

    if budget < 1:
        raise ValueError("step budget must be >= 1")
    if task.origin == "phone_home":
        env.reset("phone_home")
    else:
        env.reset("app_home", task.apps[0])
    if judge is not None:
        judge.start(env)
    ctx = ExecutionContext(env, arm, grounder, layouts or LayoutCache(), device_id)
    history = History(task.instruction)
    steps, times = [], []
    t0 = time.monotonic()
    correction: Optional[ActionSpec] = None
    terminal = "step_budget_exhausted"
    error = None
    successful = total = 0

    while len(steps) < budget:
        obs = env.observe()
        detections = perceive(obs, grounder)
        if correction is not None:
            decision = StepRecord(
                observation_summary="Screen unchanged after the previous step.",
                thought="The previous action did not have its expected effect; reverting it.",
                env_action=correction,
                corrective=True,
            )
        else:
            marked = annotate_marks(obs, detections)
            bundle = build_prompt(history, obs, marked)
            try:
                decision = request_decision(policy, bundle, detections, obs.dims)
            except (DecisionError, PolicyServiceError) as exc:
                error = str(exc)
                decision = StepRecord("", f"policy failure: {exc}", None, status="done")
                terminal = "unrecoverable_error"
        report = None
        fatal = False
        if decision.env_action is not None:
            try:
                report = execute(decision.env_action, ctx)
            except ActionError as exc:
                report = exc.report or ExecutionReport(decision.env_action)
                decision.execution_error = str(exc)
            except (ArmPhoneError, ValueError) as exc:
                report = ExecutionReport(decision.env_action)
                decision.execution_error = str(exc)
                error, terminal, fatal = str(exc), "unrecoverable_error", True
            total += 1
        correct = None
        if judge is not None and decision.env_action is not None:
            correct = judge.step(env)
            successful += int(correct)
        steps.append(record_step(StepContext(task.instruction, obs), decision, report, detections,
                                 is_step_correct=correct))
        times.append(round((time.monotonic() - t0) * 1000))
        history.append(decision)
        if terminal == "unrecoverable_error" or fatal:
            break
        if decision.status == "done":
            terminal = "agent_done"
            break
        correction = reflect(history, screen_delta(obs, env.observe())) if not decision.corrective else None

    success = judge.success(env) if judge is not None else None
    if success is not None and steps:
        steps[-1].is_final_success = success
    return Episode(
        task_id=task.task_id,
        instruction=task.instruction,
        steps=steps,
        records=history.entries,
        terminal_status=terminal,
        step_times_ms=times,
        final_screenshot=env.observe().raster_ref,
        success=success,
        agent_steps_successful=successful,
        agent_steps_total=total,
        error=error,
    )
