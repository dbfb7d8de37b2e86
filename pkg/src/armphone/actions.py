"""Action engine: turns discrete actions into arm trajectories.

Back and Exit are executed gesture-first (edge swipe / bottom swipe). When
the screen does not change afterwards, the engine falls back to grounding a
back/home affordance and tapping its center. Text goes through the keyboard
pipeline in :mod:`armphone.keyboard`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from armphone.actionspace import ActionSpec
from armphone.arm import ContactTrajectory, plan_swipe, plan_tap
from armphone.device import TransitionResult, screen_delta
from armphone.errors import ActionError, KeyboardError
from armphone.geometry import Point, center_of, fmt_num, in_screen, round_half_up
from armphone.keyboard import LayoutCache, plan_text_input

SWIPE_FRACTIONS = {"short": Fraction(1, 4), "medium": Fraction(1, 3), "long": Fraction(1, 2)}

BACK_TEMPLATE = ((0.02, 0.5), (0.35, 0.5))
EXIT_TEMPLATE = ((0.5, 0.98), (0.5, 0.55))

FALLBACK_QUERIES = {"back": ("back",), "exit": ("home", "exit")}


class SwipeOutOfBounds(ActionError):
    pass


def resolve_swipe(x: float, y: float, direction: str, distance: str,
                  dims: tuple[int, int]) -> tuple[Point, Point]:
    """Start and end pixels for a discrete swipe; leaving the screen is an error."""
    w, h = dims
    if not in_screen((x, y), dims):
        raise SwipeOutOfBounds(f"swipe start ({x}, {y}) outside screen {dims}")
    frac = SWIPE_FRACTIONS[distance]
    ex, ey = Fraction(x), Fraction(y)
    if direction == "up":
        ey -= frac * h
    elif direction == "down":
        ey += frac * h
    elif direction == "left":
        ex -= frac * w
    elif direction == "right":
        ex += frac * w
    else:
        raise ValueError(f"unknown direction {direction!r}")
    end = (float(ex), float(ey))
    if not in_screen(end, dims):
        raise SwipeOutOfBounds(f"swipe end {end} outside screen {dims}")
    return (x, y), end


def _template(tpl, dims) -> tuple[tuple[int, int], tuple[int, int]]:
    w, h = dims
    (sx, sy), (ex, ey) = tpl
    return ((round_half_up(sx * w), round_half_up(sy * h)),
            (round_half_up(ex * w), round_half_up(ey * h)))


def synthesize_back(dims: tuple[int, int]):
    """Left-edge, left-to-right swipe."""
    return _template(BACK_TEMPLATE, dims)


def synthesize_exit(dims: tuple[int, int]):
    """Bottom-edge, bottom-to-top swipe."""
    return _template(EXIT_TEMPLATE, dims)


def hardware_line(traj: ContactTrajectory) -> str:
    if traj.kind == "tap":
        x, y = traj.pixel_start
        return f"tap at ({fmt_num(x)}, {fmt_num(y)})"
    (x1, y1), (x2, y2) = traj.pixel_start, traj.pixel_end
    return f"swipe ({fmt_num(x1)},{fmt_num(y1)})->({fmt_num(x2)},{fmt_num(y2)})"


_NUM = r"\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*"
_TAP_RE = re.compile(rf"^tap at \({_NUM},{_NUM}\)$")
_SWIPE_RE = re.compile(rf"^swipe \({_NUM},{_NUM}\)->\({_NUM},{_NUM}\)$")


def parse_hardware_line(line: str):
    """Inverse of :func:`hardware_line`: ``("tap", p)`` or ``("swipe", a, b)``."""
    m = _TAP_RE.match(line.strip())
    if m:
        return ("tap", (float(m[1]), float(m[2])))
    m = _SWIPE_RE.match(line.strip())
    if m:
        return ("swipe", (float(m[1]), float(m[2])), (float(m[3]), float(m[4])))
    raise ValueError(f"unparseable hardware action {line!r}")


@dataclass
class ExecutionContext:
    env: object  # anything with observe() and dims
    arm: object  # executor with .cmap and .execute(traj)
    grounder: object
    layouts: LayoutCache = field(default_factory=LayoutCache)
    device_id: str = "default"


@dataclass
class ExecutionReport:
    action: ActionSpec
    hardware: list = field(default_factory=list)
    fallback_used: bool = False
    results: list = field(default_factory=list)

    def __post_init__(self):
        if self.fallback_used and self.action.type not in ("back", "exit"):
            raise ValueError("fallback only applies to back/exit")

    @property
    def changed(self) -> bool:
        return any(r.changed for r in self.results)

    def outcome(self) -> dict:
        if not self.results:
            return {"changed": False}
        return {"changed": self.changed, "from": self.results[0].from_screen,
                "to": self.results[-1].to_screen}

    def hardware_lines(self) -> list[str]:
        return [hardware_line(t) for t in self.hardware]


def _run(ctx: ExecutionContext, report: ExecutionReport, traj: ContactTrajectory) -> TransitionResult:
    report.hardware.append(traj)
    result = ctx.arm.execute(traj)
    report.results.append(result)
    return result


def _keyboard_regions(obs, grounder):
    return [r.bbox for r in grounder.ground_icons(obs, "keyboard")]


def find_affordance(obs, grounder, queries) -> Optional[tuple[int, int]]:
    """Center of the best back/home affordance: exact labels first, icons before text."""
    kb = _keyboard_regions(obs, grounder)

    def usable(c):
        return not any(r.contains(center_of(c.bbox)) for r in kb)

    for exact in (True, False):
        for q in queries:
            pools = (grounder.ground_icons(obs, q), grounder.text_candidates(obs, q))
            for pool in pools:
                for c in pool:
                    if exact and (c.label or "").lower() != q:
                        continue
                    if usable(c):
                        return center_of(c.bbox)
    return None


def execute(action: ActionSpec, ctx: ExecutionContext) -> ExecutionReport:
    report = ExecutionReport(action)
    dims = ctx.env.dims
    cmap = ctx.arm.cmap
    if action.type == "tap":
        action.check_bounds(dims)
        _run(ctx, report, plan_tap(cmap, (action.x, action.y)))
    elif action.type == "swipe":
        start, end = resolve_swipe(action.x, action.y, action.direction, action.distance, dims)
        _run(ctx, report, plan_swipe(cmap, start, end))
    elif action.type in ("back", "exit"):
        start, end = synthesize_back(dims) if action.type == "back" else synthesize_exit(dims)
        before = ctx.env.observe()
        _run(ctx, report, plan_swipe(cmap, start, end))
        after = ctx.env.observe()
        if screen_delta(before, after).unchanged:
            target = find_affordance(after, ctx.grounder, FALLBACK_QUERIES[action.type])
            if target is None:
                raise ActionError(
                    f"{action.type} gesture had no effect and no {action.type} affordance was found",
                    report,
                )
            report.fallback_used = True
            _run(ctx, report, plan_tap(cmap, target))
    elif action.type == "text":
        obs = ctx.env.observe()
        try:
            if not _keyboard_regions(obs, ctx.grounder):
                raise KeyboardError("keyboard not visible")
            layout = ctx.layouts.get_or_localize(obs, ctx.grounder, ctx.device_id)
            taps = plan_text_input(action.text, layout)
        except KeyboardError as exc:
            raise KeyboardError(str(exc), report) from None
        for tap in taps:
            _run(ctx, report, plan_tap(cmap, (tap.x, tap.y)))
    return report
