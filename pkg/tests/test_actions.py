import pytest
from hypothesis import given
from hypothesis import strategies as st

from armphone.actions import (
    ExecutionContext,
    SwipeOutOfBounds,
    execute,
    hardware_line,
    parse_hardware_line,
    resolve_swipe,
    synthesize_back,
    synthesize_exit,
)
from armphone.actionspace import ActionSpec
from armphone.arm import SimArm, identity_map, plan_swipe, plan_tap, trace_of
from armphone.device import classify_gesture
from armphone.errors import ActionError, DecisionError, KeyboardError, UnknownActionError
from armphone.keyboard import LayoutCache
from armphone.perception import MockGrounder

from helpers import fallback_pack, sim_arm


def ctx_for(env, cmap=None):
    arm = SimArm(cmap, env) if cmap is not None else sim_arm(env)
    return ExecutionContext(env, arm, MockGrounder(), LayoutCache())


@pytest.mark.parametrize("args, end", [
    ((540, 1600, "up", "medium"), (540, 800)),
    ((100, 100, "down", "short"), (100, 700)),
    ((540, 1200, "left", "long"), (0, 1200)),
])
def test_resolve_swipe(args, end):
    start, got = resolve_swipe(*args, (1080, 2400))
    assert start == args[:2]
    assert got == end


def test_swipe_leaving_screen_is_an_error():
    with pytest.raises(SwipeOutOfBounds):
        resolve_swipe(540, 1200, "right", "long", (1080, 2400))  # would end at x=1080
    with pytest.raises(SwipeOutOfBounds):
        resolve_swipe(540, 100, "up", "short", (1080, 2400))


@pytest.mark.parametrize("dims, back, exit_", [
    ((1080, 2400), ((22, 1200), (378, 1200)), ((540, 2352), (540, 1320))),
    ((720, 1600), ((14, 800), (252, 800)), ((360, 1568), (360, 880))),
])
def test_gesture_templates(dims, back, exit_):
    assert synthesize_back(dims) == back
    assert synthesize_exit(dims) == exit_


def test_hardware_strings():
    cmap = identity_map()
    assert hardware_line(plan_tap(cmap, (176, 1450))) == "tap at (176, 1450)"
    assert hardware_line(plan_swipe(cmap, (22, 1200), (378, 1200))) == "swipe (22,1200)->(378,1200)"
    assert parse_hardware_line("tap at (176, 1450)") == ("tap", (176.0, 1450.0))
    with pytest.raises(ValueError):
        parse_hardware_line("pinch (1,2)")


@given(st.floats(0, 5000, allow_nan=False), st.floats(0, 5000, allow_nan=False),
       st.floats(0, 5000, allow_nan=False), st.floats(0, 5000, allow_nan=False))
def test_hardware_string_round_trip(x1, y1, x2, y2):
    cmap = identity_map()
    kind, p = parse_hardware_line(hardware_line(plan_tap(cmap, (x1, y1))))
    assert (kind, p) == ("tap", (x1, y1))
    if (x1, y1) != (x2, y2):
        _, a, b = parse_hardware_line(hardware_line(plan_swipe(cmap, (x1, y1), (x2, y2))))
        assert (a, b) == ((x1, y1), (x2, y2))


def test_action_spec_validation():
    with pytest.raises(UnknownActionError):
        ActionSpec.from_json({"type": "pinch", "params": {}})
    with pytest.raises(DecisionError):
        ActionSpec("swipe", 1, 1, "diagonal", "short")
    with pytest.raises(DecisionError):
        ActionSpec.tap(1080, 5).check_bounds((1080, 2400))
    a = ActionSpec.swipe(1, 2, "up", "long")
    assert ActionSpec.from_json(a.to_json()) == a


def test_back_gesture_path(env, cmap):
    env.reset("app_home", "settings")
    execute(ActionSpec.tap(540, 480), ctx_for(env, cmap))
    report = execute(ActionSpec.back(), ctx_for(env, cmap))
    assert not report.fallback_used and report.changed
    assert env.screen_id == "settings_home"
    assert len(report.hardware) == 1


def test_back_fallback_taps_back_icon(env, cmap):
    env.reset("app_home", "notes")
    ctx = ctx_for(env, cmap)
    for a in (ActionSpec.tap(940, 2180), ActionSpec.type_text("x"), ActionSpec.tap(960, 170)):
        execute(a, ctx)
    assert env.screen_id == "notes_view"
    report = execute(ActionSpec.back(), ctx)
    assert report.fallback_used and report.changed
    assert env.screen_id == "notes_home"
    lines = report.hardware_lines()
    assert lines[0].startswith("swipe") and lines[1] == "tap at (80, 300)"


def test_back_without_affordance_fails(env, cmap):
    env.reset("app_home", "settings")
    execute(ActionSpec.tap(540, 680), ctx_for(env, cmap))
    assert env.screen_id == "settings_about"
    with pytest.raises(ActionError, match="no back affordance") as err:
        execute(ActionSpec.back(), ctx_for(env, cmap))
    assert len(err.value.report.hardware) == 1


def test_exit_gesture(env, cmap):
    env.reset("app_home", "shop")
    report = execute(ActionSpec.exit(), ctx_for(env, cmap))
    assert env.screen_id == "home" and not report.fallback_used


def test_text_without_keyboard_is_recoverable(env, cmap):
    env.reset("app_home", "notes")
    with pytest.raises(KeyboardError, match="not visible") as err:
        execute(ActionSpec.type_text("hi"), ctx_for(env, cmap))
    assert isinstance(err.value, ActionError)


SWEEP_W = (320, 640, 1080, 2160)
SWEEP_H = (480, 1280, 2400, 3840)


@pytest.mark.parametrize("w", SWEEP_W)
@pytest.mark.parametrize("h", SWEEP_H)
def test_gesture_sweep(w, h):
    dims = (w, h)
    cmap = identity_map(bounds=(0, 0, w, h))
    for synth, kind in ((synthesize_back, "back_gesture"), (synthesize_exit, "exit_gesture")):
        start, end = synth(dims)
        trace = trace_of(plan_swipe(cmap, start, end), cmap)
        assert classify_gesture(trace, dims).kind == kind


def test_fallback_on_minimal_packs():
    env = fallback_pack(with_icon=True)
    report = execute(ActionSpec.back(), ctx_for(env))
    assert report.fallback_used and env.screen_id == "home"
    with pytest.raises(ActionError):
        execute(ActionSpec.back(), ctx_for(fallback_pack(with_icon=False)))
