import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from armphone.actions import ExecutionContext, execute
from armphone.actionspace import ActionSpec
from armphone.errors import KeyboardError
from armphone.geometry import BBox
from armphone.keyboard import (
    BACKSPACE_CHAR,
    KeyboardLayout,
    KeyRow,
    LayoutCache,
    localize_keyboard,
    plan_text_input,
)
from armphone.perception import MockGrounder

from helpers import ShiftedAnchors, keyboard_env, sim_arm

TYPABLE = string.ascii_letters + "1234567890-/:;()$&@.,?!'\"# "


def layout_for(env):
    return localize_keyboard(env.observe(), MockGrounder(), "dev")


def test_anchor_extrapolation_example():
    layout = layout_for(keyboard_env())
    row = layout.rows[0]
    assert row.keys[0] == ("q", (54, 1480))
    assert row.keys[1] == ("w", (162, 1480))
    assert row.keys[4] == ("t", (486, 1480))


def test_swapped_anchors_rejected():
    env = keyboard_env()
    # w lands on top of q: zero pitch
    with pytest.raises(KeyboardError, match="pitch"):
        localize_keyboard(env.observe(), ShiftedAnchors({"w": (-108, 0)}), "dev")


def test_missing_keyboard_region():
    from helpers import minimal_pack
    from armphone.device import Environment, parse_screen_pack

    env = Environment(parse_screen_pack(minimal_pack()))
    with pytest.raises(KeyboardError, match="region"):
        localize_keyboard(env.observe(), MockGrounder())


@pytest.mark.parametrize("x0, pitch", [(54, 108), (40, 80), (60, 96), (36, 72)])
def test_exact_on_equal_pitch_keyboards(x0, pitch):
    env = keyboard_env(x0=x0, pitch=pitch)
    layout = layout_for(env)
    truth = env.pack.keyboard.true_centers("letters")
    est = layout.letter_centers()
    assert set(est) == set(truth)
    assert all(est[k] == truth[k] for k in truth)
    sym_truth = env.pack.keyboard.true_centers("symbols")
    assert layout.symbol_centers() == sym_truth


@pytest.mark.parametrize("dq, dw", [(-2, 2), (2, -2), (2, 2), (-2, -2), (0, 2)])
def test_perturbed_anchors_within_half_pitch(dq, dw):
    env = keyboard_env()
    offsets = {"q": (dq, dq), "w": (dw, -dw), "a": (dq, 0), "s": (dw, 0), "z": (dq, 0), "x": (dw, 0)}
    layout = localize_keyboard(env.observe(), ShiftedAnchors(offsets), "dev")
    truth = env.pack.keyboard.true_centers("letters")
    est = layout.letter_centers()
    worst = max(max(abs(est[k][0] - truth[k][0]), abs(est[k][1] - truth[k][1])) for k in truth)
    assert worst <= 108 / 2


def test_layout_invariants():
    keys = {"shift": (0, 0), "symbols": (0, 0), "space": (0, 0), "backspace": (0, 0), "return": (0, 0)}
    region = BBox(0, 0, 10, 10)
    with pytest.raises(KeyboardError, match="pitch"):
        KeyboardLayout("d", (KeyRow(0, (("a", (0, 0)), ("b", (10, 0)), ("c", (30, 0)))),), (), keys, region)
    with pytest.raises(KeyboardError, match="more than one home"):
        KeyboardLayout("d", (KeyRow(0, (("a", (0, 0)),)), KeyRow(1, (("a", (0, 1)),))), (), keys, region)
    with pytest.raises(KeyboardError, match="lacks"):
        KeyboardLayout("d", (), (), {"shift": (0, 0)}, region)


def oracle_type(taps, layout):
    """Independent layer-state machine: replay tap centers into text."""
    by_center = {}
    for row in layout.rows:
        for sym, c in row.keys:
            by_center.setdefault(tuple(c), {})["letters"] = sym
    for row in layout.symbol_rows:
        for sym, c in row.keys:
            by_center.setdefault(tuple(c), {})["symbols"] = sym
    special = {tuple(c): name for name, c in layout.layer_switch_keys.items()}
    layer, shift, out = "letters", False, []
    for t in taps:
        p = (t.x, t.y)
        name = special.get(p)
        if name == "shift":
            shift = True
        elif name == "symbols":
            layer = "symbols" if layer == "letters" else "letters"
        elif name == "space":
            out.append(" ")
        elif name == "backspace":
            out.append(BACKSPACE_CHAR)
        else:
            ch = by_center[p][layer]
            out.append(ch.upper() if shift else ch)
            shift = False
    return "".join(out), layer


def test_plan_examples():
    layout = layout_for(keyboard_env())
    letters = layout.letter_centers()
    keys = layout.layer_switch_keys
    assert plan_text_input("a", layout) == [ActionSpec.tap(*letters["a"])]
    assert plan_text_input("Hi", layout) == [
        ActionSpec.tap(*keys["shift"]), ActionSpec.tap(*letters["h"]), ActionSpec.tap(*letters["i"])]
    taps = plan_text_input("a1b", layout)
    assert len(taps) == 5
    assert oracle_type(taps, layout) == ("a1b", "letters")
    assert plan_text_input(" \b", layout) == [ActionSpec.tap(*keys["space"]),
                                               ActionSpec.tap(*keys["backspace"])]


def test_unreachable_character_named():
    layout = layout_for(keyboard_env())
    with pytest.raises(KeyboardError, match=r"'é' at index 2"):
        plan_text_input("abé", layout)


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=TYPABLE, max_size=30))
def test_plan_matches_layer_oracle(text):
    layout = _SHARED_LAYOUT
    taps = plan_text_input(text, layout)
    typed, final_layer = oracle_type(taps, layout)
    assert typed == text
    assert final_layer == "letters"
    expected = sum(1 + ch.isupper() + 2 * (ch not in string.ascii_letters + " ") for ch in text)
    assert len(taps) == expected


_SHARED_LAYOUT = layout_for(keyboard_env())


@settings(max_examples=25, deadline=None)
@given(st.text(alphabet=TYPABLE, min_size=1, max_size=12))
def test_text_action_types_into_sim(text):
    env = keyboard_env()
    ctx = ExecutionContext(env, sim_arm(env), MockGrounder(), LayoutCache())
    execute(ActionSpec.type_text(text), ctx)
    assert env.text_buffer == text


def test_layout_cache_localizes_once(tmp_path):
    env = keyboard_env()
    calls = []

    class Counting(MockGrounder):
        def ground_icons(self, obs, query=""):
            calls.append(query)
            return super().ground_icons(obs, query)

    cache = LayoutCache(tmp_path)
    first = cache.get_or_localize(env.observe(), Counting(), "dev")
    n = len(calls)
    assert cache.get_or_localize(env.observe(), Counting(), "dev") is first
    assert len(calls) == n
    reloaded = LayoutCache(tmp_path).get("dev")
    assert reloaded == first
    assert (tmp_path / "keyboard_dev.json").exists()
