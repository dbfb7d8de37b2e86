"""Deterministic simulated smartphone.

A screen pack (UTF-8 JSON, ``pack_version: 1``) declares screens, their GUI
elements, a transition table keyed by classified gestures, pack variables
and an optional on-screen keyboard. The :class:`Environment` consumes touch
traces, classifies them geometrically, applies at most one transition and
renders a flat-color raster that is content-addressed by its PNG digest.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Optional

import jsonschema
from PIL import Image, ImageDraw, ImageFont

from armphone.blobs import BlobStore, ref_for
from armphone.errors import InvalidTraceError, PackError
from armphone.geometry import BBox, Point, in_screen

logger = logging.getLogger(__name__)

ELEMENT_KINDS = ("icon", "text")
DIRECTIONS = ("up", "down", "left", "right")
TRIGGER_TYPES = ("tap_on", "swipe", "back_gesture", "exit_gesture", "text_commit")
GESTURE_KINDS = ("tap", "swipe", "back_gesture", "exit_gesture", "noise")

# Geometry of gesture classification, as fractions of the screen.
TAP_MAX_DISPLACEMENT = 0.02  # of min(W, H)
BACK_START_MAX_X = 0.05  # of W
BACK_MIN_DX = 0.25  # of W
EXIT_START_MIN_Y = 0.90  # of H
EXIT_MIN_DY = 0.30  # of H

TEXT_VAR = "$text"

_BBOX = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}

PACK_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["pack_version", "screen", "home", "screens"],
    "properties": {
        "pack_version": {"const": 1},
        "name": {"type": "string"},
        "screen": {
            "type": "object",
            "required": ["width", "height"],
            "properties": {
                "width": {"type": "integer", "minimum": 1},
                "height": {"type": "integer", "minimum": 1},
            },
        },
        "home": {"type": "string"},
        "apps": {"type": "object", "additionalProperties": {"type": "string"}},
        "variables": {"type": "object"},
        "element_count": {"type": "integer", "minimum": 0},
        "keyboard": {
            "type": "object",
            "required": ["region", "key_height", "rows", "special"],
            "properties": {
                "region": _BBOX,
                "key_height": {"type": "number", "exclusiveMinimum": 0},
                "rows": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["y", "x0", "pitch", "letters", "symbols"],
                        "properties": {
                            "y": {"type": "number"},
                            "x0": {"type": "number"},
                            "pitch": {"type": "number", "exclusiveMinimum": 0},
                            "letters": {"type": "string", "minLength": 2},
                            "symbols": {"type": "string"},
                        },
                    },
                },
                "special": {
                    "type": "object",
                    "required": ["shift", "symbols", "space", "backspace", "return"],
                    "additionalProperties": _BBOX,
                },
            },
        },
        "screens": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["screen_id", "elements"],
                "properties": {
                    "screen_id": {"type": "string", "minLength": 1},
                    "flags": {
                        "type": "object",
                        "properties": {
                            "supports_edge_back_gesture": {"type": "boolean"},
                            "supports_bottom_exit_gesture": {"type": "boolean"},
                            "keyboard_visible": {"type": "boolean"},
                        },
                        "additionalProperties": False,
                    },
                    "elements": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["id", "kind", "label", "bbox"],
                            "properties": {
                                "id": {"type": "string", "minLength": 1},
                                "kind": {"enum": list(ELEMENT_KINDS)},
                                "label": {"type": "string"},
                                "bbox": _BBOX,
                            },
                        },
                    },
                    "transitions": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["trigger", "target"],
                            "properties": {
                                "trigger": {
                                    "type": "object",
                                    "required": ["type"],
                                    "properties": {
                                        "type": {"enum": list(TRIGGER_TYPES)},
                                        "element": {"type": "string"},
                                        "direction": {"enum": list(DIRECTIONS)},
                                    },
                                },
                                "guard": {"type": "object"},
                                "target": {"type": "string"},
                                "effects": {"type": "object"},
                            },
                        },
                    },
                },
            },
        },
    },
}


@dataclass(frozen=True)
class GuiElement:
    element_id: str
    kind: str
    label: str
    bbox: BBox

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"element kind must be icon or text, got {self.kind!r}")


@dataclass(frozen=True)
class Trigger:
    type: str
    arg: Optional[str] = None  # element id for tap_on, direction for swipe

    def __str__(self) -> str:
        return f"{self.type}({self.arg})" if self.arg else self.type


@dataclass(frozen=True)
class TransitionRule:
    trigger: Trigger
    target: str
    guard: tuple = ()  # sorted (name, value) pairs, all must hold
    effects: tuple = ()

    def guard_holds(self, variables: dict, text: str) -> bool:
        for name, value in self.guard:
            current = text if name == TEXT_VAR else variables.get(name)
            if current != value:
                return False
        return True

    def conflicts_with(self, other: "TransitionRule") -> bool:
        """True when the two guards can never hold together."""
        mine = dict(self.guard)
        return any(k in mine and mine[k] != v for k, v in other.guard)


@dataclass(frozen=True)
class ScreenSpec:
    screen_id: str
    elements: tuple[GuiElement, ...]
    transitions: tuple[TransitionRule, ...]
    supports_edge_back_gesture: bool = True
    supports_bottom_exit_gesture: bool = True
    keyboard_visible: bool = False


@dataclass(frozen=True)
class KeyRowSpec:
    y: float
    x0: float
    pitch: float
    letters: str
    symbols: str

    def center(self, k: int) -> tuple[float, float]:
        return (self.x0 + k * self.pitch, self.y)


@dataclass(frozen=True)
class SimKeyboard:
    """Ground-truth keyboard geometry; keys are equally pitched per row."""

    region: BBox
    key_height: float
    rows: tuple[KeyRowSpec, ...]
    special: dict

    def key_elements(self, layer: str) -> list[GuiElement]:
        out = [GuiElement("kb_region", "icon", "keyboard", self.region)]
        h = self.key_height / 2
        for r, row in enumerate(self.rows):
            chars = row.letters if layer == "letters" else row.symbols
            for k, ch in enumerate(chars):
                x, y = row.center(k)
                box = BBox(x - row.pitch / 2, y - h, x + row.pitch / 2, y + h)
                out.append(GuiElement(f"kb_{r}_{k}", "text", ch, box))
        for name, box in sorted(self.special.items()):
            label = name
            if name == "symbols":
                label = "?123" if layer == "letters" else "ABC"
            out.append(GuiElement(f"kb_{name}", "text", label, box))
        return out

    def true_centers(self, layer: str = "letters") -> dict[str, tuple[float, float]]:
        centers = {}
        for row in self.rows:
            chars = row.letters if layer == "letters" else row.symbols
            for k, ch in enumerate(chars):
                centers[ch] = row.center(k)
        return centers


@dataclass(frozen=True)
class ScreenPack:
    name: str
    dims: tuple[int, int]
    home: str
    apps: dict
    variables: dict
    screens: dict  # screen_id -> ScreenSpec
    keyboard: Optional[SimKeyboard] = None
    declared_element_count: Optional[int] = None
    source: Optional[Path] = None

    @property
    def element_count(self) -> int:
        return sum(len(s.elements) for s in self.screens.values())


@dataclass(frozen=True)
class TouchSample:
    x: float
    y: float
    contact: bool
    t_ms: float


@dataclass(frozen=True)
class TouchTrace:
    samples: tuple[TouchSample, ...]

    def __post_init__(self):
        if not self.samples:
            raise InvalidTraceError("empty trace")
        for a, b in zip(self.samples, self.samples[1:]):
            if not b.t_ms > a.t_ms:
                raise InvalidTraceError("time offsets must be strictly increasing")

    @classmethod
    def from_points(cls, points: Iterable[Point], dt_ms: float = 10.0) -> "TouchTrace":
        """All-contact trace through ``points`` at a fixed sampling interval."""
        return cls(tuple(TouchSample(x, y, True, i * dt_ms) for i, (x, y) in enumerate(points)))

    def contact_points(self) -> list[Point]:
        return [(s.x, s.y) for s in self.samples if s.contact]


@dataclass(frozen=True)
class Gesture:
    kind: str
    start: Optional[Point] = None
    end: Optional[Point] = None
    direction: Optional[str] = None

    def __str__(self) -> str:
        return f"swipe({self.direction})" if self.kind == "swipe" else self.kind


@dataclass(frozen=True)
class TransitionResult:
    changed: bool
    from_screen: str
    to_screen: str
    gesture: Gesture
    trigger: Optional[str] = None


@dataclass(frozen=True)
class ScreenObservation:
    step_index: int
    raster_ref: str
    dims: tuple[int, int]
    scene: Optional[tuple[GuiElement, ...]] = None
    png: bytes = field(default=b"", compare=False, repr=False)

    def __post_init__(self):
        if self.dims[0] <= 0 or self.dims[1] <= 0:
            raise ValueError("observation dims must be positive")


@dataclass(frozen=True)
class ScreenDelta:
    unchanged: bool
    added: tuple[str, ...] = ()
    removed: tuple[str, ...] = ()


def classify_gesture(trace: TouchTrace, dims: tuple[int, int]) -> Gesture:
    """Classify a trace by the net displacement of its contact phase."""
    w, h = dims
    pts = trace.contact_points()
    if not pts:
        return Gesture("noise")
    (x0, y0), (x1, y1) = pts[0], pts[-1]
    dx, dy = x1 - x0, y1 - y0
    if (dx * dx + dy * dy) ** 0.5 < TAP_MAX_DISPLACEMENT * min(w, h):
        return Gesture("tap", start=(x0, y0), end=(x0, y0))
    if x0 <= BACK_START_MAX_X * w and dx >= BACK_MIN_DX * w:
        return Gesture("back_gesture", start=(x0, y0), end=(x1, y1))
    if y0 >= EXIT_START_MIN_Y * h and -dy >= EXIT_MIN_DY * h:
        return Gesture("exit_gesture", start=(x0, y0), end=(x1, y1))
    if abs(dx) >= abs(dy):
        direction = "right" if dx > 0 else "left"
    else:
        direction = "down" if dy > 0 else "up"
    return Gesture("swipe", start=(x0, y0), end=(x1, y1), direction=direction)


def screen_delta(a: ScreenObservation, b: ScreenObservation) -> ScreenDelta:
    added: tuple[str, ...] = ()
    removed: tuple[str, ...] = ()
    if a.scene is not None and b.scene is not None:
        ka = {(e.element_id, e.label) for e in a.scene}
        kb = {(e.element_id, e.label) for e in b.scene}
        added = tuple(sorted(eid for eid, _ in kb - ka))
        removed = tuple(sorted(eid for eid, _ in ka - kb))
    return ScreenDelta(a.raster_ref == b.raster_ref, added, removed)


# -- pack loading -------------------------------------------------------------


def _json_path(error: jsonschema.ValidationError) -> str:
    parts = ["$"]
    for p in error.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def _trigger(doc: dict, where: str) -> Trigger:
    t = doc["type"]
    if t == "tap_on":
        if "element" not in doc:
            raise PackError("tap_on trigger needs an element", where)
        return Trigger(t, doc["element"])
    if t == "swipe":
        if "direction" not in doc:
            raise PackError("swipe trigger needs a direction", where)
        return Trigger(t, doc["direction"])
    return Trigger(t)


def parse_screen_pack(doc: dict, source: Optional[Path] = None) -> ScreenPack:
    try:
        jsonschema.validate(doc, PACK_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise PackError(exc.message, _json_path(exc)) from None

    w, h = doc["screen"]["width"], doc["screen"]["height"]
    screens: dict[str, ScreenSpec] = {}
    for si, sdoc in enumerate(doc["screens"]):
        where = f"$.screens[{si}]"
        sid = sdoc["screen_id"]
        if sid in screens:
            raise PackError(f"duplicate screen id {sid!r}", f"{where}.screen_id")
        elements = []
        seen = set()
        for ei, edoc in enumerate(sdoc["elements"]):
            ewhere = f"{where}.elements[{ei}]"
            if edoc["id"] in seen:
                raise PackError(f"duplicate element id {edoc['id']!r}", f"{ewhere}.id")
            seen.add(edoc["id"])
            try:
                box = BBox.from_seq(edoc["bbox"])
            except ValueError as exc:
                raise PackError(str(exc), f"{ewhere}.bbox") from None
            if not box.within(w, h):
                raise PackError("bbox outside screen bounds", f"{ewhere}.bbox")
            elements.append(GuiElement(edoc["id"], edoc["kind"], edoc["label"], box))
        rules = []
        for ti, tdoc in enumerate(sdoc.get("transitions", [])):
            twhere = f"{where}.transitions[{ti}]"
            trig = _trigger(tdoc["trigger"], f"{twhere}.trigger")
            if trig.type == "tap_on" and trig.arg not in seen:
                raise PackError(f"tap_on unknown element {trig.arg!r}", f"{twhere}.trigger")
            rules.append(
                TransitionRule(
                    trigger=trig,
                    target=tdoc["target"],
                    guard=tuple(sorted(tdoc.get("guard", {}).items())),
                    effects=tuple(sorted(tdoc.get("effects", {}).items())),
                )
            )
        for i, a in enumerate(rules):
            for b in rules[i + 1:]:
                if a.trigger == b.trigger and not a.conflicts_with(b):
                    raise PackError(
                        f"ambiguous transitions for trigger {a.trigger} on screen {sid!r}", where
                    )
        flags = sdoc.get("flags", {})
        screens[sid] = ScreenSpec(
            screen_id=sid,
            elements=tuple(elements),
            transitions=tuple(rules),
            supports_edge_back_gesture=flags.get("supports_edge_back_gesture", True),
            supports_bottom_exit_gesture=flags.get("supports_bottom_exit_gesture", True),
            keyboard_visible=flags.get("keyboard_visible", False),
        )

    for sid, spec in screens.items():
        for rule in spec.transitions:
            if rule.target not in screens:
                raise PackError(
                    f"dangling transition target {rule.target!r}", f"$.screens[{sid}].transitions"
                )
    if doc["home"] not in screens:
        raise PackError(f"home screen {doc['home']!r} not in pack", "$.home")
    apps = dict(doc.get("apps", {}))
    for app_id, target in apps.items():
        if target not in screens:
            raise PackError(f"app {app_id!r} home {target!r} not in pack", f"$.apps.{app_id}")

    keyboard = None
    if "keyboard" in doc:
        keyboard = _parse_keyboard(doc["keyboard"], w, h)
    elif any(s.keyboard_visible for s in screens.values()):
        raise PackError("keyboard_visible screens require a keyboard section", "$.keyboard")

    pack = ScreenPack(
        name=doc.get("name", source.stem if source else "pack"),
        dims=(w, h),
        home=doc["home"],
        apps=apps,
        variables=dict(doc.get("variables", {})),
        screens=screens,
        keyboard=keyboard,
        declared_element_count=doc.get("element_count"),
        source=source,
    )
    if pack.declared_element_count is not None and pack.declared_element_count != pack.element_count:
        raise PackError(
            f"declared element_count {pack.declared_element_count} != actual {pack.element_count}",
            "$.element_count",
        )
    return pack


def _parse_keyboard(doc: dict, w: int, h: int) -> SimKeyboard:
    region = BBox.from_seq(doc["region"])
    rows = tuple(
        KeyRowSpec(r["y"], r["x0"], r["pitch"], r["letters"], r["symbols"]) for r in doc["rows"]
    )
    special = {k: BBox.from_seq(v) for k, v in doc["special"].items()}
    kb = SimKeyboard(region, doc["key_height"], rows, special)
    for layer in ("letters", "symbols"):
        for el in kb.key_elements(layer):
            if not el.bbox.within(w, h):
                raise PackError(f"keyboard key {el.label!r} outside screen", "$.keyboard")
    for i, row in enumerate(rows):
        if len(row.symbols) > len(row.letters):
            raise PackError("symbol row longer than its letter row", f"$.keyboard.rows[{i}]")
    chars = "".join(r.letters + r.symbols for r in rows)
    if len(set(chars)) != len(chars):
        raise PackError("every keyboard symbol needs exactly one home", "$.keyboard.rows")
    return kb


def load_screen_pack(pack_file, blob_store: Optional[BlobStore] = None) -> "Environment":
    """Load and validate a screen pack; the environment starts at the home screen."""
    path = Path(pack_file)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PackError(f"invalid JSON: {exc}", str(path)) from None
    return Environment(parse_screen_pack(doc, source=path), blob_store=blob_store)


# -- rendering ----------------------------------------------------------------

# Flat palette; rasters are 8-bit paletted PNGs (small and fast to encode).
PALETTE = (
    (236, 236, 240),  # background
    (70, 110, 190),  # icon
    (252, 252, 252),  # text box
    (60, 60, 66),  # keyboard
    (120, 120, 128),  # key
    (20, 20, 20),  # ink
    (220, 30, 30),  # mark badge
    (255, 255, 255),  # mark digits
)
_BG, _ICON, _TEXT_BG, _KB_BG, _KEY, _INK, BADGE_INDEX, BADGE_INK_INDEX = range(len(PALETTE))


def new_raster(dims) -> Image.Image:
    img = Image.new("P", dims, _BG)
    img.putpalette([c for rgb in PALETTE for c in rgb])
    return img


@lru_cache(maxsize=1)
def _font():
    return ImageFont.load_default()


def render_png(dims, elements, header: str, text_buffer: Optional[str]) -> bytes:
    img = new_raster(dims)
    draw = ImageDraw.Draw(img)
    font = _font()
    draw.text((8, 8), header, fill=_INK, font=font)
    for el in elements:
        box = [el.bbox.x_min, el.bbox.y_min, el.bbox.x_max - 1, el.bbox.y_max - 1]
        if el.element_id == "kb_region":
            draw.rectangle(box, fill=_KB_BG)
            continue
        if el.element_id.startswith("kb_"):
            draw.rectangle(box, fill=_KEY, outline=_KB_BG, width=2)
        elif el.kind == "icon":
            draw.rectangle(box, fill=_ICON)
        else:
            draw.rectangle(box, fill=_TEXT_BG, outline=_INK)
        draw.text((el.bbox.x_min + 34, el.bbox.y_min + 8), el.label, fill=_INK, font=font)
    if text_buffer is not None:
        draw.text((8, 28), f"input: {text_buffer}", fill=_INK, font=font)
    buf = io.BytesIO()
    img.save(buf, format="PNG", compress_level=1)
    return buf.getvalue()


# -- environment --------------------------------------------------------------


class Environment:
    """Single-owner mutable phone state. Not safe to share across threads."""

    def __init__(self, pack: ScreenPack, blob_store: Optional[BlobStore] = None):
        self.pack = pack
        self.blob_store = blob_store
        self._render_cache: dict[tuple, tuple[str, bytes]] = {}
        self.reset("phone_home")

    @property
    def dims(self) -> tuple[int, int]:
        return self.pack.dims

    @property
    def screen(self) -> ScreenSpec:
        return self.pack.screens[self.screen_id]

    def reset(self, origin: str = "phone_home", app_id: Optional[str] = None) -> "Environment":
        if origin == "phone_home":
            target = self.pack.home
        elif origin == "app_home":
            if app_id not in self.pack.apps:
                raise ValueError(f"unknown app_id {app_id!r}")
            target = self.pack.apps[app_id]
        else:
            raise ValueError(f"unknown reset origin {origin!r}")
        self.screen_id = target
        self.variables = dict(self.pack.variables)
        self.step_index = 0
        self._clear_keyboard()
        return self

    def _clear_keyboard(self):
        self.text_buffer = ""
        self.layer = "letters"
        self.shift = False

    def state_key(self) -> tuple:
        kb = (self.text_buffer, self.layer, self.shift) if self.screen.keyboard_visible else ()
        return (self.screen_id, tuple(sorted(self.variables.items())), kb)

    def scene(self) -> tuple[GuiElement, ...]:
        els = list(self.screen.elements)
        if self.screen.keyboard_visible and self.pack.keyboard is not None:
            els.extend(self.pack.keyboard.key_elements(self.layer))
        return tuple(els)

    def _render(self) -> tuple[str, bytes]:
        kb_visible = self.screen.keyboard_visible
        key = (self.screen_id, self.layer if kb_visible else "", self.shift and kb_visible,
               self.text_buffer if kb_visible else None)
        hit = self._render_cache.get(key)
        if hit is None:
            header = f"{self.screen_id}{' [SHIFT]' if key[2] else ''}"
            png = render_png(self.dims, self.scene(), header, key[3])
            hit = (ref_for(png), png)
            self._render_cache[key] = hit
        if self.blob_store is not None:
            self.blob_store.put(hit[1])
        return hit

    def observe(self) -> ScreenObservation:
        ref, png = self._render()
        return ScreenObservation(self.step_index, ref, self.dims, self.scene(), png)

    def _check_trace(self, trace: TouchTrace):
        for s in trace.samples:
            if not in_screen((s.x, s.y), self.dims):
                raise InvalidTraceError(f"trace sample ({s.x}, {s.y}) outside screen {self.dims}")

    def dispatch_touch(self, trace: TouchTrace) -> TransitionResult:
        self._check_trace(trace)
        gesture = classify_gesture(trace, self.dims)
        before = self.state_key()
        from_screen = self.screen_id
        trigger = self._trigger_for(gesture)
        fired = None
        if trigger is not None:
            rule = self._match(trigger)
            if rule is not None:
                self._apply(rule)
                fired = str(trigger)
        self.step_index += 1
        return TransitionResult(
            changed=self.state_key() != before,
            from_screen=from_screen,
            to_screen=self.screen_id,
            gesture=gesture,
            trigger=fired,
        )

    def _trigger_for(self, g: Gesture) -> Optional[Trigger]:
        spec = self.screen
        if g.kind == "tap":
            if spec.keyboard_visible and self.pack.keyboard is not None:
                if self.pack.keyboard.region.contains(g.start):
                    return self._keyboard_tap(g.start)
            for el in reversed(spec.elements):
                if el.bbox.contains(g.start):
                    return Trigger("tap_on", el.element_id)
            return None
        if g.kind == "swipe":
            return Trigger("swipe", g.direction)
        if g.kind == "back_gesture":
            return Trigger("back_gesture") if spec.supports_edge_back_gesture else None
        if g.kind == "exit_gesture":
            return Trigger("exit_gesture") if spec.supports_bottom_exit_gesture else None
        return None

    def _keyboard_tap(self, p: Point) -> Optional[Trigger]:
        """Update the text buffer; only the return key yields a transition trigger."""
        for el in reversed(self.pack.keyboard.key_elements(self.layer)):
            if el.element_id == "kb_region" or not el.bbox.contains(p):
                continue
            name = el.element_id[3:]
            if name == "return":
                return Trigger("text_commit")
            if name == "shift":
                if self.layer == "letters":
                    self.shift = not self.shift
            elif name == "symbols":
                self.layer = "symbols" if self.layer == "letters" else "letters"
                self.shift = False
            elif name == "space":
                self.text_buffer += " "
            elif name == "backspace":
                self.text_buffer = self.text_buffer[:-1]
            else:
                ch = el.label
                if self.layer == "letters" and self.shift:
                    ch = ch.upper()
                    self.shift = False
                self.text_buffer += ch
            return None
        return None

    def _match(self, trigger: Trigger) -> Optional[TransitionRule]:
        hits = [
            r for r in self.screen.transitions
            if r.trigger == trigger and r.guard_holds(self.variables, self.text_buffer)
        ]
        if len(hits) > 1:
            raise PackError(f"non-deterministic transitions for {trigger} on {self.screen_id!r}")
        return hits[0] if hits else None

    def _apply(self, rule: TransitionRule):
        committed = self.text_buffer
        for name, value in rule.effects:
            self.variables[name] = committed if value == TEXT_VAR else value
        if rule.trigger.type == "text_commit" or rule.target != self.screen_id:
            self._clear_keyboard()
        logger.debug("transition %s -[%s]-> %s", self.screen_id, rule.trigger, rule.target)
        self.screen_id = rule.target
