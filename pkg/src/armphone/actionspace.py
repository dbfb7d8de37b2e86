"""The closed, discretized action space: Tap, Swipe, Text, Back, Exit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from armphone.errors import DecisionError, UnknownActionError
from armphone.geometry import fmt_num, in_screen

ACTION_TYPES = ("tap", "swipe", "text", "back", "exit")
DIRECTIONS = ("up", "down", "left", "right")
DISTANCES = ("short", "medium", "long")


@dataclass(frozen=True)
class ActionSpec:
    type: str
    x: Optional[float] = None
    y: Optional[float] = None
    direction: Optional[str] = None
    distance: Optional[str] = None
    text: Optional[str] = None

    def __post_init__(self):
        if self.type not in ACTION_TYPES:
            raise UnknownActionError(f"unknown action type {self.type!r}")
        if self.type in ("tap", "swipe") and (self.x is None or self.y is None):
            raise DecisionError(f"{self.type} needs x and y")
        if self.type == "swipe":
            if self.direction not in DIRECTIONS:
                raise DecisionError(f"swipe direction must be one of {DIRECTIONS}")
            if self.distance not in DISTANCES:
                raise DecisionError(f"swipe distance must be one of {DISTANCES}")
        if self.type == "text" and not self.text:
            raise DecisionError("text action needs non-empty text")

    @classmethod
    def tap(cls, x, y) -> "ActionSpec":
        return cls("tap", x, y)

    @classmethod
    def swipe(cls, x, y, direction: str, distance: str) -> "ActionSpec":
        return cls("swipe", x, y, direction, distance)

    @classmethod
    def type_text(cls, text: str) -> "ActionSpec":
        return cls("text", text=text)

    @classmethod
    def back(cls) -> "ActionSpec":
        return cls("back")

    @classmethod
    def exit(cls) -> "ActionSpec":
        return cls("exit")

    def check_bounds(self, dims: tuple[int, int]) -> None:
        if self.type in ("tap", "swipe") and not in_screen((self.x, self.y), dims):
            raise DecisionError(f"{self.type} at ({self.x}, {self.y}) outside screen {dims}")

    def to_json(self) -> dict:
        params: dict = {}
        if self.type in ("tap", "swipe"):
            params = {"x": self.x, "y": self.y}
        if self.type == "swipe":
            params.update(direction=self.direction, distance=self.distance)
        if self.type == "text":
            params = {"text": self.text}
        return {"type": self.type, "params": params}

    @classmethod
    def from_json(cls, doc: dict) -> "ActionSpec":
        if not isinstance(doc, dict) or "type" not in doc:
            raise DecisionError("action must be an object with a 'type'")
        kind = str(doc["type"]).lower()
        if kind not in ACTION_TYPES:
            raise UnknownActionError(f"unknown action type {doc['type']!r}")
        p = doc.get("params") or {}
        if not isinstance(p, dict):
            raise DecisionError("action params must be an object")
        try:
            if kind == "tap":
                return cls.tap(_num(p["x"]), _num(p["y"]))
            if kind == "swipe":
                return cls.swipe(_num(p["x"]), _num(p["y"]), p.get("direction"), p.get("distance"))
            if kind == "text":
                return cls.type_text(p.get("text"))
        except KeyError as exc:
            raise DecisionError(f"{kind} missing parameter {exc.args[0]!r}") from None
        return cls(kind)

    def __str__(self) -> str:
        if self.type == "tap":
            return f"Tap({fmt_num(self.x)}, {fmt_num(self.y)})"
        if self.type == "swipe":
            return f"Swipe({fmt_num(self.x)}, {fmt_num(self.y)}, {self.direction}, {self.distance})"
        if self.type == "text":
            return f"Text({self.text!r})"
        return self.type.capitalize()


def _num(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DecisionError(f"coordinate must be a number, got {v!r}")
    return v
