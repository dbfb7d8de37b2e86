"""Anchor-based keyboard localization and text-to-tap planning.

Only the first two keys of each row are grounded; the row pitch is their
horizontal distance and every other key in the row is extrapolated along
the row at constant height. Localization runs once per device and the
result is cached (optionally on disk).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from armphone.actionspace import ActionSpec
from armphone.errors import KeyboardError
from armphone.geometry import BBox, center_of

# Standard international (QWERTY) layout. Symbols share the letter grid.
LETTER_ROWS = ("qwertyuiop", "asdfghjkl", "zxcvbnm")
SYMBOL_ROWS = ("1234567890", "-/:;()$&@", ".,?!'\"#")
SPECIAL_LABELS = {
    "shift": "shift",
    "symbols": "?123",
    "space": "space",
    "backspace": "backspace",
    "return": "return",
}
BACKSPACE_CHAR = "\b"
LAYOUT_VERSION = 1
PITCH_TOLERANCE_PX = 1.0

Center = tuple[float, float]


@dataclass(frozen=True)
class KeyRow:
    row_y: float
    keys: tuple[tuple[str, Center], ...]


@dataclass(frozen=True)
class KeyboardLayout:
    device_id: str
    rows: tuple[KeyRow, ...]
    symbol_rows: tuple[KeyRow, ...]
    layer_switch_keys: dict  # shift/symbols/return/space/backspace -> center
    crop_region: BBox

    def __post_init__(self):
        homes: dict[str, int] = {}
        for row in self.rows + self.symbol_rows:
            xs = [c[0] for _, c in row.keys]
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise KeyboardError("key x-centers must be strictly increasing within a row")
            gaps = [b - a for a, b in zip(xs, xs[1:])]
            if gaps and max(gaps) - min(gaps) > 2 * PITCH_TOLERANCE_PX:
                raise KeyboardError("keys within a row must share a constant pitch")
            for sym, _ in row.keys:
                homes[sym] = homes.get(sym, 0) + 1
        dup = sorted(s for s, n in homes.items() if n > 1)
        if dup:
            raise KeyboardError(f"symbols with more than one home: {dup}")
        missing = set(SPECIAL_LABELS) - set(self.layer_switch_keys)
        if missing:
            raise KeyboardError(f"layout lacks keys {sorted(missing)}")

    def letter_centers(self) -> dict[str, Center]:
        return {s: c for row in self.rows for s, c in row.keys}

    def symbol_centers(self) -> dict[str, Center]:
        return {s: c for row in self.symbol_rows for s, c in row.keys}

    def to_json(self) -> dict:
        def rows(rs):
            return [{"row_y": r.row_y, "keys": [[s, list(c)] for s, c in r.keys]} for r in rs]

        return {
            "layout_version": LAYOUT_VERSION,
            "device_id": self.device_id,
            "rows": rows(self.rows),
            "symbol_rows": rows(self.symbol_rows),
            "layer_switch_keys": {k: list(v) for k, v in sorted(self.layer_switch_keys.items())},
            "crop_region": self.crop_region.as_list(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "KeyboardLayout":
        if doc.get("layout_version") != LAYOUT_VERSION:
            raise KeyboardError(f"unsupported layout_version {doc.get('layout_version')!r}")

        def rows(rs):
            return tuple(
                KeyRow(r["row_y"], tuple((s, tuple(c)) for s, c in r["keys"])) for r in rs
            )

        return cls(
            device_id=doc["device_id"],
            rows=rows(doc["rows"]),
            symbol_rows=rows(doc["symbol_rows"]),
            layer_switch_keys={k: tuple(v) for k, v in doc["layer_switch_keys"].items()},
            crop_region=BBox.from_seq(doc["crop_region"]),
        )


def _exact_in_region(grounder, obs, label: str, region: BBox):
    for cand in grounder.text_candidates(obs, label):
        if (cand.label or "").lower() == label.lower() and region.contains(center_of(cand.bbox)):
            return cand
    return None


def localize_keyboard(obs, grounder, device_id: str = "default") -> KeyboardLayout:
    """Locate every key from the keyboard region and two anchors per row."""
    regions = grounder.ground_icons(obs, "keyboard")
    if not regions:
        raise KeyboardError("keyboard region not found")
    region = max(regions, key=lambda r: r.bbox.width * r.bbox.height).bbox

    rows, symbol_rows = [], []
    for letters, symbols in zip(LETTER_ROWS, SYMBOL_ROWS):
        anchors = []
        for ch in letters[:2]:
            cand = _exact_in_region(grounder, obs, ch, region)
            if cand is None:
                raise KeyboardError(f"anchor key {ch!r} not found")
            anchors.append(center_of(cand.bbox))
        (x1, row_y), (x2, _) = anchors
        pitch = x2 - x1
        if pitch <= 0:
            raise KeyboardError(f"non-positive key pitch {pitch} from anchors {anchors}")
        centers = [(x1 + k * pitch, row_y) for k in range(len(letters))]
        rows.append(KeyRow(row_y, tuple(zip(letters, centers))))
        symbol_rows.append(KeyRow(row_y, tuple(zip(symbols, centers))))

    special = {}
    for name, label in SPECIAL_LABELS.items():
        cand = _exact_in_region(grounder, obs, label, region)
        if cand is None:
            raise KeyboardError(f"{name} key not found")
        special[name] = center_of(cand.bbox)
    return KeyboardLayout(device_id, tuple(rows), tuple(symbol_rows), special, region)


class LayoutCache:
    """Per-device layout cache so localization happens once per device."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._mem: dict[str, KeyboardLayout] = {}

    def _path(self, device_id: str) -> Optional[Path]:
        return self.directory / f"keyboard_{device_id}.json" if self.directory else None

    def get(self, device_id: str) -> Optional[KeyboardLayout]:
        if device_id in self._mem:
            return self._mem[device_id]
        path = self._path(device_id)
        if path is not None and path.exists():
            layout = KeyboardLayout.from_json(json.loads(path.read_text(encoding="utf-8")))
            self._mem[device_id] = layout
            return layout
        return None

    def put(self, layout: KeyboardLayout) -> None:
        self._mem[layout.device_id] = layout
        path = self._path(layout.device_id)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(layout.to_json(), indent=2) + "\n", encoding="utf-8")

    def get_or_localize(self, obs, grounder, device_id: str) -> KeyboardLayout:
        layout = self.get(device_id)
        if layout is None:
            layout = localize_keyboard(obs, grounder, device_id)
            self.put(layout)
        return layout


def plan_text_input(text: str, layout: KeyboardLayout) -> list[ActionSpec]:
    """Taps that type ``text``, starting and ending on the letters layer.

    Uppercase letters use a momentary shift; each digit or symbol switches to
    the symbols layer, taps the key and switches back.
    """
    letters = layout.letter_centers()
    symbols = layout.symbol_centers()
    keys = layout.layer_switch_keys
    taps: list[Center] = []
    for i, ch in enumerate(text):
        if ch == " ":
            taps.append(keys["space"])
        elif ch == BACKSPACE_CHAR:
            taps.append(keys["backspace"])
        elif ch in letters:
            taps.append(letters[ch])
        elif ch.isupper() and ch.lower() in letters:
            taps += [keys["shift"], letters[ch.lower()]]
        elif ch in symbols:
            taps += [keys["symbols"], symbols[ch], keys["symbols"]]
        else:
            raise KeyboardError(f"unreachable character {ch!r} at index {i}")
    return [ActionSpec.tap(x, y) for x, y in taps]
