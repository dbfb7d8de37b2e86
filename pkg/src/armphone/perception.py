"""Visual grounding: text boxes, indexed icon candidates and set-of-mark overlays.

:class:`MockGrounder` answers from the simulator's scene graph, which keeps
agent and engine tests independent of OCR quality. :class:`RemoteGrounder`
forwards the same queries to an HTTP perception service.
"""

from __future__ import annotations

import base64
import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence

import httpx
from PIL import Image, ImageDraw

from armphone.blobs import BlobStore, ref_for
from armphone.device import BADGE_INDEX, BADGE_INK_INDEX, PALETTE, ScreenObservation
from armphone.errors import GroundingServiceError
from armphone.geometry import BBox

BADGE_COLOR = PALETTE[BADGE_INDEX]
BADGE_SIZE = 28


@dataclass(frozen=True)
class GroundingQuery:
    kind: str  # "text" | "icon"
    query: str = ""

    def __post_init__(self):
        if self.kind not in ("text", "icon"):
            raise ValueError(f"query kind must be text or icon, got {self.kind!r}")
        if self.kind == "text" and not self.query:
            raise ValueError("text grounding needs a non-empty query")


@dataclass(frozen=True)
class IndexedBBox:
    index: int
    bbox: BBox
    kind: str
    label: Optional[str] = None

    def to_json(self) -> dict:
        return {"index": self.index, "bbox": self.bbox.as_list(), "kind": self.kind,
                "label": self.label}


@dataclass(frozen=True)
class MarkedImage:
    raster_ref: str
    marks: tuple[IndexedBBox, ...]
    png: bytes = field(default=b"", compare=False, repr=False)


def index_row_major(items: Iterable[tuple[BBox, str, Optional[str]]]) -> list[IndexedBBox]:
    """Number boxes 1..n top-to-bottom, then left-to-right by top-left corner."""
    ordered = sorted(items, key=lambda it: (it[0].y_min, it[0].x_min, it[1], it[2] or ""))
    return [IndexedBBox(i, box, kind, label) for i, (box, kind, label) in enumerate(ordered, 1)]


class Grounder(Protocol):
    def text_candidates(self, obs: ScreenObservation, query: str) -> list[IndexedBBox]: ...

    def ground_icons(self, obs: ScreenObservation, query: str = "") -> list[IndexedBBox]: ...

    def detect_text(self, obs: ScreenObservation) -> list[IndexedBBox]: ...


class GrounderMixin:
    def ground_text(self, obs: ScreenObservation, query: str) -> list[BBox]:
        return [c.bbox for c in self.text_candidates(obs, query)]

    def detect_icons(self, obs: ScreenObservation) -> list[IndexedBBox]:
        return self.ground_icons(obs, "")

    def ground(self, obs: ScreenObservation, q: GroundingQuery) -> list[IndexedBBox]:
        if q.kind == "text":
            return self.text_candidates(obs, q.query)
        return self.ground_icons(obs, q.query)


class MockGrounder(GrounderMixin):
    """Reads the sim scene graph; case-insensitive substring match on labels."""

    def _scene(self, obs: ScreenObservation):
        if obs.scene is None:
            raise ValueError("mock grounding needs a sim observation with a scene graph")
        return obs.scene

    def text_candidates(self, obs: ScreenObservation, query: str) -> list[IndexedBBox]:
        GroundingQuery("text", query)
        q = query.lower()
        hits = [(e.bbox, "text", e.label) for e in self._scene(obs)
                if e.kind == "text" and q in e.label.lower()]
        return index_row_major(hits)

    def ground_icons(self, obs: ScreenObservation, query: str = "") -> list[IndexedBBox]:
        q = query.lower()
        hits = [(e.bbox, "icon", e.label) for e in self._scene(obs)
                if e.kind == "icon" and q in e.label.lower()]
        return index_row_major(hits)

    def detect_text(self, obs: ScreenObservation) -> list[IndexedBBox]:
        return index_row_major((e.bbox, "text", e.label) for e in self._scene(obs) if e.kind == "text")


class RemoteGrounder(GrounderMixin):
    """Client for an HTTP grounding service.

    ``POST {base_url}/ground`` with ``{"image", "image_png_b64", "kind", "query"}``;
    the service answers with a list of ``{"bbox", "label", "score"}`` (optionally
    wrapped as ``{"results": [...]}``). An empty list is a valid answer.
    """

    def __init__(self, base_url: str, token: Optional[str] = None, timeout: float = 30.0,
                 blob_store: Optional[BlobStore] = None, transport=None):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self.blob_store = blob_store
        self._transport = transport
        self._http: Optional[httpx.Client] = None

    @classmethod
    def from_env(cls, **kwargs) -> "RemoteGrounder":
        url = os.environ.get("ARMPHONE_GROUNDING_URL")
        if not url:
            raise GroundingServiceError("ARMPHONE_GROUNDING_URL is not set")
        return cls(url, os.environ.get("ARMPHONE_GROUNDING_TOKEN"),
                   float(os.environ.get("ARMPHONE_GROUNDING_TIMEOUT", "30")), **kwargs)

    def _image_b64(self, obs: ScreenObservation) -> Optional[str]:
        data = obs.png
        if not data and self.blob_store is not None and self.blob_store.has(obs.raster_ref):
            data = self.blob_store.get(obs.raster_ref)
        return base64.b64encode(data).decode("ascii") if data else None

    def _post(self, obs: ScreenObservation, kind: str, query: str) -> list[IndexedBBox]:
        headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
        payload = {"image": obs.raster_ref, "image_png_b64": self._image_b64(obs),
                   "kind": kind, "query": query}
        try:
            if self._http is None:
                self._http = httpx.Client(timeout=self.timeout, transport=self._transport)
            resp = self._http.post(f"{self.base_url}/ground", json=payload, headers=headers)
            resp.raise_for_status()
            body = resp.json()
        except (httpx.HTTPError, ValueError) as exc:
            raise GroundingServiceError(f"grounding service failed: {exc}") from exc
        results = body.get("results", []) if isinstance(body, dict) else body
        items = []
        try:
            for r in results:
                items.append((BBox.from_seq(r["bbox"]), kind, r.get("label")))
        except (KeyError, TypeError, ValueError) as exc:
            raise GroundingServiceError(f"malformed grounding response: {exc}") from exc
        return index_row_major(items)

    def text_candidates(self, obs, query):
        GroundingQuery("text", query)
        return self._post(obs, "text", query)

    def ground_icons(self, obs, query=""):
        return self._post(obs, "icon", query)

    def detect_text(self, obs):
        return self._post(obs, "text", "")


def perceive(obs: ScreenObservation, grounder) -> list[IndexedBBox]:
    """Every icon and text box on screen, indexed together in row-major order."""
    items = [(d.bbox, d.kind, d.label) for d in grounder.detect_icons(obs)]
    items += [(d.bbox, d.kind, d.label) for d in grounder.detect_text(obs)]
    return index_row_major(items)


def annotate_marks(obs: ScreenObservation, detections: Sequence[IndexedBBox],
                   blob_store: Optional[BlobStore] = None) -> MarkedImage:
    """Draw an index badge at each box's top-left corner."""
    w, h = obs.dims
    for d in detections:
        if not d.bbox.within(w, h):
            raise ValueError(f"mark {d.index} bbox outside image bounds")
    if not detections:
        return MarkedImage(obs.raster_ref, (), obs.png)
    data = obs.png or (blob_store.get(obs.raster_ref) if blob_store else b"")
    if not data:
        raise ValueError("observation carries no raster to annotate")
    img = Image.open(io.BytesIO(data))
    if img.mode != "P":
        img = img.convert("RGB")
    draw = ImageDraw.Draw(img)
    if img.mode == "P":
        badge, ink = BADGE_INDEX, BADGE_INK_INDEX
    else:
        badge, ink = BADGE_COLOR, PALETTE[BADGE_INK_INDEX]
    for d in detections:
        x0 = min(int(d.bbox.x_min), w - BADGE_SIZE)
        y0 = min(int(d.bbox.y_min), h - BADGE_SIZE)
        draw.rectangle([x0, y0, x0 + BADGE_SIZE - 1, y0 + BADGE_SIZE - 1], fill=badge)
        draw.text((x0 + 4, y0 + 8), str(d.index), fill=ink)
    buf = io.BytesIO()
    img.save(buf, format="PNG", compress_level=1)
    png = buf.getvalue()
    ref = ref_for(png)
    if blob_store is not None:
        blob_store.put(png)
    return MarkedImage(ref, tuple(detections), png)
