"""Policy clients: remote chat-completion service, scripted oracle, random baseline."""

from __future__ import annotations

import base64
import json
import math
import os
import zlib
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import httpx
import numpy as np

from armphone.actionspace import DIRECTIONS, DISTANCES
from armphone.errors import PolicyServiceError
from armphone.geometry import BBox, center_of


@dataclass(frozen=True)
class PolicyReply:
    text: str
    logprobs: Optional[tuple[float, float]] = None  # (thought, env action)


class PolicyClient(Protocol):
    def complete(self, bundle, repair_note: Optional[str] = None) -> PolicyReply: ...


class ScriptedPolicy:
    """Replays a golden trajectory, declaring done on its final action."""

    def __init__(self, golden: Sequence):
        self.golden = list(golden)

    def complete(self, bundle, repair_note=None) -> PolicyReply:
        done_so_far = sum(1 for s in bundle.prior_steps if not s.get("corrective"))
        n = len(self.golden)
        if done_so_far >= n:
            body = {"observation": "Task already complete.", "thought": "Nothing left to do.",
                    "status": "done"}
            return PolicyReply(json.dumps(body), (0.0, 0.0))
        step = self.golden[done_so_far]
        body = {
            "observation": f"{len(bundle.marks)} marked elements on screen.",
            "thought": f"Follow golden step {done_so_far + 1} of {n}.",
            "action": step.action.to_json(),
            "expected_outcome": "",
            "status": "done" if done_so_far + 1 == n else "continue",
        }
        if step.description:
            body["action_description"] = step.description
        return PolicyReply(json.dumps(body), (0.0, 0.0))


class RandomPolicy:
    """Uniform random baseline; deterministic given (seed, salt, step)."""

    P_DONE = 0.1
    WORDS = ("hello", "note", "test", "news", "Hi 2")
    GRID = 10

    def __init__(self, seed: int = 0, salt: str = ""):
        self.seed = seed
        self.salt = zlib.crc32(salt.encode("utf-8"))

    def _target(self, rng, bundle) -> tuple[tuple[int, int], float]:
        if bundle.marks:
            m = bundle.marks[int(rng.integers(len(bundle.marks)))]
            return center_of(BBox.from_seq(m["bbox"])), -math.log(len(bundle.marks))
        w, h = bundle.dims
        gx, gy = rng.integers(self.GRID, size=2)
        p = (int((gx + 0.5) * w / self.GRID), int((gy + 0.5) * h / self.GRID))
        return p, -2 * math.log(self.GRID)

    def complete(self, bundle, repair_note=None) -> PolicyReply:
        rng = np.random.default_rng([self.seed, self.salt, bundle.step])
        p_action = (1 - self.P_DONE) / 5
        if rng.random() < self.P_DONE:
            body = {"observation": "", "thought": "Stop here.", "status": "done"}
            return PolicyReply(json.dumps(body), (0.0, math.log(self.P_DONE)))
        kind = ("tap", "swipe", "text", "back", "exit")[int(rng.integers(5))]
        lp = math.log(p_action)
        if kind == "tap":
            (x, y), lp_t = self._target(rng, bundle)
            action, lp = {"type": "tap", "params": {"x": x, "y": y}}, lp + lp_t
        elif kind == "swipe":
            (x, y), lp_t = self._target(rng, bundle)
            d = DIRECTIONS[int(rng.integers(4))]
            dist = DISTANCES[int(rng.integers(3))]
            action = {"type": "swipe", "params": {"x": x, "y": y, "direction": d, "distance": dist}}
            lp += lp_t - math.log(12)
        elif kind == "text":
            word = self.WORDS[int(rng.integers(len(self.WORDS)))]
            action, lp = {"type": "text", "params": {"text": word}}, lp - math.log(len(self.WORDS))
        else:
            action = {"type": kind, "params": {}}
        body = {"observation": f"{len(bundle.marks)} marked elements on screen.",
                "thought": "Pick an action at random.", "action": action,
                "expected_outcome": "", "status": "continue"}
        return PolicyReply(json.dumps(body), (0.0, lp))


class RemotePolicy:
    """Chat-completion client (``POST {base_url}/chat/completions``)."""

    def __init__(self, base_url: str, model: str, api_key: Optional[str] = None,
                 temperature: float = 0.0, timeout: float = 60.0, blob_store=None, transport=None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.temperature = temperature
        self.timeout = timeout
        self.blob_store = blob_store
        self._transport = transport
        self._http: Optional[httpx.Client] = None

    @classmethod
    def from_env(cls, **kwargs) -> "RemotePolicy":
        url = os.environ.get("ARMPHONE_POLICY_URL")
        model = os.environ.get("ARMPHONE_POLICY_MODEL")
        if not url or not model:
            raise PolicyServiceError("ARMPHONE_POLICY_URL and ARMPHONE_POLICY_MODEL must be set")
        return cls(url, model, os.environ.get("ARMPHONE_POLICY_KEY"), **kwargs)

    def _image_url(self, bundle) -> Optional[str]:
        data = bundle.image_png
        if not data and self.blob_store is not None and self.blob_store.has(bundle.image_ref):
            data = self.blob_store.get(bundle.image_ref)
        if not data:
            return None
        data = base64.b64encode(data).decode("ascii")
        return f"data:image/png;base64,{data}"

    def complete(self, bundle, repair_note=None) -> PolicyReply:
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": bundle.messages(self._image_url(bundle), repair_note),
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            if self._http is None:
                self._http = httpx.Client(timeout=self.timeout, transport=self._transport)
            resp = self._http.post(f"{self.base_url}/chat/completions", json=payload, headers=headers)
            resp.raise_for_status()
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (httpx.HTTPError, ValueError, KeyError, IndexError, TypeError) as exc:
            raise PolicyServiceError(f"policy service failed: {exc}") from exc
        if not isinstance(text, str):
            raise PolicyServiceError("policy service returned non-text content")
        return PolicyReply(text)
