"""Builders for small synthetic packs used across the tests."""

from armphone.arm import SimArm, identity_map
from armphone.device import Environment, parse_screen_pack
from armphone.geometry import BBox
from armphone.perception import IndexedBBox, MockGrounder


def minimal_pack(width=1080, height=2400, **extra):
    doc = {
        "pack_version": 1,
        "screen": {"width": width, "height": height},
        "home": "home",
        "screens": [{"screen_id": "home", "elements": []}],
    }
    doc.update(extra)
    return doc


def keyboard_doc(x0=54, pitch=108, y0=1480, row_gap=160, width=1080, height=2400):
    """Equal-pitch keyboard in the bundled layout style, parameterized."""
    rows = []
    offsets = (0, pitch / 2, pitch * 3 / 2)
    for i, (letters, symbols) in enumerate(
        (("qwertyuiop", "1234567890"), ("asdfghjkl", "-/:;()$&@"), ("zxcvbnm", ".,?!'\"#"))
    ):
        rows.append({"y": y0 + i * row_gap, "x0": x0 + offsets[i], "pitch": pitch,
                     "letters": letters, "symbols": symbols})
    top = y0 - 80
    y3 = y0 + 3 * row_gap
    return {
        "region": [0, top, width, y3 + 80],
        "key_height": row_gap - 20,
        "rows": rows,
        "special": {
            "shift": [0, y0 + 2 * row_gap - 70, x0 + pitch, y0 + 2 * row_gap + 70],
            "backspace": [width - pitch, y0 + 2 * row_gap - 70, width, y0 + 2 * row_gap + 70],
            "symbols": [0, y3 - 70, 2 * pitch, y3 + 70],
            "space": [2 * pitch + 10, y3 - 70, width - 2 * pitch - 10, y3 + 70],
            "return": [width - 2 * pitch, y3 - 70, width, y3 + 70],
        },
    }


def keyboard_env(**kw) -> Environment:
    width = kw.get("width", 1080)
    height = kw.get("height", 2400)
    doc = minimal_pack(width, height, keyboard=keyboard_doc(**kw))
    doc["screens"] = [{"screen_id": "home", "elements": [], "flags": {"keyboard_visible": True}}]
    return Environment(parse_screen_pack(doc))


def sim_arm(env, cmap=None):
    return SimArm(cmap or identity_map(bounds=(0, 0, env.dims[0], env.dims[1])), env)


def fallback_pack(with_icon):
    doc = minimal_pack()
    elements = [{"id": "back", "kind": "icon", "label": "back", "bbox": [20, 240, 140, 360]}]
    doc["screens"] = [
        {"screen_id": "home", "elements": [], "transitions": []},
        {"screen_id": "detail", "elements": elements if with_icon else [],
         "flags": {"supports_edge_back_gesture": False},
         "transitions": [{"trigger": {"type": "tap_on", "element": "back"}, "target": "home"}]
         if with_icon else []},
    ]
    env = Environment(parse_screen_pack(doc))
    env.screen_id = "detail"
    return env


class JsonServer:
    """Local HTTP server answering POSTs with ``reply(path, body) -> (status, json)``."""

    def __init__(self, reply):
        import http.server
        import json
        import threading

        outer = self
        self.requests = []

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                n = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(n) or b"null")
                outer.requests.append((self.path, dict(self.headers), body))
                status, doc = reply(self.path, body)
                data = doc if isinstance(doc, bytes) else json.dumps(doc).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}"
        self.thread = threading.Thread(target=self.httpd.serve_forever, args=(0.02,), daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


class ShiftedAnchors(MockGrounder):
    """Mock grounder that displaces chosen keys' boxes by a fixed offset."""

    def __init__(self, offsets):
        self.offsets = offsets

    def text_candidates(self, obs, query):
        out = []
        for c in super().text_candidates(obs, query):
            dx, dy = self.offsets.get(c.label, (0, 0))
            b = c.bbox
            out.append(IndexedBBox(c.index, BBox(b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy),
                                   c.kind, c.label))
        return out
