"""Content-addressed blob directory (``blobs/sha256/<first2>/<hex>``)."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

PREFIX = "sha256:"


def ref_for(data: bytes) -> str:
    return PREFIX + hashlib.sha256(data).hexdigest()


class BlobStore:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def path_for(self, ref: str) -> Path:
        if not ref.startswith(PREFIX):
            raise ValueError(f"not a sha256 reference: {ref!r}")
        hexd = ref[len(PREFIX):]
        if len(hexd) != 64:
            raise ValueError(f"malformed digest in {ref!r}")
        return self.root / "sha256" / hexd[:2] / hexd

    def put(self, data: bytes) -> str:
        ref = ref_for(data)
        path = self.path_for(ref)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            os.replace(tmp, path)
        return ref

    def get(self, ref: str) -> bytes:
        return self.path_for(ref).read_bytes()

    def has(self, ref: str) -> bool:
        try:
            return self.path_for(ref).is_file()
        except ValueError:
            return False
