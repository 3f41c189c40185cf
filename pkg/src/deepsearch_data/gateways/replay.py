"""Content-addressed record/replay archive for chat backends.

Each exchange is stored as ``<cache_dir>/<namespace>/<fp[:2]>/<fp>.json``
where ``fp`` is the SHA-256 fingerprint of the full request. Replaying an
identical request returns the recorded response byte-for-byte.
"""

from __future__ import annotations

import json
import os
import threading
from collections import defaultdict
from pathlib import Path

from ..jsonio import dumps
from .base import CacheMissError, ChatRequest, ChatResponse

MODES = ("replay", "record")


class KeyedLocks:
    """One lock per key; gives at-most-one in-flight fetch per key."""

    def __init__(self):
        self._guard = threading.Lock()
        self._locks: dict[str, threading.Lock] = defaultdict(threading.Lock)

    def __call__(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks[key]


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class ReplayChatClient:
    """Chat client backed by an on-disk archive.

    In ``replay`` mode only the archive is consulted and a miss raises
    ``CacheMissError``. In ``record`` mode the archive acts as a read-through
    cache in front of ``inner``: hits are served from disk and misses are
    forwarded and then persisted.
    """

    def __init__(self, cache_dir: str | Path, inner=None, namespace: str = "chat", mode: str = "replay"):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if mode == "record" and inner is None:
            raise ValueError("record mode needs an inner backend")
        self.root = Path(cache_dir) / namespace
        self.inner = inner
        self.namespace = namespace
        self.mode = mode
        self._locks = KeyedLocks()
        self.hits = 0
        self.misses = 0

    def path_for(self, fingerprint: str) -> Path:
        return self.root / fingerprint[:2] / f"{fingerprint}.json"

    def complete(self, request: ChatRequest) -> ChatResponse:
        fp = request.fingerprint(self.namespace)
        path = self.path_for(fp)
        with self._locks(fp):
            if path.exists():
                self.hits += 1
                return ChatResponse.from_dict(json.loads(path.read_text(encoding="utf-8"))["response"])
            if self.mode == "replay":
                raise CacheMissError(fp)
            self.misses += 1
            response = self.inner.complete(request)
            _atomic_write(path, dumps({"request": request.to_dict(), "response": response.to_dict()}) + "\n")
            return response
