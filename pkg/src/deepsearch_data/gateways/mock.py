"""Deterministic in-process backends for tests, demos and ``--mock`` runs."""

from __future__ import annotations

import re
import threading
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from ..jsonio import iter_jsonl
from .base import ChatRequest, ChatResponse, TransportError

_TOKEN = re.compile(r"\S+")


def count_ws_tokens(text: str) -> int:
    return len(text.split())


def apply_stop_and_limit(text: str, request: ChatRequest) -> ChatResponse:
    """Emulate server-side stop-sequence and max-token truncation."""
    cut, finish = len(text), "end"
    for stop in request.stop_sequences:
        idx = text.find(stop)
        if stop and idx != -1 and idx < cut:
            cut, finish = idx, "stop_sequence"
    text = text[:cut]
    tokens = list(_TOKEN.finditer(text))
    if len(tokens) > request.max_tokens:
        text = text[: tokens[request.max_tokens - 1].end()]
        finish = "length"
    prompt_tokens = sum(count_ws_tokens(m.content) for m in request.messages)
    return ChatResponse(text, finish, (prompt_tokens, count_ws_tokens(text)))


class ScriptedChat:
    """Chat backend driven by a script.

    ``script`` is either a callable ``request -> str`` or a sequence of
    strings returned in call order (the last one repeats once exhausted).
    Stop sequences and ``max_tokens`` are honoured the way a real server
    would, so protocol code sees realistic ``finish_reason`` values.
    """

    def __init__(self, script: Callable[[ChatRequest], str] | Sequence[str]):
        self._script = script
        self._lock = threading.Lock()
        self.calls = 0
        self.requests: list[ChatRequest] = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            idx = self.calls
            self.calls += 1
            self.requests.append(request)
        if callable(self._script):
            text = self._script(request)
        else:
            text = self._script[min(idx, len(self._script) - 1)]
        return apply_stop_and_limit(text, request)


def echo_chat() -> ScriptedChat:
    """Mock that returns the last message verbatim."""
    return ScriptedChat(lambda req: req.messages[-1].content)


class FaultInjectingChat:
    """Wraps a backend and raises ``TransportError`` on chosen call numbers (1-based)."""

    def __init__(self, inner, fail_on: Iterable[int]):
        self.inner = inner
        self.fail_on = set(fail_on)
        self._lock = threading.Lock()
        self.calls = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
            n = self.calls
        if n in self.fail_on:
            raise TransportError(f"injected failure on call #{n}")
        return self.inner.complete(request)


def normalize_query(query: str) -> str:
    return " ".join(query.lower().split())


class FixtureSearchProvider:
    """Search provider answering from a fixed query -> results table.

    Fixture rows look like ``{"query": str, "results": [{"url", "title",
    "html_or_text"}]}``; lookups use the lowercased, whitespace-collapsed
    query. Unknown queries fall back to ``default`` (empty by default).
    """

    name = "fixture"

    def __init__(
        self,
        table: Mapping[str, list[dict]] | None = None,
        default: Callable[[str], list[dict]] | None = None,
    ):
        self.table = {normalize_query(k): list(v) for k, v in (table or {}).items()}
        self.default = default
        self._lock = threading.Lock()
        self.calls = 0

    @classmethod
    def from_jsonl(cls, path: str | Path, **kwargs) -> "FixtureSearchProvider":
        table = {}
        for lineno, row in iter_jsonl(path):
            if "query" not in row or not isinstance(row.get("results"), list):
                raise ValueError(f"line {lineno}: search fixture rows need 'query' and 'results'")
            table[row["query"]] = row["results"]
        return cls(table, **kwargs)

    def fetch(self, query: str, top_k: int) -> list[dict]:
        with self._lock:
            self.calls += 1
        key = normalize_query(query)
        if key in self.table:
            hits = self.table[key]
        elif self.default is not None:
            hits = self.default(query)
        else:
            hits = []
        return [dict(h) for h in hits[:top_k]]
