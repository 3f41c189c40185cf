"""Web-search gateway: provider abstraction, text extraction and caching."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol

from ..jsonio import canonical_hash, dumps
from .base import CacheMissError, GatewayError, TransportError
from .html import DEFAULT_DOC_CHAR_BUDGET, extract_text
from .mock import normalize_query
from .replay import KeyedLocks, _atomic_write

DEFAULT_SEARCH_TOP_K = 10


@dataclass(frozen=True)
class SearchResult:
    rank: int
    url: str
    title: str
    extracted_text: str
    fetched_at: str

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SearchResult":
        return cls(int(d["rank"]), d["url"], d["title"], d["extracted_text"], d["fetched_at"])


class SearchProvider(Protocol):
    name: str

    def fetch(self, query: str, top_k: int) -> list[dict]: ...


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def fixed_clock(stamp: str = "1970-01-01T00:00:00+00:00") -> Callable[[], str]:
    return lambda: stamp


class SearchClient:
    """Cached search front-end over a ``SearchProvider``.

    Results are keyed by ``(normalized query, top_k, provider name)`` and kept
    in memory; with ``cache_dir`` they are also persisted so later runs can
    replay them. ``offline=True`` turns a cache miss into ``CacheMissError``
    instead of calling the provider.
    """

    def __init__(
        self,
        provider: SearchProvider,
        top_k: int = DEFAULT_SEARCH_TOP_K,
        doc_char_budget: int = DEFAULT_DOC_CHAR_BUDGET,
        cache_dir: str | Path | None = None,
        offline: bool = False,
        clock: Callable[[], str] = utc_now,
    ):
        if offline and cache_dir is None:
            raise ValueError("offline search needs a cache_dir to replay from")
        self.provider = provider
        self.top_k = top_k
        self.doc_char_budget = doc_char_budget
        self.cache_dir = Path(cache_dir) / "search" if cache_dir else None
        self.offline = offline
        self.clock = clock
        self._memory: dict[str, list[dict]] = {}
        self._locks = KeyedLocks()
        self.provider_calls = 0

    def cache_key(self, query: str, top_k: int) -> str:
        return canonical_hash({"q": normalize_query(query), "k": top_k, "provider": self.provider.name})

    def search(self, query: str, top_k: int | None = None) -> list[SearchResult]:
        if not query or not query.strip():
            raise ValueError("search query is empty")
        k = top_k or self.top_k
        if k < 1:
            raise ValueError("top_k must be positive")
        key = self.cache_key(query, k)
        with self._locks(key):
            rows = self._lookup(key)
            if rows is None:
                if self.offline:
                    raise CacheMissError(key, what="search")
                rows = self._fetch(query.strip(), k)
                self._memory[key] = rows
                if self.cache_dir is not None:
                    _atomic_write(self._path(key), dumps({"query": normalize_query(query), "top_k": k,
                                                          "provider": self.provider.name,
                                                          "results": rows}) + "\n")
        return [SearchResult.from_dict(r) for r in rows]

    def _path(self, key: str) -> Path:
        return self.cache_dir / key[:2] / f"{key}.json"

    def _lookup(self, key: str) -> list[dict] | None:
        if key in self._memory:
            return self._memory[key]
        if self.cache_dir is not None and self._path(key).exists():
            rows = json.loads(self._path(key).read_text(encoding="utf-8"))["results"]
            self._memory[key] = rows
            return rows
        return None

    def _fetch(self, query: str, k: int) -> list[dict]:
        self.provider_calls += 1
        try:
            hits = self.provider.fetch(query, k)
        except GatewayError:
            raise
        except Exception as exc:
            raise TransportError(f"search provider {self.provider.name!r} failed: {exc}") from exc
        stamp = self.clock()
        return [
            SearchResult(
                rank=i,
                url=h.get("url", ""),
                title=extract_text(h.get("title", ""), None),
                extracted_text=extract_text(h.get("html_or_text", ""), self.doc_char_budget),
                fetched_at=stamp,
            ).to_dict()
            for i, h in enumerate(hits[:k], start=1)
        ]
