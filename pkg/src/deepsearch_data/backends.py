"""Wires the per-role LLM clients and the search client for a run mode."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from . import mocks
from .config import ConfigError, PipelineConfig
from .gateways import (
    FixtureSearchProvider,
    HttpChatClient,
    HttpSearchProvider,
    ReplayChatClient,
    RetryingSession,
    SearchClient,
    fixed_clock,
)
from .gateways.search import utc_now

MODES = ("mock", "replay", "live")
ROLES = ("reasoner", "summarizer", "annotator", "judge")
ARCHIVE_META = "archive.json"
# bundled 20-question corpus, search table and a recorded replay archive
FIXTURE20 = Path(__file__).parent / "data" / "fixture20"


@dataclass
class Backends:
    reasoner: object
    summarizer: object
    annotator: object
    judge: object
    searcher: SearchClient
    mode: str


class _ReplayOnlyProvider:
    def __init__(self, name: str):
        self.name = name

    def fetch(self, query, top_k):  # pragma: no cover - offline client never calls it
        raise RuntimeError("replay provider cannot fetch")


def _write_archive_meta(root: Path, provider_name: str) -> None:
    root.mkdir(parents=True, exist_ok=True)
    meta = root / ARCHIVE_META
    if not meta.exists():
        meta.write_text(json.dumps({"search_provider": provider_name}) + "\n", encoding="utf-8")


def build_backends(cfg: PipelineConfig, mode: str, replay_dir: str | None = None,
                   record_dir: str | None = None) -> Backends:
    """Create clients for ``mode``.

    ``mock`` uses the heuristic role players from ``mocks`` and a fixture (or
    synthetic) search provider; ``live`` talks HTTP and records every
    exchange into the cache dir; ``replay`` serves only from an archive.
    ``record_dir`` additionally records a mock run so it can be replayed.
    """
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}")
    gw = cfg.gateway
    loop = cfg.loop

    if mode == "replay":
        if not replay_dir:
            raise ConfigError("replay", "replay mode needs an archive directory")
        root = Path(replay_dir)
        if not (root / ARCHIVE_META).exists():
            raise ConfigError("replay", f"{root} is not a replay archive (no {ARCHIVE_META})")
        provider_name = json.loads((root / ARCHIVE_META).read_text())["search_provider"]
        chats = {r: ReplayChatClient(root, namespace=r, mode="replay") for r in ROLES}
        searcher = SearchClient(_ReplayOnlyProvider(provider_name), loop.search_top_k, loop.doc_char_budget,
                                cache_dir=root, offline=True)
        return Backends(**chats, searcher=searcher, mode=mode)

    if mode == "mock":
        chats = {"reasoner": mocks.mock_reasoner(), "summarizer": mocks.mock_summarizer(),
                 "annotator": mocks.mock_annotator(), "judge": mocks.mock_judge()}
        fixture = cfg.paths.search_fixture
        if fixture:
            if not Path(fixture).exists():
                raise ConfigError("paths.search_fixture", f"{fixture} does not exist")
            provider = FixtureSearchProvider.from_jsonl(fixture, default=mocks.synthetic_hits)
        else:
            provider = FixtureSearchProvider(default=mocks.synthetic_hits)
        clock = fixed_clock()
        archive = record_dir
    else:
        if not gw.chat_endpoint:
            raise ConfigError("gateway.chat_endpoint", "live mode needs a chat endpoint")
        if not gw.search_endpoint:
            raise ConfigError("gateway.search_endpoint", "live mode needs a search endpoint")
        http = RetryingSession(gw.retries, gw.backoff_seconds)
        key = os.environ.get(gw.chat_api_key_env)
        models = {"reasoner": gw.reasoner_model, "summarizer": gw.summarizer_model,
                  "annotator": gw.annotator_model, "judge": gw.judge_model}
        chats = {r: HttpChatClient(gw.chat_endpoint, models[r], key, http) for r in ROLES}
        provider = HttpSearchProvider(gw.search_endpoint, os.environ.get(gw.search_api_key_env),
                                      name=gw.search_provider, fetch_pages=gw.fetch_pages,
                                      http=RetryingSession(gw.retries, gw.backoff_seconds, timeout=30.0))
        clock = utc_now
        archive = record_dir or cfg.paths.cache_dir

    if archive:
        _write_archive_meta(Path(archive), provider.name)
        chats = {r: ReplayChatClient(archive, inner=c, namespace=r, mode="record") for r, c in chats.items()}
    searcher = SearchClient(provider, loop.search_top_k, loop.doc_char_budget, cache_dir=archive, clock=clock)
    return Backends(**chats, searcher=searcher, mode=mode)
