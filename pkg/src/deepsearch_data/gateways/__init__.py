"""External-service clients: chat completion and web search.

Each service has a live HTTP backend, a record/replay archive and a scripted
mock, all behind the same duck-typed surface (``complete`` / ``search``).
"""

from .base import (
    CacheMissError,
    ChatRequest,
    ChatResponse,
    GatewayError,
    LlmClient,
    Message,
    TransportError,
    user_request,
)
from .html import DEFAULT_DOC_CHAR_BUDGET, extract_text
from .http import HttpChatClient, HttpSearchProvider, RetryingSession
from .mock import FaultInjectingChat, FixtureSearchProvider, ScriptedChat, echo_chat, normalize_query
from .replay import ReplayChatClient
from .search import SearchClient, SearchResult, fixed_clock


def chat_complete(client, request: ChatRequest) -> ChatResponse:
    return client.complete(request)


def search(client: SearchClient, query: str, top_k: int | None = None) -> list[SearchResult]:
    return client.search(query, top_k)


__all__ = [
    "CacheMissError",
    "ChatRequest",
    "ChatResponse",
    "DEFAULT_DOC_CHAR_BUDGET",
    "FaultInjectingChat",
    "FixtureSearchProvider",
    "GatewayError",
    "HttpChatClient",
    "HttpSearchProvider",
    "LlmClient",
    "Message",
    "ReplayChatClient",
    "RetryingSession",
    "ScriptedChat",
    "SearchClient",
    "SearchResult",
    "TransportError",
    "chat_complete",
    "echo_chat",
    "extract_text",
    "fixed_clock",
    "normalize_query",
    "search",
    "user_request",
]
