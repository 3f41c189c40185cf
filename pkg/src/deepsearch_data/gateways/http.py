"""Live JSON-over-HTTP backends for chat completion and web search."""

from __future__ import annotations

import logging
import threading
import time
from typing import Any, Callable

import requests

from .base import ChatRequest, ChatResponse, TransportError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({408, 425, 429, 500, 502, 503, 504})
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = 1.0


class RetryingSession:
    """Thin wrapper over ``requests`` adding exponential-backoff retries.

    A request is attempted at most ``retries + 1`` times. Connection errors
    and the statuses in ``RETRYABLE_STATUS`` are retried after sleeping
    ``backoff * 2**k`` seconds; any other 4xx/5xx fails immediately.
    """

    def __init__(
        self,
        retries: int = DEFAULT_RETRIES,
        backoff: float = DEFAULT_BACKOFF,
        timeout: float = 600.0,
        sleep: Callable[[float], None] = time.sleep,
        session: requests.Session | None = None,
    ):
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._sleep = sleep
        self._local = threading.local()
        self._shared = session
        self.last_retry_count = 0

    @property
    def session(self) -> requests.Session:
        if self._shared is not None:
            return self._shared
        # requests.Session is not guaranteed thread-safe; one per thread
        sess = getattr(self._local, "session", None)
        if sess is None:
            sess = self._local.session = requests.Session()
        return sess

    def request(self, method: str, url: str, **kwargs) -> requests.Response:
        kwargs.setdefault("timeout", self.timeout)
        status = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.request(method, url, **kwargs)
            except requests.RequestException as exc:
                status, reason = None, f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code < 400:
                    self.last_retry_count = attempt
                    if attempt:
                        logger.info("%s %s succeeded after %d retries", method, url, attempt)
                    return resp
                status, reason = resp.status_code, f"HTTP {resp.status_code}"
                if status not in RETRYABLE_STATUS:
                    raise TransportError(f"{method} {url} failed: {reason}", status, attempt + 1)
            if attempt < self.retries:
                delay = self.backoff * (2**attempt)
                logger.warning("%s %s: %s; retry %d/%d in %.1fs",
                               method, url, reason, attempt + 1, self.retries, delay)
                self._sleep(delay)
        self.last_retry_count = self.retries
        raise TransportError(
            f"{method} {url} failed after {self.retries} retries: {reason}", status, self.retries + 1
        )


def _infer_finish(choice: dict[str, Any], text: str, request: ChatRequest) -> str:
    reason = choice.get("finish_reason") or "stop"
    if reason == "length":
        return "length"
    # vLLM/sglang echo the matched stop string; OpenAI-style servers do not
    matched = choice.get("stop_reason")
    if isinstance(matched, str) and matched in request.stop_sequences:
        return "stop_sequence"
    if reason == "stop_sequence":
        return "stop_sequence"
    return "end"


class HttpChatClient:
    """Chat-completion backend speaking the common ``/chat/completions`` shape.

    Payload: ``{model, messages, temperature, top_p, top_k, max_tokens, stop,
    seed}``; response: ``{choices: [{message: {content}, finish_reason}],
    usage: {prompt_tokens, completion_tokens}}``.
    """

    def __init__(
        self,
        endpoint: str,
        model: str | None = None,
        api_key: str | None = None,
        http: RetryingSession | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.http = http or RetryingSession()

    def complete(self, request: ChatRequest) -> ChatResponse:
        payload = request.to_dict()
        if payload["seed"] is None:
            del payload["seed"]
        if self.model:
            payload["model"] = self.model
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        resp = self.http.request("POST", self.endpoint, json=payload, headers=headers)
        try:
            body = resp.json()
            choice = body["choices"][0]
            text = choice.get("message", {}).get("content")
            if text is None:
                text = choice.get("text", "")
            usage = body.get("usage") or {}
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat response from {self.endpoint}: {exc}") from exc
        return ChatResponse(
            text=text,
            finish_reason=_infer_finish(choice, text, request),
            usage=(int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))),
        )


class HttpSearchProvider:
    """Generic web-search API provider.

    Issues ``GET endpoint?q=<query>&num=<k>`` and accepts the result list under
    any of the keys ``results``, ``items``, ``organic`` or ``organic_results``.
    With ``fetch_pages`` the provider also downloads each hit's page so the
    extractor works on full HTML rather than the snippet.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        name: str = "http",
        key_header: str = "X-API-KEY",
        fetch_pages: bool = False,
        http: RetryingSession | None = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.name = name
        self.key_header = key_header
        self.fetch_pages = fetch_pages
        self.http = http or RetryingSession(timeout=30.0)

    def fetch(self, query: str, top_k: int) -> list[dict[str, str]]:
        headers = {self.key_header: self.api_key} if self.api_key else {}
        resp = self.http.request("GET", self.endpoint, params={"q": query, "num": top_k}, headers=headers)
        try:
            body = resp.json()
        except ValueError as exc:
            raise TransportError(f"non-JSON search response: {exc}") from exc
        items = []
        for key in ("results", "items", "organic", "organic_results"):
            if isinstance(body.get(key), list):
                items = body[key]
                break
        hits = []
        for item in items[:top_k]:
            url = item.get("url") or item.get("link") or ""
            text = item.get("html") or item.get("content") or item.get("snippet") or item.get("text") or ""
            if self.fetch_pages and url:
                try:
                    text = self.http.request("GET", url).text
                except TransportError as exc:
                    logger.warning("page fetch failed for %s: %s", url, exc)
            hits.append({"url": url, "title": item.get("title", ""), "html_or_text": text})
        return hits
