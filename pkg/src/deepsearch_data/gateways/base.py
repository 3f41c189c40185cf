"""Request/response types and error classes shared by every gateway backend."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Protocol, runtime_checkable

from ..jsonio import canonical_hash

ROLES = ("system", "user", "assistant")
FINISH_REASONS = ("stop_sequence", "length", "end")

# Generation defaults used for every LLM role unless overridden.
DEFAULT_TEMPERATURE = 0.6
DEFAULT_TOP_P = 0.95
DEFAULT_TOP_K = 40
DEFAULT_MAX_TOKENS = 20_480


class GatewayError(Exception):
    """Base class for failures talking to an external service."""


class TransportError(GatewayError):
    """Network/HTTP failure that survived the retry policy."""

    def __init__(self, message: str, status: int | None = None, attempts: int = 1):
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class CacheMissError(GatewayError):
    """Replay-only backend was asked for something it never recorded."""

    def __init__(self, fingerprint: str, what: str = "request"):
        super().__init__(f"replay cache miss for {what} fingerprint {fingerprint}")
        self.fingerprint = fingerprint


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Message, ...]
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    top_k: int = DEFAULT_TOP_K
    max_tokens: int = DEFAULT_MAX_TOKENS
    stop_sequences: tuple[str, ...] = ()
    seed: int | None = None

    def __post_init__(self):
        msgs = tuple(m if isinstance(m, Message) else Message(*m) for m in self.messages)
        object.__setattr__(self, "messages", msgs)
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))
        if not msgs:
            raise ValueError("messages must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be a positive integer")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be a positive integer")

    def to_dict(self) -> dict[str, Any]:
        return {
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "max_tokens": self.max_tokens,
            "stop": list(self.stop_sequences),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ChatRequest":
        return cls(
            messages=tuple(Message(m["role"], m["content"]) for m in d["messages"]),
            temperature=d.get("temperature", DEFAULT_TEMPERATURE),
            top_p=d.get("top_p", DEFAULT_TOP_P),
            top_k=d.get("top_k", DEFAULT_TOP_K),
            max_tokens=d.get("max_tokens", DEFAULT_MAX_TOKENS),
            stop_sequences=tuple(d.get("stop", ())),
            seed=d.get("seed"),
        )

    def with_(self, **changes) -> "ChatRequest":
        return replace(self, **changes)

    def fingerprint(self, namespace: str = "") -> str:
        return canonical_hash({"ns": namespace, "request": self.to_dict()})


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "end"
    usage: tuple[int, int] = field(default=(0, 0))

    def __post_init__(self):
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"unknown finish_reason {self.finish_reason!r}")
        if min(self.usage) < 0:
            raise ValueError("usage counts must be non-negative")

    @property
    def completion_tokens(self) -> int:
        return self.usage[1]

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "finish_reason": self.finish_reason, "usage": list(self.usage)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ChatResponse":
        return cls(d["text"], d.get("finish_reason", "end"), tuple(d.get("usage", (0, 0))))


def user_request(prompt: str, system: str | None = None, **params) -> ChatRequest:
    msgs = [Message("system", system)] if system else []
    msgs.append(Message("user", prompt))
    return ChatRequest(messages=tuple(msgs), **params)


@runtime_checkable
class LlmClient(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...
