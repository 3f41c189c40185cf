"""Iterative reason -> search -> summarize -> generate loop producing trajectories."""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

from . import prompts
from .corpus import AnnotatedQuery
from .gateways.base import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    DEFAULT_TOP_K,
    DEFAULT_TOP_P,
    ChatRequest,
    GatewayError,
    Message,
)
from .gateways.html import DEFAULT_DOC_CHAR_BUDGET
from .gateways.search import DEFAULT_SEARCH_TOP_K, SearchResult

logger = logging.getLogger(__name__)

BEGIN_SEARCH = "<|begin_search_query|>"
END_SEARCH = "<|end_search_query|>"
BEGIN_RESULT = "<|begin_search_result|>"
END_RESULT = "<|end_search_result|>"
BOXED = "\\boxed"

NO_HELPFUL_INFO = "No helpful information found."
LIMIT_NOTICE = "Search limit reached; answer with current information."

STOP_REASONS = ("answered", "max_searches", "max_turns", "max_tokens", "backend_error")
SPAN_KINDS = ("injected_doc", "notice")


@dataclass(frozen=True)
class LoopConfig:
    max_search_calls: int = 10
    max_turns: int = 15
    candidates_per_query: int = 10
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    top_k: int = DEFAULT_TOP_K
    max_tokens: int = DEFAULT_MAX_TOKENS
    search_tokens: tuple[str, str] = (BEGIN_SEARCH, END_SEARCH)
    result_markers: tuple[str, str] = (BEGIN_RESULT, END_RESULT)
    answer_marker: str = BOXED
    search_top_k: int = DEFAULT_SEARCH_TOP_K
    doc_char_budget: int = DEFAULT_DOC_CHAR_BUDGET
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "search_tokens", tuple(self.search_tokens))
        object.__setattr__(self, "result_markers", tuple(self.result_markers))
        for name in ("max_search_calls", "max_turns", "candidates_per_query", "max_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.max_search_calls > self.max_turns:
            raise ValueError("max_search_calls must not exceed max_turns")

    def request(self, messages, max_tokens: int | None = None, seed: int | None = None,
                stop: Sequence[str] = ()) -> ChatRequest:
        return ChatRequest(
            messages=tuple(messages),
            temperature=self.temperature,
            top_p=self.top_p,
            top_k=self.top_k,
            max_tokens=max_tokens or self.max_tokens,
            stop_sequences=tuple(stop),
            seed=seed,
        )


@dataclass(frozen=True)
class Span:
    start: int
    end: int
    kind: str = "injected_doc"

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "kind": self.kind}


@dataclass
class SearchEvent:
    query: str
    results: list[SearchResult]
    summary: str

    def to_dict(self) -> dict:
        return {"query": self.query, "results": [r.to_dict() for r in self.results], "summary": self.summary}

    @classmethod
    def from_dict(cls, d: dict) -> "SearchEvent":
        return cls(d["query"], [SearchResult.from_dict(r) for r in d["results"]], d["summary"])


@dataclass
class TrajectoryTurn:
    turn_index: int
    reasoning: str
    search: SearchEvent | None = None
    notice: str | None = None

    def to_dict(self) -> dict:
        return {
            "turn_index": self.turn_index,
            "reasoning": self.reasoning,
            "search": self.search.to_dict() if self.search else None,
            "notice": self.notice,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryTurn":
        search = SearchEvent.from_dict(d["search"]) if d.get("search") else None
        return cls(d["turn_index"], d["reasoning"], search, d.get("notice"))


@dataclass
class Trajectory:
    query: AnnotatedQuery
    prompt: str
    turns: list[TrajectoryTurn] = field(default_factory=list)
    raw_text: str = ""
    spans: list[Span] = field(default_factory=list)
    final_answer: str | None = None
    stop_reason: str = "max_turns"
    search_calls: int = 0
    generated_tokens: int = 0
    candidate_index: int = 0
    seed: int | None = None
    error: str | None = None

    @property
    def id(self) -> str:
        return f"{self.query.id}#{self.candidate_index}"

    @property
    def total_turns(self) -> int:
        return len(self.turns)

    @property
    def counters(self) -> dict[str, int]:
        return {"search_calls": self.search_calls, "total_turns": self.total_turns,
                "generated_tokens": self.generated_tokens}

    @property
    def generated_text(self) -> str:
        return "".join(t.reasoning for t in self.turns)

    def generated_pieces(self) -> list[str]:
        """Model-generated chunks of ``raw_text``: gaps between injected spans."""
        pieces, pos = [], len(self.prompt)
        for span in sorted(self.spans, key=lambda s: s.start):
            pieces.append(self.raw_text[pos : span.start])
            pos = span.end
        pieces.append(self.raw_text[pos:])
        return pieces

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "query": self.query.to_dict(),
            "prompt": self.prompt,
            "turns": [t.to_dict() for t in self.turns],
            "raw_text": self.raw_text,
            "spans": [s.to_dict() for s in self.spans],
            "final_answer": self.final_answer,
            "stop_reason": self.stop_reason,
            "counters": self.counters,
            "candidate_index": self.candidate_index,
            "seed": self.seed,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Trajectory":
        return cls(
            query=AnnotatedQuery.from_dict(d["query"]),
            prompt=d["prompt"],
            turns=[TrajectoryTurn.from_dict(t) for t in d["turns"]],
            raw_text=d["raw_text"],
            spans=[Span(s["start"], s["end"], s.get("kind", "injected_doc")) for s in d["spans"]],
            final_answer=d.get("final_answer"),
            stop_reason=d["stop_reason"],
            search_calls=d["counters"]["search_calls"],
            generated_tokens=d["counters"]["generated_tokens"],
            candidate_index=d.get("candidate_index", 0),
            seed=d.get("seed"),
            error=d.get("error"),
        )


class TrajectoryBuilder:
    """Accumulates ``raw_text`` and records which spans were injected.

    Used by the loop itself and handy for constructing fixtures by hand.
    """

    def __init__(self, query: AnnotatedQuery, prompt: str, result_markers=(BEGIN_RESULT, END_RESULT)):
        self.traj = Trajectory(query=query, prompt=prompt, raw_text=prompt)
        self.result_markers = tuple(result_markers)

    def generate(self, text: str, tokens: int | None = None) -> TrajectoryTurn:
        turn = TrajectoryTurn(turn_index=len(self.traj.turns), reasoning=text)
        self.traj.turns.append(turn)
        self.traj.raw_text += text
        self.traj.generated_tokens += len(text.split()) if tokens is None else tokens
        return turn

    def _inject(self, body: str, kind: str) -> Span:
        begin, end = self.result_markers
        block = f"\n\n{begin}{body}{end}\n\n"
        start = len(self.traj.raw_text)
        self.traj.raw_text += block
        span = Span(start, len(self.traj.raw_text), kind)
        self.traj.spans.append(span)
        return span

    def search(self, query: str, results: list[SearchResult], summary: str) -> Span:
        turn = self.traj.turns[-1]
        turn.search = SearchEvent(query, list(results), summary)
        self.traj.search_calls += 1
        return self._inject(summary, "injected_doc")

    def notice(self, text: str = LIMIT_NOTICE) -> Span:
        self.traj.turns[-1].notice = text
        return self._inject(text, "notice")

    def finish(self, stop_reason: str, answer: str | None = None, error: str | None = None) -> Trajectory:
        if stop_reason not in STOP_REASONS:
            raise ValueError(f"unknown stop reason {stop_reason!r}")
        self.traj.stop_reason = stop_reason
        self.traj.final_answer = answer if stop_reason == "answered" else None
        self.traj.error = error
        return self.traj


class ParsedQuery(NamedTuple):
    query: str | None
    malformed: bool = False


def parse_search_query(generated: str, tokens: tuple[str, str] = (BEGIN_SEARCH, END_SEARCH)) -> ParsedQuery:
    """Return the text between the first begin token and the next end token.

    A begin token with no end token after it, or an empty query, is reported
    as ``ParsedQuery(None, malformed=True)``.
    """
    begin, end = tokens
    start = generated.find(begin)
    if start == -1:
        return ParsedQuery(None)
    start += len(begin)
    stop = generated.find(end, start)
    if stop == -1:
        return ParsedQuery(None, True)
    query = generated[start:stop].strip()
    return ParsedQuery(query, False) if query else ParsedQuery(None, True)


def _box_pattern(marker: str) -> re.Pattern:
    name = marker.lstrip("\\")
    return re.compile(r"\\?" + re.escape(name) + r"\{")


def boxed_spans(text: str, marker: str = BOXED) -> list[tuple[int, int, str]]:
    """All ``marker{...}`` occurrences with balanced braces: ``(start, end, content)``."""
    out = []
    for m in _box_pattern(marker).finditer(text):
        depth, i = 1, m.end()
        while i < len(text) and depth:
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
            i += 1
        if depth == 0:
            out.append((m.start(), i, text[m.end() : i - 1]))
    return out


_TEXT_WRAPPER = re.compile(r"^\\(?:text|textbf|mathrm)\{(.*)\}$", re.DOTALL)


def extract_final_answer(generated: str, marker: str = BOXED) -> str | None:
    """Content of the last ``\\boxed{...}`` in ``generated``, trimmed.

    A single ``\\text{...}`` wrapper inside the box is unwrapped.
    """
    boxes = boxed_spans(generated, marker)
    if not boxes:
        return None
    content = boxes[-1][2].strip()
    m = _TEXT_WRAPPER.match(content)
    if m:
        content = m.group(1).strip()
    return content


def build_summary_prompt(question: str, sub_query: str, results: Sequence[SearchResult],
                         doc_char_budget: int = DEFAULT_DOC_CHAR_BUDGET) -> str:
    docs = []
    for r in results:
        body = r.extracted_text[:doc_char_budget]
        docs.append(f"**Web Page {r.rank}:**\nTitle: {r.title}\nURL: {r.url}\n{body}")
    return prompts.SUMMARIZE.substitute(question=question, sub_query=sub_query, documents="\n\n".join(docs))


def summarize_docs(question: str, sub_query: str, results: Sequence[SearchResult], llm,
                   cfg: LoopConfig | None = None, seed: int | None = None) -> str:
    """Condense retrieved pages into the text injected back into the reasoning.

    With no results the sentinel ``"No helpful information found."`` is
    returned without calling the model. Backend errors propagate.
    """
    if not results:
        return NO_HELPFUL_INFO
    cfg = cfg or LoopConfig()
    prompt = build_summary_prompt(question, sub_query, results, cfg.doc_char_budget)
    reply = llm.complete(cfg.request([Message("user", prompt)], seed=seed)).text
    marker = "**Final Information**"
    if marker in reply:
        reply = reply.rsplit(marker, 1)[1]
    return reply.strip() or NO_HELPFUL_INFO


def render_reasoning_prompt(question: str, cfg: LoopConfig | None = None) -> str:
    cfg = cfg or LoopConfig()
    return prompts.REASONING.substitute(
        question=question,
        begin_search=cfg.search_tokens[0],
        end_search=cfg.search_tokens[1],
        begin_result=cfg.result_markers[0],
        end_result=cfg.result_markers[1],
        max_searches=cfg.max_search_calls,
    )


def run_trajectory(query: AnnotatedQuery, cfg: LoopConfig, reasoner, searcher, summarizer,
                   seed: int | None = None, candidate_index: int = 0) -> Trajectory:
    """Drive one reasoning path for ``query`` until it answers or hits a limit.

    Each turn the reasoner continues the accumulated transcript with the
    end-of-query token as stop sequence. A well-formed query triggers a
    search plus summary (or the limit notice once ``max_search_calls`` is
    spent); a boxed answer ends the run. Only reasoner generations count as
    turns. Backend failures end the run with ``backend_error`` and keep the
    partial transcript.
    """
    prompt = render_reasoning_prompt(query.question, cfg)
    b = TrajectoryBuilder(query, prompt, cfg.result_markers)
    b.traj.seed, b.traj.candidate_index = seed, candidate_index
    begin_q, end_q = cfg.search_tokens

    for _ in range(cfg.max_turns):
        budget = cfg.max_tokens - b.traj.generated_tokens
        if budget < 1:
            return b.finish("max_tokens")
        history = b.traj.raw_text[len(prompt):]
        messages = [Message("user", prompt)]
        if history:
            messages.append(Message("assistant", history))
        try:
            resp = reasoner.complete(cfg.request(messages, budget, seed, stop=[end_q]))
        except GatewayError as exc:
            logger.warning("reasoner failed for %s: %s", query.id, exc)
            return b.finish("backend_error", error=str(exc))

        text = resp.text
        if resp.finish_reason == "stop_sequence" and text.rfind(begin_q) > text.rfind(end_q):
            text += end_q  # servers strip the matched stop string
        b.generate(text, resp.completion_tokens or len(text.split()))
        if resp.finish_reason == "length":
            return b.finish("max_tokens")

        parsed = parse_search_query(text, cfg.search_tokens)
        if parsed.query is not None:
            if b.traj.search_calls >= cfg.max_search_calls:
                b.notice(LIMIT_NOTICE)
                continue
            try:
                results = searcher.search(parsed.query, cfg.search_top_k)
                summary = summarize_docs(query.question, parsed.query, results, summarizer, cfg, seed)
            except GatewayError as exc:
                logger.warning("search/summary failed for %s: %s", query.id, exc)
                return b.finish("backend_error", error=str(exc))
            b.search(parsed.query, results, summary)
            continue

        answer = extract_final_answer(text, cfg.answer_marker)
        if answer is not None:
            return b.finish("answered", answer)
        if b.traj.generated_tokens >= cfg.max_tokens:
            return b.finish("max_tokens")
    return b.finish("max_turns")


def candidate_seed(base: int, query_id: str, index: int) -> int:
    digest = hashlib.sha256(f"{base}:{query_id}:{index}".encode()).hexdigest()
    return int(digest[:8], 16)


def sample_candidates(query: AnnotatedQuery, cfg: LoopConfig, reasoner, searcher, summarizer) -> list[Trajectory]:
    """Run ``cfg.candidates_per_query`` independent trajectories for one query.

    Each candidate gets its own seed derived from ``cfg.seed``, the query id
    and its index. A failing candidate becomes a ``backend_error`` trajectory;
    the batch always has the full length.
    """
    out = []
    for i in range(cfg.candidates_per_query):
        seed = candidate_seed(cfg.seed, query.id, i)
        try:
            traj = run_trajectory(query, cfg, reasoner, searcher, summarizer, seed=seed, candidate_index=i)
        except Exception as exc:  # never abort the batch
            logger.exception("candidate %d of %s crashed", i, query.id)
            b = TrajectoryBuilder(query, render_reasoning_prompt(query.question, cfg), cfg.result_markers)
            b.traj.seed, b.traj.candidate_index = seed, i
            traj = b.finish("backend_error", error=f"{type(exc).__name__}: {exc}")
        out.append(traj)
    return out
