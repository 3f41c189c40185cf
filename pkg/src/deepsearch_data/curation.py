"""Response curation: format, reasoning-path, difficulty and search-effectiveness filters."""

from __future__ import annotations

import re
import threading
import unicodedata
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .evaluation import best_f1
from .orchestrator import BEGIN_SEARCH, BOXED, END_SEARCH, Trajectory, extract_final_answer
from .gateways.mock import normalize_query

REFLECTION_LEXICON = ("alternatively", "wait", "hmm")
CORRECT_F1_THRESHOLD = 0.7
MIXED_LANGUAGE_SHARE = 0.05

Oracle = Callable[[str | None, Sequence[str], str], bool]


@dataclass(frozen=True)
class CurationConfig:
    reflection_lexicon: tuple[str, ...] = REFLECTION_LEXICON
    max_reflections: int = 5
    max_reasoning_tokens: int = 8_096
    accuracy_drop_threshold: float = 1.0
    min_correct: int = 1
    # groups smaller than this are too small to judge difficulty on
    min_attempts_for_difficulty: int = 2
    mixed_language_share: float = MIXED_LANGUAGE_SHARE
    search_tokens: tuple[str, str] = (BEGIN_SEARCH, END_SEARCH)
    answer_marker: str = BOXED

    def __post_init__(self):
        object.__setattr__(self, "reflection_lexicon", tuple(self.reflection_lexicon))
        object.__setattr__(self, "search_tokens", tuple(self.search_tokens))
        if not 0 <= self.accuracy_drop_threshold <= 1:
            raise ValueError("accuracy_drop_threshold must be within [0, 1]")


@dataclass(frozen=True)
class ResponseMetadata:
    search_steps: int
    reasoning_length: int
    reflection_count: int
    language_consistent: bool
    format_valid: bool
    correct: bool
    distinct_query_count: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FormatCheck:
    passed: bool
    reasons: tuple[str, ...] = ()
    normalized_answer: str | None = None


def count_phrases(text: str, lexicon: Iterable[str]) -> int:
    """Case-insensitive whole-word occurrences of any phrase in ``lexicon``."""
    alts = sorted((re.escape(p) for p in lexicon if p), key=len, reverse=True)
    if not alts:
        return 0
    return len(re.findall(r"\b(?:" + "|".join(alts) + r")\b", text, flags=re.IGNORECASE))


def f1_oracle(threshold: float = CORRECT_F1_THRESHOLD, judge: Callable[[str, str, Sequence[str]], bool | None] | None = None) -> Oracle:
    """Correct iff best F1 >= ``threshold`` or, when given, the judge says so."""

    def oracle(pred: str | None, golds: Sequence[str], question: str = "") -> bool:
        if pred is None:
            return False
        if best_f1(pred, golds) >= threshold:
            return True
        return bool(judge and judge(question, pred, golds))

    return oracle


def _script(ch: str) -> str:
    name = unicodedata.name(ch, "")
    head = name.split(" ", 1)[0]
    if head in ("HIRAGANA", "KATAKANA", "CJK", "HALFWIDTH", "FULLWIDTH"):
        return "CJK"
    return head or "UNKNOWN"


def script_shares(text: str) -> dict[str, float]:
    counts = Counter(_script(ch) for ch in text if ch.isalpha())
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()} if total else {}


def is_language_consistent(text: str, threshold: float = MIXED_LANGUAGE_SHARE) -> bool:
    """False when letters outside the dominant script exceed ``threshold``."""
    shares = script_shares(text)
    return not shares or 1 - max(shares.values()) <= threshold


def search_tokens_wellformed(text: str, tokens: tuple[str, str] = (BEGIN_SEARCH, END_SEARCH)) -> bool:
    """Begin/end tokens strictly alternate, starting with begin and closing every pair."""
    begin, end = tokens
    pattern = re.compile(re.escape(begin) + "|" + re.escape(end))
    expect_begin = True
    for m in pattern.finditer(text):
        if (m.group() == begin) != expect_begin:
            return False
        expect_begin = not expect_begin
    return expect_begin


def filter_format(t: Trajectory, cfg: CurationConfig | None = None) -> FormatCheck:
    cfg = cfg or CurationConfig()
    text = t.generated_text
    reasons = []
    if not is_language_consistent(text, cfg.mixed_language_share):
        reasons.append("mixed_language")
    if not search_tokens_wellformed(text, cfg.search_tokens):
        reasons.append("malformed_search_tokens")
    answer = extract_final_answer(text, cfg.answer_marker)
    if answer is None or not answer:
        reasons.append("missing_boxed_answer")
    if t.stop_reason != "answered":
        reasons.append("not_answered")
    # extract_final_answer already trims stray whitespace inside the box
    return FormatCheck(not reasons, tuple(reasons), answer)


def collect_metadata(t: Trajectory, gold: Sequence[str], judge: Oracle | None = None,
                     cfg: CurationConfig | None = None) -> ResponseMetadata:
    """Measure one trajectory. Only model-generated text is inspected."""
    cfg = cfg or CurationConfig()
    text = t.generated_text
    oracle = judge or f1_oracle()
    answer = t.final_answer if t.final_answer is not None else extract_final_answer(text, cfg.answer_marker)
    queries = {normalize_query(turn.search.query) for turn in t.turns if turn.search}
    return ResponseMetadata(
        search_steps=t.search_calls,
        reasoning_length=len(text.split()),
        reflection_count=count_phrases(text, cfg.reflection_lexicon),
        language_consistent=is_language_consistent(text, cfg.mixed_language_share),
        format_valid=filter_format(t, cfg).passed,
        correct=oracle(answer, gold, t.query.question),
        distinct_query_count=len(queries),
    )


def filter_reasoning_path(m: ResponseMetadata, cfg: CurationConfig | None = None) -> bool:
    cfg = cfg or CurationConfig()
    return m.reflection_count <= cfg.max_reflections and m.reasoning_length <= cfg.max_reasoning_tokens


def filter_difficulty(group: Sequence[ResponseMetadata], cfg: CurationConfig | None = None) -> bool:
    """Keep (True) or drop (False) a question given all its attempts.

    Drops questions whose accuracy reaches ``accuracy_drop_threshold`` and
    questions with fewer than ``min_correct`` correct attempts.
    """
    cfg = cfg or CurationConfig()
    if not group:
        raise ValueError("difficulty filter needs at least one attempt")
    correct = sum(m.correct for m in group)
    if correct < cfg.min_correct:
        return False
    if len(group) < cfg.min_attempts_for_difficulty:
        return True
    return correct / len(group) < cfg.accuracy_drop_threshold


def selection_key(m: ResponseMetadata, index: int) -> tuple:
    return (m.search_steps, -m.distinct_query_count, m.reasoning_length, index)


def rank_survivors(survivors: Sequence[tuple[Trajectory, ResponseMetadata]]) -> list[int]:
    return sorted(range(len(survivors)), key=lambda i: selection_key(survivors[i][1], i))


class SelectionError(ValueError):
    pass


def select_best(survivors: Sequence[tuple[Trajectory, ResponseMetadata]]) -> Trajectory:
    """Fewest searches wins; then more distinct sub-queries, shorter reasoning, input order."""
    if not survivors:
        raise SelectionError("no surviving candidates to select from")
    return survivors[rank_survivors(survivors)[0]][0]


@dataclass(frozen=True)
class AuditEntry:
    question_id: str
    candidate_index: int
    stage: str
    reason_code: str

    def to_dict(self) -> dict:
        return asdict(self)


class AuditLog:
    """Append-only rejection log, safe for concurrent writers."""

    def __init__(self):
        self._lock = threading.Lock()
        self.entries: list[AuditEntry] = []

    def reject(self, question_id: str, candidate_index: int, stage: str, reason: str) -> None:
        with self._lock:
            self.entries.append(AuditEntry(question_id, candidate_index, stage, reason))

    def __len__(self):
        return len(self.entries)


@dataclass
class CuratedItem:
    question_id: str
    trajectory: Trajectory
    metadata: ResponseMetadata
    # other eligible responses in selection order (export side channel)
    runners_up: list[Trajectory] = field(default_factory=list)

    def to_dict(self) -> dict:
        q = self.trajectory.query
        return {
            "question": q.question,
            "question_id": self.question_id,
            "gold_answers": list(q.record.gold_answers),
            "trajectory_ref": self.trajectory.id,
            "metadata": self.metadata.to_dict(),
        }


@dataclass
class CurationResult:
    curated: list[CuratedItem]
    audit: AuditLog
    metadata: dict[str, ResponseMetadata]

    @property
    def trajectories(self) -> list[Trajectory]:
        return [c.trajectory for c in self.curated]


def _pairs(candidates) -> Iterable[tuple[str, list[Trajectory]]]:
    if isinstance(candidates, Mapping):
        return candidates.items()
    return candidates


def curate(candidates: Mapping[str, Sequence[Trajectory]] | Iterable[tuple[str, Sequence[Trajectory]]],
           cfg: CurationConfig | None = None, oracle: Oracle | None = None) -> CurationResult:
    """Filter candidates per question and pick at most one trajectory each.

    Stages, in order: format, reasoning path, question difficulty (computed
    over every attempt of the question), correctness, selection. Every
    candidate that is not chosen gets exactly one audit entry naming the
    first stage it failed. A question key seen twice is curated once; the
    repeat's candidates are audited as ``duplicate_question``.
    """
    cfg = cfg or CurationConfig()
    oracle = oracle or f1_oracle()
    audit = AuditLog()
    curated: list[CuratedItem] = []
    all_meta: dict[str, ResponseMetadata] = {}
    seen: set[str] = set()

    for qid, trajs in _pairs(candidates):
        trajs = list(trajs)
        if qid in seen:
            for t in trajs:
                audit.reject(qid, t.candidate_index, "input", "duplicate_question")
            continue
        seen.add(qid)
        metas = [collect_metadata(t, t.query.record.gold_answers, oracle, cfg) for t in trajs]
        for t, m in zip(trajs, metas):
            all_meta[t.id] = m

        eligible = []
        for t, m in zip(trajs, metas):
            check = filter_format(t, cfg)
            if not check.passed:
                audit.reject(qid, t.candidate_index, "format", check.reasons[0])
            elif not filter_reasoning_path(m, cfg):
                reason = "too_many_reflections" if m.reflection_count > cfg.max_reflections else "reasoning_too_long"
                audit.reject(qid, t.candidate_index, "reasoning_path", reason)
            else:
                eligible.append((t, m))

        if not trajs or not filter_difficulty(metas, cfg):
            correct = sum(m.correct for m in metas)
            reason = "too_few_correct" if correct < cfg.min_correct else "too_easy"
            for t, _ in eligible:
                audit.reject(qid, t.candidate_index, "difficulty", reason)
            continue

        survivors = []
        for t, m in eligible:
            if m.correct:
                survivors.append((t, m))
            else:
                audit.reject(qid, t.candidate_index, "correctness", "incorrect")
        if not survivors:
            continue
        order = rank_survivors(survivors)
        best_t, best_m = survivors[order[0]]
        for i in order[1:]:
            audit.reject(qid, survivors[i][0].candidate_index, "selection", "not_selected")
        curated.append(CuratedItem(qid, best_t, best_m, [survivors[i][0] for i in order[1:]]))

    return CurationResult(curated, audit, all_meta)


def rl_candidate_filter(group: Sequence[ResponseMetadata], low: int = 1, high: int = 6) -> bool:
    """Keep questions whose correct-rollout count lies in ``[low, high]``.

    Mirrors the RL-dataset rule of keeping questions with one to six correct
    answers out of eight rollouts.
    """
    correct = sum(m.correct for m in group)
    return low <= correct <= high


__all__ = [
    "AuditEntry",
    "AuditLog",
    "CuratedItem",
    "CurationConfig",
    "CurationResult",
    "FormatCheck",
    "ResponseMetadata",
    "SelectionError",
    "collect_metadata",
    "count_phrases",
    "curate",
    "f1_oracle",
    "filter_difficulty",
    "filter_format",
    "filter_reasoning_path",
    "is_language_consistent",
    "rl_candidate_filter",
    "select_best",
    "search_tokens_wellformed",
]
