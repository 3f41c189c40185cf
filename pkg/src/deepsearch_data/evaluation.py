"""Evaluation harness: token F1, LLM-as-judge, stage attribution and output statistics."""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import asdict, dataclass, field
from statistics import fmean
from typing import TYPE_CHECKING, Sequence

from . import prompts
from .gateways.base import GatewayError, Message, user_request

if TYPE_CHECKING:
    from .orchestrator import Trajectory

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT = set(string.punctuation)


def normalize_answer(s: str) -> str:
    """Lowercase, drop punctuation and articles, collapse whitespace."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCT)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def f1(pred: str, gold: str) -> float:
    pred_toks = normalize_answer(pred).split()
    gold_toks = normalize_answer(gold).split()
    if not pred_toks or not gold_toks:
        return float(pred_toks == gold_toks)
    common = sum((Counter(pred_toks) & Counter(gold_toks)).values())
    # 2PR/(P+R) reduces to this; one division keeps the result symmetric and exact
    return 2 * common / (len(pred_toks) + len(gold_toks))


def best_f1(pred: str, golds: Sequence[str]) -> float:
    if not golds:
        raise ValueError("best_f1 needs at least one gold answer")
    return max(f1(pred, g) for g in golds)


# --- LLM-as-judge -----------------------------------------------------------

_VERDICT = re.compile(r"^\W*(incorrect|correct)\b", re.IGNORECASE)


def parse_verdict(reply: str) -> bool | None:
    m = _VERDICT.match(reply.strip())
    if not m:
        return None
    return m.group(1).lower() == "correct"


def llm_judge(question: str, pred: str, golds: Sequence[str], judge, reasks: int = 1, **gen) -> bool | None:
    """Ask ``judge`` whether ``pred`` answers ``question``.

    Returns ``None`` (abstain) when the reply is still unparsable after
    ``reasks`` follow-ups or the backend fails.
    """
    prompt = prompts.JUDGE.substitute(question=question, golds=" | ".join(golds), pred=pred)
    request = user_request(prompt, **gen)
    for _ in range(reasks + 1):
        try:
            reply = judge.complete(request).text
        except GatewayError:
            return None
        verdict = parse_verdict(reply)
        if verdict is not None:
            return verdict
        request = request.with_(messages=request.messages + (
            Message("assistant", reply), Message("user", prompts.JUDGE_REASK)))
    return None


# --- stage attribution --------------------------------------------------------

def _contains_tokens(haystack: str, needle: str) -> bool:
    hay = normalize_answer(haystack).split()
    ndl = normalize_answer(needle).split()
    if not ndl or len(ndl) > len(hay):
        return False
    n = len(ndl)
    return any(hay[i : i + n] == ndl for i in range(len(hay) - n + 1))


def _strip_boxes(text: str) -> str:
    from .orchestrator import boxed_spans

    out, pos = [], 0
    for start, end, _ in boxed_spans(text):
        out.append(text[pos:start])
        pos = end
    out.append(text[pos:])
    return " ".join(out)


@dataclass(frozen=True)
class StageFlags:
    planning: bool
    search: bool
    summarization: bool


def stage_attribution(t: "Trajectory", golds: Sequence[str]) -> StageFlags:
    """Where did a gold answer surface: reasoning, raw retrieved pages, or summaries?

    Matching is on normalized contiguous token sequences, checked piece by
    piece. The final boxed answer is excluded from the reasoning text.
    """
    reasoning = [_strip_boxes(turn.reasoning) for turn in t.turns]
    pages = [r.extracted_text for turn in t.turns if turn.search for r in turn.search.results]
    summaries = [turn.search.summary for turn in t.turns if turn.search]

    def hit(texts):
        return any(_contains_tokens(x, g) for x in texts for g in golds)

    return StageFlags(hit(reasoning), hit(pages), hit(summaries))


# --- output statistics --------------------------------------------------------

@dataclass(frozen=True)
class OutputStats:
    mean_reflections: float
    mean_searches: float
    mean_length: float


def output_stats(ts: Sequence["Trajectory"], word: str = "alternatively") -> OutputStats:
    """Mean count of ``word``, mean search calls and mean generated length (whitespace tokens)."""
    if not ts:
        raise ValueError("output_stats needs at least one trajectory")
    pat = re.compile(rf"\b{re.escape(word)}\b", re.IGNORECASE)
    texts = [t.generated_text for t in ts]
    return OutputStats(
        fmean(len(pat.findall(x)) for x in texts),
        fmean(t.search_calls for t in ts),
        fmean(len(x.split()) for x in texts),
    )


# --- report -------------------------------------------------------------------

@dataclass
class ItemResult:
    item_id: str
    prediction: str | None
    f1: float
    judge: bool | None = None
    stages: StageFlags | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


@dataclass
class EvalReport:
    items: list[ItemResult] = field(default_factory=list)
    mean_f1: float | None = None
    judge_accuracy: float | None = None
    judge_abstentions: int = 0
    stats: OutputStats | None = None
    stage_rates: dict[str, float] | None = None

    def summary(self) -> dict:
        return {
            "n": len(self.items),
            "mean_f1": self.mean_f1,
            "judge_accuracy": self.judge_accuracy,
            "judge_abstentions": self.judge_abstentions,
            "stats": asdict(self.stats) if self.stats else None,
            "stage_rates": self.stage_rates,
        }

    def rows(self) -> list[dict]:
        return [{"type": "item", **i.to_dict()} for i in self.items] + [{"type": "summary", **self.summary()}]

    def table(self) -> str:
        def fmt(v):
            return "-" if v is None else f"{v:.3f}"

        lines = [f"{'metric':<22}{'value':>10}", "-" * 32, f"{'items':<22}{len(self.items):>10}"]
        lines.append(f"{'F1':<22}{fmt(self.mean_f1):>10}")
        lines.append(f"{'LLM-judge accuracy':<22}{fmt(self.judge_accuracy):>10}")
        lines.append(f"{'judge abstentions':<22}{self.judge_abstentions:>10}")
        if self.stats:
            lines.append(f"{'#alternatively':<22}{fmt(self.stats.mean_reflections):>10}")
            lines.append(f"{'#search':<22}{fmt(self.stats.mean_searches):>10}")
            lines.append(f"{'output length':<22}{fmt(self.stats.mean_length):>10}")
        for name, rate in (self.stage_rates or {}).items():
            lines.append(f"{'stage: ' + name:<22}{fmt(rate):>10}")
        return "\n".join(lines) + "\n"


METRICS = ("f1", "judge", "stages", "stats")


def evaluate(ts: Sequence["Trajectory"], judge=None, metrics: Sequence[str] = ("f1", "stages", "stats")) -> EvalReport:
    """Score trajectories against their queries' gold answers.

    Abstaining judge verdicts are left out of ``judge_accuracy`` and counted
    in ``judge_abstentions``.
    """
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    from .orchestrator import extract_final_answer

    report = EvalReport()
    for t in ts:
        golds = list(t.query.record.gold_answers)
        pred = t.final_answer if t.final_answer is not None else extract_final_answer(t.generated_text)
        item = ItemResult(t.id, pred, best_f1(pred or "", golds))
        if "judge" in metrics and judge is not None:
            item.judge = llm_judge(t.query.question, pred or "", golds, judge) if pred else False
        if "stages" in metrics:
            item.stages = stage_attribution(t, golds)
        report.items.append(item)
    if not report.items:
        return report
    if "f1" in metrics:
        report.mean_f1 = fmean(i.f1 for i in report.items)
    if "judge" in metrics and judge is not None:
        verdicts = [i.judge for i in report.items if i.judge is not None]
        report.judge_abstentions = len(report.items) - len(verdicts)
        report.judge_accuracy = fmean(verdicts) if verdicts else None
    if "stats" in metrics:
        report.stats = output_stats(ts)
    if "stages" in metrics:
        report.stage_rates = {
            name: fmean(getattr(i.stages, name) for i in report.items)
            for name in ("planning", "search", "summarization")
        }
    return report
