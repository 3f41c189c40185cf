"""Training-data export: loss-masked SFT examples, DPO pairs and RL rewards."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .curation import (
    CurationConfig,
    Oracle,
    collect_metadata,
    count_phrases,
    filter_format,
    filter_reasoning_path,
    rank_survivors,
)
from .evaluation import best_f1
from .orchestrator import (
    BEGIN_RESULT,
    END_RESULT,
    LoopConfig,
    Trajectory,
    extract_final_answer,
    render_reasoning_prompt,
)

FORMAT_PENALTY = -2.0
MAX_MARKERS = 5
MAX_RETRIEVAL_STEPS = 8
MAX_SEGMENT_TOKENS = 8_096
NONPRINTABLE_RATIO = 0.02
REPEATED_4GRAM_SHARE = 0.30
REWARD_FLAGS = ("self_retrieved_content", "gibberish", "excessive_markers", "missing_box_or_overlong")

Tokenizer = Callable[[str], int]


def whitespace_tokens(text: str) -> int:
    return len(text.split())


class IntegrityError(ValueError):
    """Recorded spans are inconsistent; the trajectory is not exported."""


class ExportError(ValueError):
    pass


@dataclass
class SftExample:
    prompt: str
    completion: str
    mask_spans: list[tuple[int, int]]
    meta: dict = field(default_factory=dict)

    def unmasked_text(self) -> str:
        out, pos = [], 0
        for s, e in self.mask_spans:
            out.append(self.completion[pos:s])
            pos = e
        out.append(self.completion[pos:])
        return "".join(out)

    def to_dict(self) -> dict:
        return {"prompt": self.prompt, "completion": self.completion,
                "mask_spans": [[s, e] for s, e in self.mask_spans], "meta": self.meta}


def to_sft_example(t: Trajectory, template: Callable[[str], str] | None = None) -> SftExample:
    """Turn an answered trajectory into a prompt/completion pair with mask spans.

    ``completion`` is ``raw_text`` after the synthesis prompt; every injected
    span (retrieved summaries, limit notices) becomes a completion-local
    ``(start, end)`` mask. ``template`` renders the training prompt from the
    question and defaults to the synthesis prompt.
    """
    if t.stop_reason != "answered":
        raise ExportError(f"{t.id}: only answered trajectories are exported (got {t.stop_reason})")
    offset = len(t.prompt)
    if not t.raw_text.startswith(t.prompt):
        raise IntegrityError(f"{t.id}: raw_text does not start with the prompt")
    spans = sorted((s.start, s.end) for s in t.spans)
    prev_end = offset
    for s, e in spans:
        if s < prev_end or e < s or e > len(t.raw_text):
            raise IntegrityError(f"{t.id}: span ({s}, {e}) overlaps or is out of bounds")
        prev_end = e
    prompt = template(t.query.question) if template else t.prompt
    return SftExample(
        prompt=prompt,
        completion=t.raw_text[offset:],
        mask_spans=[(s - offset, e - offset) for s, e in spans],
        meta={"trajectory_id": t.id, "question_id": t.query.id, "source": t.query.record.source},
    )


# --- DPO --------------------------------------------------------------------

@dataclass
class DpoPair:
    prompt: str
    chosen: str
    rejected: str
    question_id: str
    chosen_id: str = ""
    rejected_id: str = ""

    def to_dict(self) -> dict:
        return {"prompt": self.prompt, "chosen": self.chosen, "rejected": self.rejected,
                "meta": {"question_id": self.question_id, "chosen_id": self.chosen_id,
                         "rejected_id": self.rejected_id}}


def passes_checks(t: Trajectory, cfg: CurationConfig, oracle: Oracle | None = None) -> bool:
    if not filter_format(t, cfg).passed:
        return False
    return filter_reasoning_path(collect_metadata(t, t.query.record.gold_answers, oracle, cfg), cfg)


def build_dpo_pairs(strong: Mapping[str, Sequence[Trajectory]], weak: Mapping[str, Sequence[Trajectory]],
                    cfg: CurationConfig | None = None,
                    template: Callable[[str], str] | None = None) -> list[DpoPair]:
    """One preference pair per question with a passing strong and a failing weak response.

    Positives are strong-model trajectories passing the format and
    reasoning-path checks, taken in selection order (fewest searches first).
    Negatives are weak-model trajectories failing either check, first in
    input order. Questions are visited in ``strong`` order.
    """
    cfg = cfg or CurationConfig()
    render = template or (lambda q: render_reasoning_prompt(q, LoopConfig()))
    pairs = []
    for qid, strong_ts in strong.items():
        if qid not in weak:
            continue
        positives = [(t, collect_metadata(t, t.query.record.gold_answers, None, cfg))
                     for t in strong_ts if passes_checks(t, cfg)]
        negatives = [t for t in weak[qid] if not passes_checks(t, cfg)]
        if not positives or not negatives:
            continue
        chosen = positives[rank_survivors(positives)[0]][0]
        rejected = negatives[0]
        c_text, r_text = chosen.raw_text[len(chosen.prompt):], rejected.raw_text[len(rejected.prompt):]
        if c_text == r_text:
            continue
        pairs.append(DpoPair(render(chosen.query.question), c_text, r_text, qid, chosen.id, rejected.id))
    return pairs


# --- RL reward -----------------------------------------------------------------

@dataclass(frozen=True)
class RewardBreakdown:
    answer_f1: float
    penalty: float
    flags: frozenset[str]

    @property
    def total(self) -> float:
        return self.answer_f1 + self.penalty

    def to_dict(self, trajectory_id: str = "") -> dict:
        return {"trajectory_id": trajectory_id, "answer_f1": self.answer_f1,
                "flags": sorted(self.flags), "total": self.total}


def is_gibberish(text: str, nonprintable_ratio: float = NONPRINTABLE_RATIO,
                 repeated_share: float = REPEATED_4GRAM_SHARE) -> bool:
    """Heuristic: too many non-printable characters or too many repeated 4-grams.

    Whitespace is not counted as non-printable. The repeated share is
    ``(occurrences - distinct) / occurrences`` over whitespace-token 4-grams.
    """
    if text:
        bad = sum(1 for ch in text if not ch.isprintable() and not ch.isspace())
        if bad / len(text) > nonprintable_ratio:
            return True
    toks = text.split()
    if len(toks) >= 4:
        grams = [tuple(toks[i : i + 4]) for i in range(len(toks) - 3)]
        if (len(grams) - len(set(grams))) / len(grams) > repeated_share:
            return True
    return False


def segment_lengths(t: Trajectory, tokenizer: Tokenizer = whitespace_tokens) -> list[int]:
    """Generated-token length of the text between consecutive retrievals."""
    lengths, current = [], []
    for turn in t.turns:
        current.append(turn.reasoning)
        if turn.search is not None:
            lengths.append(tokenizer("".join(current)))
            current = []
    lengths.append(tokenizer("".join(current)))
    return lengths


def rl_reward(t: Trajectory, gold: Sequence[str], tokenizer: Tokenizer = whitespace_tokens,
              markers: Sequence[str] = ("alternatively", "wait", "hmm"),
              result_markers: tuple[str, str] = (BEGIN_RESULT, END_RESULT)) -> RewardBreakdown:
    """Answer F1 plus a flat -2 penalty when any quality flag fires.

    Flags: document markers typed by the model itself; gibberish; more than
    5 hesitation markers; no boxed answer, more than 8 retrievals, or more
    than 8,096 tokens of reasoning between two retrievals.
    """
    text = t.generated_text
    answer = t.final_answer if t.final_answer is not None else extract_final_answer(text)
    answer_f1 = best_f1(answer, gold) if answer is not None else 0.0
    flags = set()
    if any(m in text for m in result_markers):
        flags.add("self_retrieved_content")
    if is_gibberish(text):
        flags.add("gibberish")
    if count_phrases(text, markers) > MAX_MARKERS:
        flags.add("excessive_markers")
    if (answer is None or t.search_calls > MAX_RETRIEVAL_STEPS
            or max(segment_lengths(t, tokenizer)) > MAX_SEGMENT_TOKENS):
        flags.add("missing_box_or_overlong")
    return RewardBreakdown(answer_f1, FORMAT_PENALTY if flags else 0.0, frozenset(flags))
