"""Hand-construction helpers for trajectories and queries used across tests."""

from __future__ import annotations

from deepsearch_data.corpus import AnnotatedQuery, QaRecord, count_interrogatives
from deepsearch_data.gateways import SearchResult
from deepsearch_data.orchestrator import (
    BEGIN_SEARCH,
    END_SEARCH,
    LoopConfig,
    TrajectoryBuilder,
    render_reasoning_prompt,
)

STAMP = "1970-01-01T00:00:00+00:00"


def query(qid="q1", question="Who wrote Dune?", golds=("Frank Herbert",), domain="literature",
          keywords=("dune",)) -> AnnotatedQuery:
    rec = QaRecord(qid, question, tuple(golds), "test")
    return AnnotatedQuery(rec, domain, tuple(keywords), count_interrogatives(question))


def hit(text: str, rank: int = 1) -> SearchResult:
    return SearchResult(rank, f"https://doc.example/{rank}", f"Doc {rank}", text, STAMP)


def trajectory(q: AnnotatedQuery, steps, candidate_index: int = 0, stop_reason: str = "answered",
               answer: str | None = None, prompt: str | None = None):
    """Build a trajectory from ``steps``.

    Each step is a plain string (reasoning without a search), a tuple
    ``(reasoning, sub_query, summary)`` which appends the search tokens to
    the reasoning and injects ``summary``, or ``("notice", text)``.
    """
    prompt = prompt if prompt is not None else render_reasoning_prompt(q.question, LoopConfig())
    b = TrajectoryBuilder(q, prompt)
    b.traj.candidate_index = candidate_index
    for step in steps:
        if isinstance(step, str):
            b.generate(step)
        elif step[0] == "notice":
            b.notice(step[1])
        else:
            reasoning, sub, summary = step
            b.generate(f"{reasoning}{BEGIN_SEARCH}{sub}{END_SEARCH}")
            b.search(sub, [hit(summary)], summary)
    if answer is None and stop_reason == "answered":
        from deepsearch_data.orchestrator import extract_final_answer

        answer = extract_final_answer(b.traj.generated_text)
    return b.finish(stop_reason, answer)


def random_reasoner_script(rng):
    """A reasoner whose reply each turn is drawn from a mix of behaviours.

    Covers well-formed searches, repeated searches, unterminated begin
    tokens, plain musing, boxed answers, searches and answers in one reply,
    empty replies and long rambles that eat into the token budget.
    """
    from deepsearch_data.orchestrator import BEGIN_RESULT, END_RESULT

    weights = [rng.random() for _ in range(9)]

    def reply(request):
        kind = rng.choices(range(9), weights)[0]
        if kind == 0:
            return f"I need to look up item {rng.randint(0, 4)}. {BEGIN_SEARCH}topic {rng.randint(0, 4)}{END_SEARCH}"
        if kind == 1:
            return f"Let me search {BEGIN_SEARCH}unterminated query"
        if kind == 2:
            return "Hmm, wait. Alternatively I could think more about it."
        if kind == 3:
            return f"So the answer is \\boxed{{answer {rng.randint(0, 3)}}}."
        if kind == 4:
            return f"{BEGIN_SEARCH}both{END_SEARCH} and \\boxed{{early}}"
        if kind == 5:
            return ""
        if kind == 6:
            return "ramble " * rng.randint(50, 400)
        if kind == 7:
            # the model types document markers itself
            return f"{BEGIN_RESULT}made up{END_RESULT} more thinking"
        return f"{BEGIN_SEARCH}   {END_SEARCH} empty query"

    return reply
