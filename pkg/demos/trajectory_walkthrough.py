"""Follow one question through the reasoning loop, SFT export and reward.

Run with ``python demos/trajectory_walkthrough.py``. The reasoner and
summarizer are scripted and search is served from an in-memory table, so the
output is the same on every run and needs no network.
"""

from deepsearch_data.corpus import AnnotatedQuery, QaRecord
from deepsearch_data.evaluation import best_f1
from deepsearch_data.export import rl_reward, to_sft_example
from deepsearch_data.gateways import FixtureSearchProvider, ScriptedChat, SearchClient, fixed_clock
from deepsearch_data.orchestrator import LoopConfig, run_trajectory

QUESTION = "Which film has the director who was born later, Charge It To Me or Danger: Diabolik?"
GOLD = ("Danger: Diabolik",)

# each entry is one reasoner turn; the loop stops a turn at the end-of-query token
REASONER = [
    "I need the birth years of both directors. <|begin_search_query|>Charge It To Me director<|end_search_query|>",
    " Roy William Neill directed it. <|begin_search_query|>Danger: Diabolik director born<|end_search_query|>",
    " Mario Bava was born in 1914, Neill in 1887, so the answer is \\boxed{Danger: Diabolik}",
]
SUMMARIES = [
    "**Final Information**\n\nCharge It To Me (1919) was directed by Roy William Neill, born 1887.",
    "**Final Information**\n\nDanger: Diabolik (1968) was directed by Mario Bava, born 1914.",
]
SEARCH_TABLE = {
    "charge it to me director": [{"url": "https://ex/1", "title": "Charge It To Me",
                                  "html_or_text": "<p>Directed by Roy William Neill (born 1887).</p>"}],
    "danger: diabolik director born": [{"url": "https://ex/2", "title": "Danger: Diabolik",
                                        "html_or_text": "<p>Directed by Mario Bava (born 1914).</p>"}],
}


def main():
    q = AnnotatedQuery(QaRecord("demo-1", QUESTION, GOLD, "demo"), "film", ("film", "director"), 2)
    search = SearchClient(FixtureSearchProvider(SEARCH_TABLE), clock=fixed_clock())
    t = run_trajectory(q, LoopConfig(), ScriptedChat(REASONER), search, ScriptedChat(SUMMARIES), seed=0)

    print(f"stop_reason={t.stop_reason}  searches={t.search_calls}  answer={t.final_answer!r}")
    print(f"answer F1 against gold: {best_f1(t.final_answer or '', GOLD):.3f}\n")

    print("completion as the model saw it (injected text in [brackets]):")
    body, offset, pos = t.raw_text[len(t.prompt):], len(t.prompt), 0
    pieces = []
    for span in t.spans:
        pieces.append(body[pos : span.start - offset])
        pieces.append("[" + body[span.start - offset : span.end - offset].strip() + "]")
        pos = span.end - offset
    pieces.append(body[pos:])
    print("".join(pieces), "\n")

    ex = to_sft_example(t)
    print(f"SFT mask spans (excluded from loss): {ex.mask_spans}")
    print(f"unmasked text equals the model's own tokens: {ex.unmasked_text() == t.generated_text}\n")

    r = rl_reward(t, list(GOLD))
    print(f"reward: answer_f1={r.answer_f1} penalty={r.penalty} flags={sorted(r.flags)} total={r.total}")


if __name__ == "__main__":
    main()
