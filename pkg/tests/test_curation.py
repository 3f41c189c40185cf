import random

import pytest
from hypothesis import given, settings, strategies as st

from builders import query, trajectory
from deepsearch_data.curation import (
    CurationConfig,
    ResponseMetadata,
    SelectionError,
    collect_metadata,
    count_phrases,
    curate,
    filter_difficulty,
    filter_format,
    filter_reasoning_path,
    rl_candidate_filter,
    select_best,
)
from deepsearch_data.orchestrator import BEGIN_SEARCH, TrajectoryBuilder

Q = query("c1", "Capital of France?", ("Paris",))


def meta(steps=1, length=10, reflections=0, correct=True, distinct=1):
    return ResponseMetadata(steps, length, reflections, True, True, correct, distinct)


def test_zero_search_metadata():
    t = trajectory(Q, ["The answer is \\boxed{Paris}"])
    m = collect_metadata(t, ["Paris"])
    assert (m.search_steps, m.correct, m.format_valid, m.distinct_query_count) == (0, True, True, 0)


def test_reflection_count_rule():
    assert count_phrases("Alternatively, wait — alternatively", ("alternatively", "wait", "hmm")) == 3
    assert count_phrases("awaiting hmmm Waits", ("wait", "hmm")) == 0


def test_injected_text_is_not_counted():
    t = trajectory(Q, [("look", "capital", "alternatively alternatively wait"), "\\boxed{Paris}"])
    assert collect_metadata(t, ["Paris"]).reflection_count == 0


def test_distinct_queries_are_normalized():
    t = trajectory(Q, [("a", "Capital  France", "x"), ("b", "capital france", "y"), ("c", "other", "z"),
                       "\\boxed{Paris}"])
    assert collect_metadata(t, ["Paris"]).distinct_query_count == 2


def test_format_pass_and_failures():
    assert filter_format(trajectory(Q, ["fine \\boxed{Paris}"])).passed
    b = TrajectoryBuilder(Q, "P")
    b.generate(f"start {BEGIN_SEARCH}never closed \\boxed{{Paris}}")
    check = filter_format(b.finish("answered", "Paris"))
    assert not check.passed and check.reasons == ("malformed_search_tokens",)
    mixed = "English reasoning about the city. " * 2 + "这是一个很长的中文句子用于测试混合语言文字测试中"
    share = sum(1 for ch in mixed if "一" <= ch <= "鿿") / sum(ch.isalpha() for ch in mixed)
    assert share == pytest.approx(0.3)
    check = filter_format(trajectory(Q, [mixed + " \\boxed{Paris}"]))
    assert check.reasons == ("mixed_language",)
    assert filter_format(trajectory(Q, ["no box"], stop_reason="max_turns")).reasons == (
        "missing_boxed_answer", "not_answered")


def test_reasoning_path_thresholds():
    assert filter_reasoning_path(meta(reflections=0))
    assert not filter_reasoning_path(meta(reflections=6))
    assert filter_reasoning_path(meta(reflections=5))
    assert filter_reasoning_path(meta(length=8096)) and not filter_reasoning_path(meta(length=8097))


def test_difficulty():
    assert not filter_difficulty([meta(correct=True)] * 10)
    assert filter_difficulty([meta(correct=True)] * 4 + [meta(correct=False)] * 6)
    assert not filter_difficulty([meta(correct=False)] * 10)
    with pytest.raises(ValueError):
        filter_difficulty([])


def test_select_best():
    t = [trajectory(Q, ["\\boxed{Paris}"], candidate_index=i) for i in range(3)]
    assert select_best([(t[0], meta(steps=3)), (t[1], meta(steps=1)), (t[2], meta(steps=2))]) is t[1]
    assert select_best([(t[0], meta(steps=2, distinct=1)), (t[1], meta(steps=2, distinct=2))]) is t[1]
    assert select_best([(t[2], meta())]) is t[2]
    with pytest.raises(SelectionError):
        select_best([])


def test_all_fail_format_gives_empty_output_and_full_audit():
    ts = [trajectory(Q, ["no box"], candidate_index=i, stop_reason="max_turns") for i in range(4)]
    res = curate({"c1": ts})
    assert res.curated == [] and len(res.audit) == 4
    assert {e.stage for e in res.audit.entries} == {"format"}


def _q(qid):
    return query(qid, f"Question {qid}?", ("alpha",))


def test_three_by_four_fixture():
    # qa: 2 correct + 2 wrong -> kept; correct ones use 2 and 1 searches -> candidate 3 wins
    # qb: all 4 correct -> too easy, dropped
    # qc: 1 correct but it has 6 reflections; 3 wrong -> kept by difficulty, no survivor
    qa, qb, qc = _q("qa"), _q("qb"), _q("qc")
    cands = {
        "qa": [trajectory(qa, [("s", "a1", "x"), ("s", "a2", "y"), "\\boxed{alpha}"], 0),
               trajectory(qa, ["\\boxed{beta}"], 1),
               trajectory(qa, ["\\boxed{gamma}"], 2),
               trajectory(qa, [("s", "a1", "x"), "\\boxed{alpha}"], 3)],
        "qb": [trajectory(qb, ["\\boxed{alpha}"], i) for i in range(4)],
        "qc": [trajectory(qc, ["wait " * 6 + "\\boxed{alpha}"], 0)]
              + [trajectory(qc, ["\\boxed{beta}"], i) for i in range(1, 4)],
    }
    res = curate(cands)
    assert [(c.question_id, c.trajectory.candidate_index) for c in res.curated] == [("qa", 3)]
    stages = [(e.question_id, e.candidate_index, e.stage) for e in res.audit.entries]
    assert stages == [("qa", 1, "correctness"), ("qa", 2, "correctness"), ("qa", 0, "selection"),
                      ("qb", 0, "difficulty"), ("qb", 1, "difficulty"), ("qb", 2, "difficulty"),
                      ("qb", 3, "difficulty"), ("qc", 0, "reasoning_path"), ("qc", 1, "correctness"),
                      ("qc", 2, "correctness"), ("qc", 3, "correctness")]
    assert res.curated[0].runners_up == [cands["qa"][0]]


def test_duplicate_question_curated_once():
    qa = _q("qa")
    group = [trajectory(qa, ["\\boxed{alpha}"], 0), trajectory(qa, ["\\boxed{no}"], 1)]
    res = curate([("qa", group), ("qa", group)])
    assert len(res.curated) == 1
    assert [e.reason_code for e in res.audit.entries][-2:] == ["duplicate_question"] * 2


def _random_group(rng, qid):
    q = _q(qid)
    out = []
    for i in range(rng.randint(1, 6)):
        steps = []
        for s in range(rng.randint(0, 3)):
            steps.append(("w " * rng.randint(0, 3) + "wait " * rng.randint(0, 3), f"sub {rng.randint(0, 2)}", "doc"))
        final = rng.choice(["\\boxed{alpha}", "\\boxed{beta}", "no answer", f"{BEGIN_SEARCH}broken \\boxed{{alpha}}"])
        stop = "answered" if "boxed" in final else "max_turns"
        out.append(trajectory(q, steps + [final], i, stop_reason=stop))
    return out


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_curation_invariants(seed):
    rng = random.Random(seed)
    cands = {f"q{j}": _random_group(rng, f"q{j}") for j in range(rng.randint(1, 5))}
    cfg = CurationConfig()
    res = curate(cands, cfg)
    total = sum(len(v) for v in cands.values())
    assert total == len(res.curated) + len(res.audit)
    for item in res.curated:
        t, m = item.trajectory, item.metadata
        assert filter_format(t, cfg).passed and filter_reasoning_path(m, cfg) and m.correct
        group = [res.metadata[x.id] for x in cands[item.question_id]]
        assert filter_difficulty(group, cfg)
        for other in cands[item.question_id]:
            om = res.metadata[other.id]
            if filter_format(other, cfg).passed and filter_reasoning_path(om, cfg) and om.correct:
                assert om.search_steps >= m.search_steps
    again = curate({c.question_id: [c.trajectory] for c in res.curated}, cfg)
    assert [c.trajectory.id for c in again.curated] == [c.trajectory.id for c in res.curated]


def test_rl_candidate_filter():
    assert rl_candidate_filter([meta(correct=True)] + [meta(correct=False)] * 7)
    assert not rl_candidate_filter([meta(correct=True)] * 7 + [meta(correct=False)])
    assert not rl_candidate_filter([meta(correct=False)] * 8)
