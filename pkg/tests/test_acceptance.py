"""Acceptance criteria 1-10, each at its stated scale and tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary (see
conftest.py). Expected values for the curation, reward and DPO fixtures were
traced by hand from the filter and reward rules and are frozen below.
"""

import json
import math
import random
import time
from pathlib import Path

import pytest

from builders import query, random_reasoner_script, trajectory
from deepsearch_data.backends import FIXTURE20
from deepsearch_data.cli import main
from deepsearch_data.config import PipelineConfig
from deepsearch_data.corpus import AnnotatedQuery, QaRecord
from deepsearch_data.curation import CurationConfig, curate
from deepsearch_data.evaluation import f1
from deepsearch_data.export import SftExample, build_dpo_pairs, rl_reward, to_sft_example
from deepsearch_data.gateways import FixtureSearchProvider, ScriptedChat, SearchClient, fixed_clock
from deepsearch_data.jsonio import read_jsonl
from deepsearch_data.orchestrator import (
    BEGIN_RESULT,
    BEGIN_SEARCH,
    END_RESULT,
    LoopConfig,
    Trajectory,
    run_trajectory,
)
from deepsearch_data.sampler import sample_with_report, sample_diverse
from f1_oracle import oracle_f1
from reference_sampler import reference_sample


def criterion(n, title):
    return pytest.mark.criterion(n, title)


# --- 1 & 2: sampler -------------------------------------------------------------

def _corpus(rng, max_items=500, max_domains=8):
    domains = [f"dom{j}" for j in range(rng.randint(1, max_domains))]
    vocab = [f"kw{v}" for v in range(rng.randint(3, 60))]
    items = []
    for i in range(rng.randint(0, max_items)):
        rec = QaRecord(f"r{i}", f"question {i}?", ("a",), "synthetic")
        kws = tuple(rng.sample(vocab, rng.randint(0, min(4, len(vocab)))))
        items.append(AnnotatedQuery(rec, rng.choice(domains), kws, rng.randint(0, 4)))
    return items


@criterion(1, "sampler equals step-by-step reference on 200 corpora, < 1 s each")
def test_c1_sampler_oracle_equivalence():
    rng = random.Random(20240601)
    for _ in range(200):
        data = _corpus(rng)
        n = rng.randint(1, 120)
        start = time.perf_counter()
        got = sample_diverse(data, n)
        elapsed = time.perf_counter() - start
        assert [q.id for q in got] == [q.id for q in reference_sample(data, n)]
        assert elapsed < 1.0


@criterion(2, "sampler invariants hold on 1,000 random corpora")
def test_c2_sampler_invariants():
    rng = random.Random(7)
    violations = 0
    for _ in range(1000):
        data = _corpus(rng, max_items=120)
        n = rng.randint(1, 60)
        out, report = sample_with_report(data, n)
        m = len({q.domain for q in data})
        ok = len({q.id for q in out}) == len(out) and len(out) <= n
        if m:
            quota = math.ceil(n / m)
            ok &= all(sum(q.domain == d for q in out) <= quota for d in {q.domain for q in out})
        groups = {}
        for q, key in zip(out, report.acceptance):
            groups.setdefault(key, []).append(q)
        for members in groups.values():
            seen = set()
            for q in members:
                ok &= seen.isdisjoint(q.keywords)
                seen |= set(q.keywords)
        ok &= [q.id for q in sample_diverse(list(data), n)] == [q.id for q in out]
        violations += not ok
    assert violations == 0


# --- 3: F1 ----------------------------------------------------------------------

@criterion(3, "f1 equals the bag-overlap oracle on 1,000 pairs; Barack Obama/Obama = 2/3")
def test_c3_f1_oracle():
    rng = random.Random(99)
    vocab = ["Barack", "obama", "the", "an", "Paris,", "new", "York", "city", "x", "!", "état", "a"]
    for _ in range(1000):
        a = " ".join(rng.choice(vocab) for _ in range(rng.randint(0, 7)))
        b = " ".join(rng.choice(vocab) for _ in range(rng.randint(0, 7)))
        assert f1(a, b) == oracle_f1(a, b)
    assert abs(f1("Barack Obama", "Obama") - 2 / 3) <= 1e-12


# --- 4: orchestrator budgets ------------------------------------------------------

def _searcher():
    return SearchClient(FixtureSearchProvider(default=lambda q: [{"url": "u", "title": q, "html_or_text": q}]),
                        clock=fixed_clock())


def _roundtrip_ok(t: Trajectory) -> bool:
    body, offset, pos, kept = t.raw_text[len(t.prompt):], len(t.prompt), 0, []
    for s in sorted(t.spans, key=lambda s: s.start):
        kept.append(body[pos : s.start - offset])
        pos = s.end - offset
    kept.append(body[pos:])
    return "".join(kept) == t.generated_text


@criterion(4, "500 random reasoners: search_calls <= 10, turns <= 15, exact span round-trip")
def test_c4_orchestrator_budget_safety():
    q = query("b1", "What is the capital of France?", ("Paris",))
    summarizer = ScriptedChat(["**Final Information**\n\nParis is the capital."])
    for seed in range(500):
        rng = random.Random(seed)
        t = run_trajectory(q, LoopConfig(), ScriptedChat(random_reasoner_script(rng)), _searcher(), summarizer,
                           seed=seed)
        assert t.search_calls <= 10 and t.total_turns <= 15
        assert _roundtrip_ok(t)


# --- 6: curation fixture ------------------------------------------------------------

def _cq(n):
    return query(f"cq{n}", f"Curation question {n}?", ("alpha",))


def _searches(k, distinct):
    return [("step ", f"sub query {i % distinct}", "doc") for i in range(k)]


def _c(q, i, k, distinct, pad=3):
    """Correct, clean answer after ``k`` searches; ``pad`` filler words vary length."""
    return trajectory(q, _searches(k, max(distinct, 1)) + [" fine" * pad + " \\boxed{alpha}"], i)


def _w(q, i):
    return trajectory(q, [" \\boxed{beta}"], i)


def _f(q, i):
    return trajectory(q, ["no final answer"], i, stop_reason="max_turns")


def _m(q, i):
    return trajectory(q, [f"{BEGIN_SEARCH}never closed \\boxed{{alpha}}"], i)


def _r(q, i, correct=True):
    return trajectory(q, ["wait " * 6 + ("\\boxed{alpha}" if correct else "\\boxed{beta}")], i)


def curation_fixture():
    q = {n: _cq(n) for n in range(1, 7)}
    long_text = " ".join(f"w{j}" for j in range(8097))
    return {
        # 6/10 correct (4 clean + reflective + malformed); survivors use 2,1,3,1 searches;
        # the shorter of the two 1-search answers (index 9) wins
        "cq1": [_c(q[1], 0, 2, 2), _w(q[1], 1), _c(q[1], 2, 1, 1, pad=5), _w(q[1], 3), _f(q[1], 4),
                _c(q[1], 5, 3, 3), _r(q[1], 6), _w(q[1], 7), _m(q[1], 8), _c(q[1], 9, 1, 1, pad=1)],
        # every attempt correct: too easy
        "cq2": [_c(q[2], i, 0, 0) for i in range(9)] + [_m(q[2], 9)],
        # nothing correct: too few correct
        "cq3": [_w(q[3], i) for i in range(7)] + [_f(q[3], i) for i in range(7, 10)],
        # 2-search tie broken by distinct sub-queries (index 1 has two)
        "cq4": [_c(q[4], 0, 2, 1), _c(q[4], 1, 2, 2)] + [_w(q[4], i) for i in range(2, 10)],
        # the only correct attempt over-reflects: question kept, no survivor
        "cq5": [_r(q[5], 0)] + [_w(q[5], i) for i in range(1, 10)],
        # over-long correct attempt rejected; exactly 5 reflections still passes and needs 0 searches
        "cq6": [trajectory(q[6], [long_text + " \\boxed{alpha}"], 0),
                trajectory(q[6], ["wait " * 5 + "\\boxed{alpha}"], 1),
                _c(q[6], 2, 3, 3)] + [_w(q[6], i) for i in range(3, 10)],
    }


CURATION_EXPECTED_CHOSEN = [("cq1", "cq1#9"), ("cq4", "cq4#1"), ("cq6", "cq6#1")]
CURATION_EXPECTED_AUDIT = {"format": 6, "reasoning_path": 3, "difficulty": 16, "correctness": 27, "selection": 5}
CURATION_EXPECTED_PER_QUESTION = {
    "cq1": {"format": 2, "reasoning_path": 1, "correctness": 3, "selection": 3},
    "cq2": {"format": 1, "difficulty": 9},
    "cq3": {"format": 3, "difficulty": 7},
    "cq4": {"correctness": 8, "selection": 1},
    "cq5": {"reasoning_path": 1, "correctness": 9},
    "cq6": {"reasoning_path": 1, "correctness": 7, "selection": 1},
}


@criterion(6, "6x10 curation fixture yields the hand-traced curated set and audit counts")
def test_c6_curation_fixture():
    res = curate(curation_fixture(), CurationConfig())
    assert [(c.question_id, c.trajectory.id) for c in res.curated] == CURATION_EXPECTED_CHOSEN
    totals, per_q = {}, {}
    for e in res.audit.entries:
        totals[e.stage] = totals.get(e.stage, 0) + 1
        per_q.setdefault(e.question_id, {})
        per_q[e.question_id][e.stage] = per_q[e.question_id].get(e.stage, 0) + 1
    assert totals == CURATION_EXPECTED_AUDIT
    assert per_q == CURATION_EXPECTED_PER_QUESTION
    assert len(res.curated) + len(res.audit) == 60


# --- 5: mask integrity ------------------------------------------------------------------

@criterion(5, "every exported SftExample unmasks to the generated text byte-exactly")
def test_c5_mask_integrity(tmp_path):
    examples = []
    for group in curation_fixture().values():
        for t in group:
            if t.stop_reason == "answered":
                examples.append((to_sft_example(t), t.generated_text))
    q = query("m1", "What is the capital of France?", ("Paris",))
    summarizer = ScriptedChat(["**Final Information**\n\nParis."])
    for seed in range(300):
        t = run_trajectory(q, LoopConfig(), ScriptedChat(random_reasoner_script(random.Random(seed))),
                           _searcher(), summarizer)
        if t.stop_reason == "answered":
            examples.append((to_sft_example(t), t.generated_text))
    # the bundled fixture, exported through the CLI in replay mode
    out = tmp_path / "o"
    common = ["--replay", str(FIXTURE20 / "replay"), "--out", str(out), "--corpus", str(FIXTURE20 / "corpus.jsonl"),
              "--set", "sample_size=20"]
    for cmd in ("annotate", "sample", "synthesize", "curate", "export-sft"):
        assert main([cmd, *common]) == 0
    trajs = {d["id"]: d for d in read_jsonl(out / "trajectories.jsonl")}
    for row in read_jsonl(out / "sft.jsonl"):
        t = Trajectory.from_dict(trajs[row["meta"]["trajectory_id"]])
        examples.append((SftExample(row["prompt"], row["completion"], [tuple(s) for s in row["mask_spans"]]),
                         t.generated_text))
    assert len(examples) > 100
    for ex, generated in examples:
        assert ex.unmasked_text().encode() == generated.encode()


# --- 7: reward -----------------------------------------------------------------------------

G = ["Barack Obama"]
RQ = query("rw", "Who was the 44th president?", G)
_DISTINCT_8097 = " ".join(f"t{j}" for j in range(8097))
# the boxed answer contributes two more tokens to its segment
_WORDS_8094 = " ".join(f"t{j}" for j in range(8094))
_WORDS_8095 = " ".join(f"t{j}" for j in range(8095))


def _searches_n(n):
    return [(f"step{i} ", f"q{i}", "doc") for i in range(n)]


def reward_cases():
    """(label, trajectory, expected total) with totals worked out by hand."""
    box = " \\boxed{Barack Obama}"
    return [
        ("clean, correct, one search", trajectory(RQ, _searches_n(1) + [box]), 1.0),
        ("partial answer F1 2/3", trajectory(RQ, [" \\boxed{Obama}"]), 2 / 3),
        ("wrong answer, no flags", trajectory(RQ, [" \\boxed{Paris}"]), 0.0),
        ("exactly 5 markers", trajectory(RQ, ["Wait " * 5 + box]), 1.0),
        ("6 markers, F1 0.5", trajectory(RQ, ["Wait " * 6 + "\\boxed{Barack Hussein}"]), -1.5),
        ("6 mixed markers", trajectory(RQ, ["Alternatively hmm wait Hmm, WAIT alternatively" + box]), -1.0),
        ("8 retrievals", trajectory(RQ, _searches_n(8) + [box]), 1.0),
        ("9 retrievals", trajectory(RQ, _searches_n(9) + [box]), -1.0),
        ("9 retrievals, wrong", trajectory(RQ, _searches_n(9) + [" \\boxed{nobody}"]), -2.0),
        ("no boxed answer", trajectory(RQ, ["I give up."], stop_reason="max_turns"), -2.0),
        ("8,096-token segment", trajectory(RQ, [_WORDS_8094 + box]), 1.0),
        ("8,097-token final segment", trajectory(RQ, [_WORDS_8095 + box]), -1.0),
        ("8,097 tokens between searches, F1 0.5",
         trajectory(RQ, _searches_n(1) + [(_DISTINCT_8097 + " ", "q9", "doc"), " \\boxed{Barack Hussein}"]), -1.5),
        ("model types a result marker", trajectory(RQ, [f"{BEGIN_RESULT}invented{END_RESULT}" + box]), -1.0),
        ("repeated 4-grams", trajectory(RQ, ["la " * 20 + "\\boxed{Barack Obama}"]), -1.0),
        ("non-printable characters", trajectory(RQ, ["\x07\x07\x07\x07\x07 ok" + box]), -1.0),
        ("several flags, one flat penalty", trajectory(RQ, _searches_n(9) + ["wait " * 7 + box]), -1.0),
        ("marker look-alikes are not markers", trajectory(RQ, ["Waiting on hmmm results, otherwise fine." + box]), 1.0),
        ("text-wrapped box", trajectory(RQ, [" \\boxed{\\text{Barack Obama}}"]), 1.0),
        ("markers inside retrieved content are ignored",
         trajectory(RQ, [("look ", "q", "Wait wait wait hmm hmm alternatively"), box]), 1.0),
    ]


@criterion(7, "20 hand-scored rewards match exactly; total in [-2, 1] over 10,000 random trajectories")
def test_c7_reward():
    cases = reward_cases()
    assert len(cases) == 20
    for label, t, expected in cases:
        assert rl_reward(t, G).total == expected, label
    rng = random.Random(5)
    pieces = ["wait ", "hmm ", "Alternatively ", "Barack ", "Obama ", "la la la la ", "\x00", "word ",
              f"{BEGIN_RESULT}", "\\boxed{Barack Obama}", "\\boxed{x}", f"{BEGIN_SEARCH}"]
    for _ in range(10_000):
        steps = []
        for _ in range(rng.randint(0, 11)):
            text = "".join(rng.choice(pieces) for _ in range(rng.randint(0, 8)))
            if rng.random() < 0.4:
                steps.append((text, f"q{rng.randint(0, 3)}", "doc"))
            else:
                steps.append(text)
        t = trajectory(RQ, steps or [""], stop_reason=rng.choice(["answered", "max_turns"]))
        total = rl_reward(t, G).total
        assert -2.0 <= total <= 1.0


# --- 8: DPO ------------------------------------------------------------------------------------

def dpo_fixture():
    d = {n: query(f"d{n}", f"DPO question {n}?", ("alpha",)) for n in range(1, 7)}

    def passing(q, i, searches=0):
        return trajectory(q, _searches(searches, max(searches, 1)) + [" clean \\boxed{alpha}"], i)

    strong = {
        "d1": [passing(d[1], 0)],
        "d2": [_f(d[2], 0), passing(d[2], 1, searches=2), passing(d[2], 2, searches=1)],
        "d3": [passing(d[3], 0)],
        "d4": [_f(d[4], 0), _r(d[4], 1)],
        "d5": [passing(d[5], 0, searches=1)],
    }
    weak = {
        "d1": [_r(d[1], 0)],
        "d2": [passing(d[2], 0), _r(d[2], 1, correct=False)],
        "d3": [passing(d[3], 0), passing(d[3], 1)],
        "d4": [_f(d[4], 0)],
        "d5": [_m(d[5], 0)],
        "d6": [_f(d[6], 0)],  # no strong pool for this question
    }
    return strong, weak


DPO_EXPECTED = [("d1", "d1#0", "d1#0"), ("d2", "d2#2", "d2#1"), ("d5", "d5#0", "d5#0")]


@criterion(8, "DPO fixture emits exactly the qualifying strong-pass/weak-fail pairs")
def test_c8_dpo_pairs():
    strong, weak = dpo_fixture()
    pairs = build_dpo_pairs(strong, weak, CurationConfig())
    assert [(p.question_id, p.chosen_id, p.rejected_id) for p in pairs] == DPO_EXPECTED
    for p in pairs:
        chosen = next(t for t in strong[p.question_id] if t.id == p.chosen_id)
        rejected = next(t for t in weak[p.question_id] if t.id == p.rejected_id)
        # completions keep the retrieved documents the model conditioned on
        assert p.chosen == chosen.raw_text[len(chosen.prompt):]
        assert p.rejected == rejected.raw_text[len(rejected.prompt):]


# --- 9: end-to-end replay ---------------------------------------------------------------------------

def _tree(root: Path) -> dict[str, bytes]:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@criterion(9, "two replay runs of the full pipeline are byte-identical, < 2 minutes")
def test_c9_replay_determinism(tmp_path):
    start = time.perf_counter()
    trees = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        common = ["--replay", str(FIXTURE20 / "replay"), "--out", str(out),
                  "--corpus", str(FIXTURE20 / "corpus.jsonl"), "--set", "sample_size=20"]
        for cmd in ("annotate", "sample", "synthesize", "curate", "export-sft", "reward", "stats"):
            assert main([cmd, *common]) == 0
        assert main(["eval", *common, "--metrics", "f1,judge,stages,stats"]) == 0
        assert main(["export-dpo", "--out", str(out), "--strong", str(out / "trajectories.jsonl"),
                     "--weak", str(out / "trajectories.jsonl")]) == 0
        trees.append(_tree(out))
    elapsed = time.perf_counter() - start
    assert trees[0] == trees[1]
    assert len(read_jsonl(tmp_path / "run1" / "sampled.jsonl")) >= 10
    assert json.loads(trees[0]["manifests/synthesize.json"])["summary"]["trajectories"] > 0
    assert elapsed < 120


# --- 10: config -----------------------------------------------------------------------------------------

@criterion(10, "default config serializes to 0.6 / 0.95 / 40 / 20,480 / 10 / 15 / 10")
def test_c10_config_fidelity():
    loop = PipelineConfig().to_dict()["loop"]
    got = (loop["temperature"], loop["top_p"], loop["top_k"], loop["max_tokens"],
           loop["max_search_calls"], loop["max_turns"], loop["candidates_per_query"])
    assert got == (0.6, 0.95, 40, 20480, 10, 15, 10)
