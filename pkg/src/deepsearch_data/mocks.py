"""Heuristic stand-ins for every LLM role, used by ``--mock`` runs and demos.

They read the same prompts the real models get and answer deterministically
(varying only with the request seed), so the whole pipeline can run offline.
"""

from __future__ import annotations

import json
import re

from .corpus import DEFAULT_DOMAINS
from .evaluation import best_f1
from .gateways.base import ChatRequest
from .gateways.mock import ScriptedChat
from .orchestrator import BEGIN_RESULT, BEGIN_SEARCH, END_RESULT, END_SEARCH

_DOMAIN_HINTS = {
    "film": ("film", "movie", "director", "directed", "actor", "actress"),
    "music": ("song", "album", "band", "singer", "composer"),
    "sports": ("team", "league", "player", "cup", "olympic", "football"),
    "geography": ("river", "city", "country", "mountain", "capital", "located", "island"),
    "politics": ("president", "minister", "party", "election", "senator"),
    "history": ("war", "empire", "century", "king", "queen", "founded"),
    "science": ("element", "planet", "physicist", "chemist", "species", "discovered"),
    "literature": ("novel", "book", "author", "poet", "wrote"),
    "television": ("series", "episode", "show", "tv"),
    "business": ("company", "ceo", "founded", "brand"),
}
_STOP = set("the a an of in on at to for is was were be by and or with from that which who whom whose "
            "what when where why how did does do are this these those it its as".split())


def _field(prompt: str, label: str) -> str:
    m = re.search(rf"^{re.escape(label)}\s*(.*)$", prompt, flags=re.MULTILINE)
    return m.group(1).strip() if m else ""


def annotator_reply(request: ChatRequest) -> str:
    prompt = request.messages[-1].content
    question = _field(prompt, "Question:")
    words = re.findall(r"[a-z]+", question.lower())
    domain = "other"
    for label, hints in _DOMAIN_HINTS.items():
        if label in DEFAULT_DOMAINS and any(w in hints for w in words):
            domain = label
            break
    keywords = [w for w in words if w not in _STOP and len(w) > 3][:3]
    return json.dumps({"domain": domain, "keywords": keywords})


def summarizer_reply(request: ChatRequest) -> str:
    prompt = request.messages[-1].content
    m = re.search(r"^Title: (.*)$", prompt, flags=re.MULTILINE)
    title = m.group(1).strip() if m else ""
    return f"**Final Information**\n\n{title or 'No helpful information found.'}"


def judge_reply(request: ChatRequest) -> str:
    prompt = request.messages[0].content
    golds = [g.strip() for g in _field(prompt, "Gold answer(s):").split("|")]
    pred = _field(prompt, "Predicted answer:")
    return "Correct" if best_f1(pred, golds) >= 0.5 else "Incorrect"


def reasoner_reply(request: ChatRequest) -> str:
    """Plays one of five behaviours picked by ``seed % 5``.

    0 answers from memory without searching (usually wrong); 1-2 search once;
    3 searches twice; 4 searches once but hesitates a lot before answering.
    """
    question = _field(request.messages[0].content, "Question:")
    history = request.messages[-1].content if len(request.messages) > 1 else ""
    plan = (request.seed or 0) % 5
    done = history.count(BEGIN_RESULT)
    wanted = {0: 0, 1: 1, 2: 1, 3: 2, 4: 1}[plan]
    if done < wanted:
        sub = question if done == 0 else f"{question} details"
        lead = "Let me look this up." if done == 0 else "I should confirm with another search."
        return f"{lead} {BEGIN_SEARCH}{sub}{END_SEARCH}"
    if plan == 0:
        return "I believe I remember this one. The answer is \\boxed{unknown}."
    found = history.rsplit(BEGIN_RESULT, 1)[-1].split(END_RESULT, 1)[0].strip()
    hedge = "Wait, hmm. Alternatively, wait. Hmm, alternatively. " if plan == 4 else ""
    return f"{hedge}Based on the search results, the answer is \\boxed{{{found}}}."


def mock_reasoner() -> ScriptedChat:
    return ScriptedChat(reasoner_reply)


def mock_summarizer() -> ScriptedChat:
    return ScriptedChat(summarizer_reply)


def mock_annotator() -> ScriptedChat:
    return ScriptedChat(annotator_reply)


def mock_judge() -> ScriptedChat:
    return ScriptedChat(judge_reply)


def synthetic_hits(query: str) -> list[dict]:
    """Fallback search results for queries absent from a fixture."""
    return [
        {"url": f"https://example.org/{i}", "title": f"Page {i} about {query}",
         "html_or_text": f"<html><body><p>Background material {i} on {query}.</p></body></html>"}
        for i in (1, 2, 3)
    ]
