"""QA dataset ingestion and query annotation (domain, keywords, interrogatives)."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import prompts
from .gateways.base import GatewayError, user_request

INTERROGATIVES = ("what", "when", "where", "who", "whom", "whose", "which", "why", "how")

DEFAULT_DOMAINS = (
    "film", "geography", "politics", "history", "science", "sports", "music", "literature",
    "television", "business", "technology", "art", "religion", "military", "medicine", "other",
)
OTHER = "other"
MAX_KEYWORD_WORDS = 5

_ANSWER_KEYS = ("gold_answers", "answers", "golden_answers", "answer")


class DatasetFormatError(ValueError):
    """A dataset row could not be parsed; the message names the line."""


class AnnotationError(RuntimeError):
    """Annotation failed for one record.

    ``code`` is ``"llm_failure"`` when the backend gave up and
    ``"unparsable"`` when it answered with something we cannot read.
    """

    def __init__(self, record_id: str, code: str, detail: str = ""):
        super().__init__(f"annotation of {record_id} failed ({code}): {detail}")
        self.record_id = record_id
        self.code = code


@dataclass(frozen=True)
class QaRecord:
    id: str
    question: str
    gold_answers: tuple[str, ...]
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "gold_answers", tuple(self.gold_answers))
        if not self.question.strip():
            raise ValueError(f"record {self.id}: empty question")
        if not self.gold_answers:
            raise ValueError(f"record {self.id}: gold_answers must be non-empty")

    def to_dict(self) -> dict:
        return {"id": self.id, "question": self.question,
                "gold_answers": list(self.gold_answers), "source": self.source}

    @classmethod
    def from_dict(cls, d: dict) -> "QaRecord":
        return cls(d["id"], d["question"], tuple(d["gold_answers"]), d.get("source", ""))


@dataclass(frozen=True)
class AnnotatedQuery:
    record: QaRecord
    domain: str
    keywords: tuple[str, ...] = field(default=())
    interrogative_count: int = 0

    @property
    def id(self) -> str:
        return self.record.id

    @property
    def question(self) -> str:
        return self.record.question

    def to_dict(self) -> dict:
        d = self.record.to_dict()
        d.update(domain=self.domain, keywords=list(self.keywords),
                 interrogative_count=self.interrogative_count)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotatedQuery":
        return cls(QaRecord.from_dict(d), d["domain"], tuple(d.get("keywords", ())),
                   int(d.get("interrogative_count", count_interrogatives(d["question"]))))


def _answers_from(row: dict) -> list[str] | None:
    for key in _ANSWER_KEYS:
        if key in row and row[key] not in (None, "", []):
            val = row[key]
            answers = [val] if isinstance(val, str) else [str(a) for a in val]
            answers = [a for a in answers if a.strip()]
            return answers or None
    return None


def _split_tsv_answers(cell: str) -> list[str]:
    cell = cell.strip()
    if cell.startswith("["):
        return [str(a) for a in json.loads(cell)]
    return [a for a in cell.split("|") if a.strip()]


def _make_record(row: dict, lineno: int, source: str, index: int, seen: set[str]) -> QaRecord:
    question = row.get("question")
    if not isinstance(question, str) or not question.strip():
        raise DatasetFormatError(f"line {lineno}: missing question")
    answers = _answers_from(row)
    if not answers:
        raise DatasetFormatError(f"line {lineno}: missing gold_answers")
    src = row.get("source") or source
    rid = str(row["id"]) if row.get("id") not in (None, "") else f"{src}-{index}"
    if rid in seen:
        raise DatasetFormatError(f"line {lineno}: duplicate id {rid!r}")
    seen.add(rid)
    return QaRecord(rid, question, tuple(answers), src)


def load_qa_dataset(path: str | Path, format: str = "jsonl", source: str | None = None) -> list[QaRecord]:
    """Read a QA dataset into ``QaRecord`` objects, preserving file order.

    JSONL rows need ``question`` plus one of ``gold_answers``/``answers``/
    ``golden_answers``/``answer``. TSV files need a header row with
    ``question`` and ``answers`` (or ``gold_answers``) columns; answer cells
    are a JSON list or ``|``-separated. Missing ids become ``<source>-<row>``.
    """
    path = Path(path)
    source = source or path.stem
    records: list[QaRecord] = []
    seen: set[str] = set()
    if format == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DatasetFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
                if not isinstance(row, dict):
                    raise DatasetFormatError(f"line {lineno}: expected a JSON object")
                records.append(_make_record(row, lineno, source, len(records), seen))
    elif format == "tsv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh, delimiter="\t")
            for row in reader:
                lineno = reader.line_num
                row = dict(row)
                for key in ("answers", "gold_answers"):
                    if row.get(key):
                        try:
                            row[key] = _split_tsv_answers(row[key])
                        except json.JSONDecodeError as exc:
                            raise DatasetFormatError(f"line {lineno}: bad answers cell ({exc.msg})") from exc
                records.append(_make_record(row, lineno, source, len(records), seen))
    else:
        raise ValueError(f"unsupported dataset format {format!r}")
    return records


def count_interrogatives(question: str, lexicon: Iterable[str] = INTERROGATIVES) -> int:
    """Count case-insensitive whole-word occurrences of interrogative terms."""
    words = "|".join(re.escape(w) for w in lexicon)
    if not words:
        return 0
    return len(re.findall(rf"\b(?:{words})\b", question, flags=re.IGNORECASE))


def normalize_keywords(keywords: Iterable[str], max_words: int = MAX_KEYWORD_WORDS) -> tuple[str, ...]:
    """Lowercase, trim, collapse whitespace and deduplicate (first occurrence wins).

    Phrases longer than ``max_words`` words are dropped.
    """
    out: list[str] = []
    for kw in keywords:
        norm = " ".join(str(kw).lower().split())
        if norm and len(norm.split()) <= max_words and norm not in out:
            out.append(norm)
    return tuple(out)


def _parse_annotation(text: str) -> dict:
    start, end = text.find("{"), text.rfind("}")
    if start == -1 or end <= start:
        raise ValueError("no JSON object in reply")
    obj = json.loads(text[start : end + 1])
    if not isinstance(obj, dict) or not isinstance(obj.get("domain"), str):
        raise ValueError("reply lacks a string 'domain'")
    kws = obj.get("keywords", [])
    if isinstance(kws, str):
        kws = [k for k in kws.split(",")]
    if not isinstance(kws, list):
        raise ValueError("'keywords' is not a list")
    return {"domain": obj["domain"], "keywords": kws}


def annotate_query(record: QaRecord, llm, label_set: Iterable[str] = DEFAULT_DOMAINS, **gen) -> AnnotatedQuery:
    """Ask ``llm`` for the record's domain and keywords.

    Domains outside ``label_set`` collapse to ``"other"``. The interrogative
    count is always computed locally.
    """
    labels = [label.strip().lower() for label in label_set]
    if not labels:
        raise ValueError("label_set must be non-empty")
    request = user_request(
        prompts.ANNOTATION.substitute(labels=", ".join(labels), question=record.question), **gen
    )
    try:
        reply = llm.complete(request).text
    except GatewayError as exc:
        raise AnnotationError(record.id, "llm_failure", str(exc)) from exc
    try:
        parsed = _parse_annotation(reply)
    except (ValueError, json.JSONDecodeError) as exc:
        raise AnnotationError(record.id, "unparsable", str(exc)) from exc
    domain = " ".join(parsed["domain"].lower().split())
    return AnnotatedQuery(
        record=record,
        domain=domain if domain in labels else OTHER,
        keywords=normalize_keywords(parsed["keywords"]),
        interrogative_count=count_interrogatives(record.question),
    )
