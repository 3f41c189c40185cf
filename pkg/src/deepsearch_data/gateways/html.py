"""Best-effort HTML to plain-text conversion for retrieved web pages."""

from __future__ import annotations

from html.parser import HTMLParser

DEFAULT_DOC_CHAR_BUDGET = 4_000

_SKIP_TAGS = frozenset({"script", "style", "noscript", "template"})


class _TextCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        else:
            # block-ish boundaries must not glue neighbouring words together
            self.parts.append(" ")

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS:
            self._skip_depth = max(0, self._skip_depth - 1)
        else:
            self.parts.append(" ")

    def handle_data(self, data):
        if not self._skip_depth:
            self.parts.append(data)


def _single_pass(html: str, budget: int | None) -> str:
    parser = _TextCollector()
    try:
        parser.feed(html)
        parser.close()
    except Exception:  # HTMLParser can still choke on pathological input
        return " ".join(html.split())[:budget] if budget else " ".join(html.split())
    text = " ".join("".join(parser.parts).split())
    if budget is not None and len(text) > budget:
        text = text[:budget].rstrip()
    return text


def extract_text(html: str, budget: int | None = DEFAULT_DOC_CHAR_BUDGET) -> str:
    """Strip markup from ``html`` and return collapsed plain text.

    Script/style bodies are dropped, tags removed, entities decoded and all
    whitespace runs collapsed to one space. The result is cut to ``budget``
    characters (``None`` disables the cut).

    Decoding can surface new markup (``&lt;b&gt;`` becomes ``<b>``), so the
    pass is repeated until the text stops changing. That makes the function
    idempotent and guarantees the output carries no parseable tags.
    """
    text = html
    for _ in range(64):
        nxt = _single_pass(text, budget)
        if nxt == text:
            return nxt
        text = nxt
    return text
