"""Prompt templates for every LLM role in the pipeline."""

from __future__ import annotations

from string import Template

ANNOTATION = Template("""\
You label open-domain questions for a data-selection pipeline.

1. Pick the single best domain for the question from this list:
$labels
2. Extract the question's keywords: its core semantic constituents, namely
   key entities (e.g. films, people, locations), critical attributes
   (e.g. age, duration, population), core relationships (e.g. comparison,
   causality) and measurement dimensions (e.g. time, quantity). Use generic
   category words rather than proper names, at most five words each.

Example: "Which film whose director is younger, Charge It To Me or Danger: Diabolik?"
-> {"domain": "film", "keywords": ["film", "age"]}

Reply with one JSON object {"domain": ..., "keywords": [...]} and nothing else.

Question: $question
""")

REASONING = Template("""\
You are a reasoning assistant with the ability to perform web searches to help \
you answer the user's question accurately.

- To perform a search, write $begin_search your query here $end_search.
- The system will then search and analyze the relevant web pages, and return \
the useful information as $begin_result ...search results... $end_result.

You may repeat the search process up to $max_searches times when necessary.
Once you have all the information you need, continue your reasoning and put \
the final answer in \\boxed{}.

Question: $question

""")

SUMMARIZE = Template("""\
**Task Instruction:**

You analyze retrieved web pages for a reasoning process. Based on the original \
question and the current search query, extract the information from the \
documents that helps answer the query, and integrate it into a concise summary.

If the pages contain nothing helpful, write exactly "No helpful information found."

End your reply with:

**Final Information**

<the extracted information>

**Original Question:**
$question

**Current Search Query:**
$sub_query

**Searched Web Pages:**
$documents
""")

JUDGE = Template("""\
Given a question, its gold answer(s) and a predicted answer, decide whether the \
prediction is correct. Meaning matters, not wording.

Question: $question
Gold answer(s): $golds
Predicted answer: $pred

Reply with exactly one word: Correct or Incorrect.
""")

JUDGE_REASK = "Your previous reply could not be parsed. Reply with exactly one word: Correct or Incorrect."
