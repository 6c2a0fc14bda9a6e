"""Deterministic lexical-overlap extractive answerer.

Stands in for a pretrained extractive-QA model behind the same
interface: given a question and a context, return a verbatim span of
the context plus a confidence score, or abstain. The heuristic is
classic span ranking: candidate windows are scored by how close they
sit to the question's content words, whether their surface form agrees
with the question word (dates for "when", quantities for "how much",
capitalized names for "who"), and how little they merely echo the
question. Pure function of its inputs, so answers are reproducible and
the serving layer needs no locking.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

STOPWORDS = frozenset(
    """
    a an and are as at be been being by did do does for from had has have
    in into is it its of on or that the their there these this those to
    was were will with
    """.split()
)
WH_WORDS = frozenset("who whom whose what when where why how which".split())
MONTHS = frozenset(
    """
    january february march april may june july august september october
    november december jan feb mar apr jun jul aug sep sept oct nov dec
    """.split()
)
WEEKDAYS = frozenset(
    "monday tuesday wednesday thursday friday saturday sunday".split()
)

_TOKEN_RX = re.compile(r"\S+")
_DIGIT_RX = re.compile(r"\d")
_CURRENCY_RX = re.compile(r"[$€£¥₹]")

MAX_WINDOW_TOKENS = 6
NEIGHBORHOOD_TOKENS = 10


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    start: int
    end: int


@dataclass(frozen=True)
class Span:
    """A chosen answer: verbatim context slice with its character range."""

    text: str
    start: int
    end: int
    score: float


def _normalize(surface: str) -> str:
    return surface.strip("\"'`.,;:!?()[]{}").lower()


def tokenize(text: str) -> list[Token]:
    tokens = []
    for match in _TOKEN_RX.finditer(text):
        norm = _normalize(match.group())
        tokens.append(Token(match.group(), norm, match.start(), match.end()))
    return tokens


def _is_dateish(token: Token) -> bool:
    if token.norm in MONTHS or token.norm in WEEKDAYS:
        return True
    return bool(_DIGIT_RX.search(token.norm))


def _is_numberish(token: Token) -> bool:
    return bool(_DIGIT_RX.search(token.surface)) or bool(_CURRENCY_RX.search(token.surface))


def _is_nameish(token: Token) -> bool:
    if not token.surface or not token.surface[0].isupper():
        return False
    return token.norm not in STOPWORDS and token.norm not in WH_WORDS


_TYPE_PREDICATES = {
    "date": _is_dateish,
    "number": _is_numberish,
    "name": _is_nameish,
}


def question_type(question: str) -> str:
    """Map the interrogative opening onto the span shape it asks for."""
    norms = [t.norm for t in tokenize(question)][:4]
    joined = " ".join(norms)
    if "what date" in joined or "what time" in joined:
        return "date"
    if not norms:
        return "any"
    head = norms[0]
    if head == "when":
        return "date"
    if head == "how" and len(norms) > 1 and norms[1] in ("much", "many"):
        return "number"
    if head == "how" and len(norms) > 1 and norms[1] == "old":
        return "number"
    if head in ("who", "whom", "where"):
        return "name"
    return "any"


def _content_words(question: str) -> list[str]:
    out = []
    for token in tokenize(question):
        if token.norm and token.norm not in STOPWORDS and token.norm not in WH_WORDS:
            out.append(token.norm)
    return out


def _growth(size: int) -> float:
    # longer typed spans usually carry the complete value ("April 5, 2020"
    # over "2020"), so reward size a little, capped
    return min(1.0 + 0.08 * (size - 1), 1.24)


def _brevity(size: int) -> float:
    return 1.0 / (1.0 + 0.15 * (size - 1))


class LexicalOverlapModel:
    """Extractive answering by typed window ranking over the context."""

    def __init__(self, model_id: str):
        self.model_id = model_id

    def answer(self, question: str, context: str) -> Span | None:
        """Best-scoring context window, or None to abstain."""
        tokens = tokenize(context)
        if not tokens:
            return None
        qtype = question_type(question)
        qcontent = _content_words(question)
        predicate = _TYPE_PREDICATES.get(qtype)

        best: tuple[float, int, int] | None = None
        best_span: tuple[int, int] | None = None
        norms = [t.norm for t in tokens]
        for i in range(len(tokens)):
            for size in range(1, MAX_WINDOW_TOKENS + 1):
                j = i + size
                if j > len(tokens):
                    break
                # a window may end on terminal punctuation but never
                # continue past it into the next sentence
                if size > 1 and tokens[j - 2].surface[-1] in ".!?;:":
                    break
                window = tokens[i:j]
                window_norms = set(norms[i:j])
                if predicate is not None:
                    typed = sum(1 for t in window if predicate(t))
                    if typed == 0 or typed / size < 2 / 3:
                        continue
                    answer_term = 0.5 * (typed / size) * _growth(size)
                    if qtype == "number":
                        # bare digits sitting in a date ("April 5, 2020")
                        # are calendar parts, not quantities
                        lo2 = max(0, i - 2)
                        hi2 = min(len(tokens), j + 2)
                        if any(norms[k] in MONTHS for k in range(lo2, hi2)):
                            answer_term -= 0.2
                else:
                    content = sum(
                        1 for t in window if t.norm and t.norm not in STOPWORDS
                    )
                    if content == 0:
                        continue
                    answer_term = 0.3 * (content / size) * _brevity(size)

                lo = max(0, i - NEIGHBORHOOD_TOKENS)
                hi = min(len(tokens), j + NEIGHBORHOOD_TOKENS)
                neighborhood = set(norms[lo:i]) | set(norms[j:hi])
                if qcontent:
                    support = sum(1 for w in qcontent if w in neighborhood) / len(qcontent)
                    echo = sum(1 for w in qcontent if w in window_norms) / size
                else:
                    support = 0.0
                    echo = 0.0
                if predicate is None and support == 0.0:
                    continue

                score = 0.4 * support + answer_term - 0.35 * echo
                key = (score, -i, size)
                if best is None or key > best:
                    best = key
                    best_span = (i, j)

        if best is None or best_span is None:
            return None
        score = max(0.0, min(1.0, best[0]))
        floor = 0.15 if predicate is not None else 0.2
        if score < floor:
            return None
        i, j = best_span
        start = tokens[i].start
        end = tokens[j - 1].end
        return Span(text=context[start:end], start=start, end=end, score=score)
