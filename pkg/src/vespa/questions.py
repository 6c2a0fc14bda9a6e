"""Question generation and lexical question classification.

Questions for a field are the cross product ``prefixes x verbiage``; every
question is assigned one of 14 interrogative classes so downstream voting
can weigh each backend by its per-class strength.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .foi import FieldOfInterest


class QuestionClass(str, Enum):
    DATE = "Date"
    DURING = "During"
    HOW_ARE = "HowAre"
    HOW_BIG_SIZE = "HowBigSize"
    HOW_MM = "HowMM"
    HOW_OLD = "HowOld"
    UNDEFINED = "Undefined"
    WHAT = "What"
    WHAT_TIME = "WhatTime"
    WHEN = "When"
    WHERE = "Where"
    WHO = "Who"
    WHOM = "Whom"
    WHY = "Why"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


#: Canonical display/report order for the 14 classes.
CLASS_ORDER: tuple[QuestionClass, ...] = (
    QuestionClass.DATE,
    QuestionClass.DURING,
    QuestionClass.HOW_ARE,
    QuestionClass.HOW_BIG_SIZE,
    QuestionClass.HOW_MM,
    QuestionClass.HOW_OLD,
    QuestionClass.UNDEFINED,
    QuestionClass.WHAT,
    QuestionClass.WHAT_TIME,
    QuestionClass.WHEN,
    QuestionClass.WHERE,
    QuestionClass.WHO,
    QuestionClass.WHOM,
    QuestionClass.WHY,
)

_CLASS_BY_LABEL = {c.value: c for c in QuestionClass}


def class_from_label(label: str) -> QuestionClass:
    """Resolve a class label (as stored in weight tables) to its enum member."""
    try:
        return _CLASS_BY_LABEL[label]
    except KeyError:
        raise ValueError(f"unknown question class label: {label!r}") from None


@dataclass(frozen=True)
class Question:
    """One generated question: ``prefix + " " + verbiage_phrase + "?"``."""

    text: str
    prefix: str
    verbiage_phrase: str
    qclass: QuestionClass
    field_name: str


_TOKEN_RX = re.compile(r"[a-z0-9]+")

# Phrase rules are searched as contiguous token runs within the leading four
# tokens; leading rules fire on the first token only. First match wins.
_PHRASE_RULES: tuple[tuple[tuple[str, ...], QuestionClass], ...] = (
    (("how", "much"), QuestionClass.HOW_MM),
    (("how", "many"), QuestionClass.HOW_MM),
    (("how", "old"), QuestionClass.HOW_OLD),
    (("how", "big"), QuestionClass.HOW_BIG_SIZE),
    (("how", "large"), QuestionClass.HOW_BIG_SIZE),
    (("what", "size"), QuestionClass.HOW_BIG_SIZE),
    (("how", "are"), QuestionClass.HOW_ARE),
    (("what", "time"), QuestionClass.WHAT_TIME),
    (("on", "what", "date"), QuestionClass.DATE),
    (("what", "date"), QuestionClass.DATE),
    (("which", "date"), QuestionClass.DATE),
)

_LEADING_RULES: tuple[tuple[str, QuestionClass], ...] = (
    ("during", QuestionClass.DURING),
    ("when", QuestionClass.WHEN),
    ("where", QuestionClass.WHERE),
    ("whom", QuestionClass.WHOM),
    ("who", QuestionClass.WHO),
    ("why", QuestionClass.WHY),
    ("what", QuestionClass.WHAT),
    ("which", QuestionClass.WHAT),
)


def classify(text: str) -> QuestionClass:
    """Classify a question string into one of the 14 classes.

    Total and deterministic: lowercases, tokenizes on non-alphanumerics, and
    scans an ordered rule table over the leading four tokens. Anything that
    matches no rule falls through to ``Undefined``.
    """
    tokens = _TOKEN_RX.findall(text.lower())
    window = tokens[:4]
    for phrase, qclass in _PHRASE_RULES:
        n = len(phrase)
        for i in range(len(window) - n + 1):
            if tuple(window[i : i + n]) == phrase:
                return qclass
    if not tokens:
        return QuestionClass.UNDEFINED
    # "to whom" / "with whom" classify as Whom despite the leading preposition.
    if len(tokens) >= 2 and tokens[0] in ("to", "with") and tokens[1] == "whom":
        return QuestionClass.WHOM
    for lead, qclass in _LEADING_RULES:
        if tokens[0] == lead:
            return qclass
    return QuestionClass.UNDEFINED


def _compose(prefix: str, phrase: str) -> str:
    text = f"{prefix.strip()} {phrase.strip()}?"
    text = re.sub(r"\s+", " ", text)
    return text[:1].upper() + text[1:]


def generate_questions(foi: "FieldOfInterest") -> list[Question]:
    """Generate and classify all ``|prefixes| x |verbiage|`` questions, prefix-major."""
    out: list[Question] = []
    for prefix in foi.prefixes:
        for entry in foi.verbiage:
            text = _compose(prefix, entry.phrase)
            out.append(
                Question(
                    text=text,
                    prefix=prefix,
                    verbiage_phrase=entry.phrase,
                    qclass=classify(text),
                    field_name=foi.name,
                )
            )
    return out
