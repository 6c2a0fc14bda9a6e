"""Answer validation: response-type checks, NER/regex policies, and boosting.

A candidate answer is assessed on two independent axes:

* ``check_type`` decides whether the surface form is plausible for the
  field's declared response type (dates per locale, numerics after
  currency stripping, and so on).
* ``apply_policies`` runs the field's validation policies; passing any
  one of them is sufficient for the candidate to earn the boost.

``validate_candidate`` combines both into a ``ValidationOutcome`` whose
``final_confidence`` already includes the boost when it applies. The
boost multiplies the weighted confidence by the field's factor and caps
the product at 1.0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence

from . import dates
from .foi import FieldOfInterest, ResponseType, ValidationPolicy

_NUMBER_BODY_RX = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_CURRENCY_SYMBOLS = "$€£¥₹"
_CURRENCY_MARK_RX = re.compile(
    rf"[{_CURRENCY_SYMBOLS}]|(?<![A-Za-z])[A-Z]{{3}}(?![A-Za-z])"
)
_LEADING_CODE_RX = re.compile(r"^\s*[A-Z]{3}(?![A-Za-z])")
_TRAILING_CODE_RX = re.compile(r"(?<![A-Za-z])[A-Z]{3}\s*$")
_STRIP_RX = re.compile(rf"[{_CURRENCY_SYMBOLS},\s]")
_MULTI_SPACE_RX = re.compile(r"\s{2,}")
_ALNUM_RX = re.compile(r"[A-Za-z0-9]")

MONEY_SCAN_RX = re.compile(
    rf"[{_CURRENCY_SYMBOLS}]\s?\d[\d,]*(?:\.\d+)?"
    rf"|\d[\d,]*(?:\.\d+)?\s?[{_CURRENCY_SYMBOLS}]"
    rf"|\d[\d,]*(?:\.\d+)?\s?[A-Z]{{3}}(?![A-Za-z])"
    rf"|(?<![A-Za-z])[A-Z]{{3}}\s?\d[\d,]*(?:\.\d+)?"
)
ORG_SCAN_RX = re.compile(
    r"\b[A-Z][\w&.-]*(?:\s+[A-Z][\w&.-]*)*\s+(?:Inc|Ltd|LLC|GmbH|Corp|Co)\.?(?!\w)"
)


@dataclass(frozen=True)
class EntitySpan:
    """A labeled character span found by a recognizer."""

    label: str
    start: int
    end: int
    surface: str


class RecognizerProvider(Protocol):
    def recognize(self, text: str) -> "list[EntitySpan]": ...


class BuiltinRecognizer:
    """Pattern-based recognizer for MONEY, DATE, and ORG spans.

    Deterministic: spans are reported in (start, end, label) order.
    """

    _PATTERNS = (
        ("MONEY", MONEY_SCAN_RX),
        ("DATE", dates.DATE_SCAN_RX),
        ("ORG", ORG_SCAN_RX),
    )

    def recognize(self, text: str) -> list[EntitySpan]:
        found = set()
        for label, rx in self._PATTERNS:
            for m in rx.finditer(text):
                if m.group():
                    found.add((m.start(), m.end(), label))
        return [
            EntitySpan(label=lab, start=s, end=e, surface=text[s:e])
            for s, e, lab in sorted(found, key=lambda t: (t[0], t[1], t[2]))
        ]


def builtin_recognizer() -> BuiltinRecognizer:
    return BuiltinRecognizer()


def _strip_numeric(answer: str) -> str:
    s = answer.strip()
    s = _LEADING_CODE_RX.sub("", s)
    s = _TRAILING_CODE_RX.sub("", s)
    return _STRIP_RX.sub("", s)


def check_type(answer: str, response_type: ResponseType, locale: str = "") -> bool:
    """Return True when ``answer`` is a plausible surface for the type.

    Empty or whitespace-only answers fail every type except TEXT.
    """
    if response_type is ResponseType.TEXT:
        return True
    if not answer.strip():
        return False
    if response_type is ResponseType.NUMERIC:
        return bool(_NUMBER_BODY_RX.match(_strip_numeric(answer)))
    if response_type is ResponseType.MONEY:
        if not _NUMBER_BODY_RX.match(_strip_numeric(answer)):
            return False
        return bool(_CURRENCY_MARK_RX.search(answer))
    if response_type is ResponseType.DATE:
        if dates.is_net_terms(answer):
            return True
        return dates.parse_date(answer, locale) is not None
    if response_type is ResponseType.ALPHANUM:
        if not _ALNUM_RX.search(answer):
            return False
        return not _MULTI_SPACE_RX.search(answer.strip())
    if response_type is ResponseType.ENTITY:
        return True
    raise ValueError(f"unhandled response type: {response_type!r}")


@dataclass(frozen=True)
class PolicyEvaluation:
    """Indices of policies the answer passed, plus per-policy error notes."""

    passed: tuple[int, ...]
    errors: tuple[str, ...] = ()


def _ner_coverage(answer: str, spans: Sequence[EntitySpan], entity: str) -> float:
    """Fraction of the answer's non-space characters covered by matching spans."""
    meaningful = [i for i, ch in enumerate(answer) if not ch.isspace()]
    if not meaningful:
        return 0.0
    covered = [False] * len(answer)
    for span in spans:
        if span.label != entity:
            continue
        for i in range(max(span.start, 0), min(span.end, len(answer))):
            covered[i] = True
    hit = sum(1 for i in meaningful if covered[i])
    return hit / len(meaningful)


def apply_policies(
    answer: str,
    policies: Sequence[ValidationPolicy],
    recognizer: RecognizerProvider | None = None,
) -> PolicyEvaluation:
    """Evaluate each policy against the answer independently.

    NER policies pass when spans with the requested entity label cover at
    least half of the answer's non-space characters. REGEX policies pass
    when the pattern matches anywhere in the answer. A policy that raises
    is recorded as an error and counted as failed.
    """
    passed: list[int] = []
    errors: list[str] = []
    spans: list[EntitySpan] | None = None
    for idx, policy in enumerate(policies):
        try:
            if policy.kind == "NER":
                if spans is None:
                    rec = recognizer if recognizer is not None else builtin_recognizer()
                    spans = rec.recognize(answer)
                if _ner_coverage(answer, spans, policy.entity) >= 0.5:
                    passed.append(idx)
            elif policy.kind == "REGEX":
                if policy.compiled is None:
                    raise ValueError("REGEX policy has no compiled pattern")
                if policy.compiled.search(answer):
                    passed.append(idx)
            else:
                raise ValueError(f"unhandled policy kind: {policy.kind!r}")
        except Exception as exc:  # noqa: BLE001
            errors.append(f"policy[{idx}] {policy.kind}: {exc}")
    return PolicyEvaluation(passed=tuple(passed), errors=tuple(errors))


def boost(confidence: float, factor: float) -> float:
    """Boosted confidence, capped at 1.0."""
    return min(1.0, confidence * factor)


@dataclass(frozen=True)
class ValidationOutcome:
    """Full assessment of one candidate answer against its field config.

    ``final_confidence`` equals the boosted weighted confidence when
    ``boosted`` is True and the unmodified weighted confidence otherwise.
    """

    type_ok: bool
    passed_policies: tuple[int, ...]
    boosted: bool
    final_confidence: float
    errors: tuple[str, ...] = ()


def validate_candidate(
    answer: str,
    foi: FieldOfInterest,
    weighted_confidence: float,
    recognizer: RecognizerProvider | None = None,
) -> ValidationOutcome:
    """Assess one answer: type check, policies, and boost applied together.

    The boost applies when the answer passed at least one policy, or when
    the field declares no policies and the type check passed.
    """
    type_ok = check_type(answer, foi.response_type, foi.locale)
    evaluation = apply_policies(answer, foi.policies, recognizer)
    boosted = bool(evaluation.passed) or (not foi.policies and type_ok)
    final = boost(weighted_confidence, foi.boost_factor) if boosted else weighted_confidence
    return ValidationOutcome(
        type_ok=type_ok,
        passed_policies=evaluation.passed,
        boosted=boosted,
        final_confidence=final,
        errors=evaluation.errors,
    )
