"""QA backends: black-box answerers over (question, passage) pairs.

Two kinds ship. MOCK backends are pure functions of (spec, request):
a counter-based generator keyed by seed, backend name, passage id, and
question text decides whether the configured gold answer, a typed
distractor, or an abstention comes back, with confidence drawn inside
the configured band. REMOTE backends speak a small HTTP protocol:

* ``POST {endpoint}/answer`` with ``{"question": str, "context": str}``
  answering ``{"answer": str, "score": number, "start": int, "end": int}``;
  an empty answer with ``start=end=-1`` signals abstention.
* ``GET {endpoint}/health`` answering 200 when ready.

Remote scores outside [0,1] are clamped and flagged. Non-extractive
remote answers (the span does not match the context and the answer text
cannot be located in it) degrade to an abstention with an error note
rather than poisoning downstream voting.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping

import requests

from . import dates
from .errors import BackendUnavailableError, ConfigError, DataError
from .questions import QuestionClass
from .validator import MONEY_SCAN_RX

DEFAULT_TIMEOUT = 10.0
DEFAULT_MAX_RETRIES = 2
DEFAULT_MAX_IN_FLIGHT = 4

_NUMBER_SCAN_RX = re.compile(r"[$€£¥₹]?\d[\d,]*(?:\.\d+)?")
_CAPITALIZED_RUN_RX = re.compile(
    r"\b[A-Z][A-Za-z0-9&.-]*(?:[ ][A-Z][A-Za-z0-9&.-]*){0,2}\b"
)
_WORD_RX = re.compile(r"[A-Za-z0-9][A-Za-z0-9-]{2,}")


@dataclass(frozen=True)
class ConfidenceBands:
    """Confidence ranges for correct vs wrong answers; correct sits above wrong."""

    correct: tuple[float, float]
    wrong: tuple[float, float]

    def __post_init__(self) -> None:
        for name, (lo, hi) in (("correct", self.correct), ("wrong", self.wrong)):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ConfigError(f"{name} band must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
        if self.correct[0] < self.wrong[1]:
            raise ConfigError("correct band must sit at or above the wrong band")


@dataclass(frozen=True)
class MockSpec:
    """Deterministic oracle backend configuration.

    ``gold_table`` maps (passage_id, key) to the gold answer, where key is
    a verbiage phrase or field name; a passage_id of ``"*"`` matches any
    passage. Keys are matched as casefolded substrings of the question
    text; exact passage entries win over wildcards, longer keys over
    shorter ones.
    """

    seed: int = 0
    per_class_accuracy: Mapping[QuestionClass, float] = field(default_factory=dict)
    default_accuracy: float = 0.0
    gold_table: Mapping[tuple[str, str], str] = field(default_factory=dict)
    confidence_bands: ConfidenceBands = ConfidenceBands(correct=(0.8, 0.98), wrong=(0.05, 0.3))

    def __post_init__(self) -> None:
        for qclass, acc in self.per_class_accuracy.items():
            if not (0.0 <= acc <= 1.0):
                raise ConfigError(f"accuracy for {qclass} must be in [0,1], got {acc}")
        if not (0.0 <= self.default_accuracy <= 1.0):
            raise ConfigError(f"default accuracy must be in [0,1], got {self.default_accuracy}")


@dataclass(frozen=True)
class BackendDescriptor:
    """One ensemble member; ``name`` must match a weight-table column."""

    name: str
    kind: str  # "MOCK" | "REMOTE"
    endpoint: str = ""
    timeout: float = DEFAULT_TIMEOUT
    max_retries: int = DEFAULT_MAX_RETRIES
    mock: MockSpec | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("backend name must be non-empty")
        if self.kind not in ("MOCK", "REMOTE"):
            raise ConfigError(f"backend kind must be MOCK or REMOTE, got {self.kind!r}")
        if self.kind == "REMOTE" and not self.endpoint:
            raise ConfigError(f"remote backend {self.name!r} needs an endpoint")
        if self.kind == "MOCK" and self.mock is None:
            raise ConfigError(f"mock backend {self.name!r} needs a mock spec")


@dataclass(frozen=True)
class QaRequest:
    question_text: str
    question_class: QuestionClass
    passage_id: str
    passage_text: str

    def __post_init__(self) -> None:
        if not self.question_text.strip():
            raise DataError("QaRequest needs non-empty question text")
        if not self.passage_text.strip():
            raise DataError("QaRequest needs non-empty passage text")


@dataclass(frozen=True)
class QaResponse:
    """One backend answer. Empty ``answer_text`` means abstention.

    For non-abstentions the span indexes into the passage text and
    ``passage[start:end] == answer_text``. ``clamped`` records that a
    remote score arrived outside [0,1]. ``error`` carries a provenance
    note when a malformed remote answer was degraded to abstention.
    """

    answer_text: str
    span: tuple[int, int] | None
    raw_confidence: float
    clamped: bool = False
    error: str = ""


# --------------------------------------------------------------------------
# Mock backend
# --------------------------------------------------------------------------

def _unit(*parts: object) -> float:
    """Deterministic value in [0,1) from the joined parts."""
    payload = b"\x1f".join(str(p).encode("utf-8") for p in parts)
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


def _band_draw(band: tuple[float, float], *parts: object) -> float:
    lo, hi = band
    return lo + _unit(*parts) * (hi - lo)


def _lookup_gold(spec: MockSpec, req: QaRequest) -> str:
    """Best gold-table entry whose key appears in the question text."""
    question = req.question_text.casefold()
    best: tuple[int, int, str] | None = None
    best_value = ""
    for (passage_id, key), value in spec.gold_table.items():
        if passage_id not in (req.passage_id, "*"):
            continue
        if key.casefold() not in question:
            continue
        rank = (1 if passage_id != "*" else 0, len(key))
        candidate = (rank[0], rank[1], key)
        if best is None or candidate > best:
            best = candidate
            best_value = value
    return best_value


def _find_span(passage: str, answer: str) -> tuple[int, int] | None:
    at = passage.find(answer)
    if at >= 0:
        return (at, at + len(answer))
    lowered_at = passage.casefold().find(answer.casefold())
    if lowered_at >= 0:
        return (lowered_at, lowered_at + len(answer))
    return None


_CLASS_DISTRACTOR_RX: Mapping[QuestionClass, re.Pattern[str]] = {
    QuestionClass.DATE: dates.DATE_SCAN_RX,
    QuestionClass.WHEN: dates.DATE_SCAN_RX,
    QuestionClass.DURING: dates.DATE_SCAN_RX,
    QuestionClass.WHAT_TIME: dates.DATE_SCAN_RX,
    QuestionClass.HOW_MM: _NUMBER_SCAN_RX,
    QuestionClass.HOW_OLD: _NUMBER_SCAN_RX,
    QuestionClass.HOW_BIG_SIZE: _NUMBER_SCAN_RX,
}


def _distractor(req: QaRequest, gold: str) -> tuple[str, tuple[int, int]] | None:
    """First token run of the class's coarse type that is not the gold."""
    rx = _CLASS_DISTRACTOR_RX.get(req.question_class)
    patterns = [rx] if rx is not None else [MONEY_SCAN_RX, _CAPITALIZED_RUN_RX, _WORD_RX]
    gold_folded = gold.casefold().strip()
    for pattern in patterns:
        for m in pattern.finditer(req.passage_text):
            surface = m.group().strip()
            if not surface:
                continue
            if gold_folded and surface.casefold() == gold_folded:
                continue
            if gold_folded and (surface.casefold() in gold_folded or gold_folded in surface.casefold()):
                continue
            return surface, (m.start(), m.start() + len(m.group()))
    return None


def mock_answer(spec: MockSpec, req: QaRequest, backend_name: str = "") -> QaResponse:
    """Pure deterministic answer for a mock backend.

    A draw below the class accuracy returns the gold span when the gold
    string occurs in the passage; otherwise a typed distractor span with
    wrong-band confidence, or an abstention when no distractor exists.
    """
    u = _unit(spec.seed, backend_name, req.passage_id, req.question_text, "pick")
    accuracy = spec.per_class_accuracy.get(req.question_class, spec.default_accuracy)
    gold = _lookup_gold(spec, req)
    if u < accuracy and gold:
        span = _find_span(req.passage_text, gold)
        if span is not None:
            confidence = _band_draw(
                spec.confidence_bands.correct,
                spec.seed, backend_name, req.passage_id, req.question_text, "conf",
            )
            return QaResponse(
                answer_text=req.passage_text[span[0]:span[1]],
                span=span,
                raw_confidence=confidence,
            )
    confidence = _band_draw(
        spec.confidence_bands.wrong,
        spec.seed, backend_name, req.passage_id, req.question_text, "conf",
    )
    found = _distractor(req, gold)
    if found is None:
        return QaResponse(answer_text="", span=None, raw_confidence=confidence)
    surface, span = found
    return QaResponse(
        answer_text=req.passage_text[span[0]:span[1]],
        span=span,
        raw_confidence=confidence,
    )


# --------------------------------------------------------------------------
# Remote backend
# --------------------------------------------------------------------------

def serialize_request(req: QaRequest) -> bytes:
    """Canonical wire bytes for a request; stable across runs and platforms."""
    body = {"context": req.passage_text, "question": req.question_text}
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def parse_response(payload: object, passage_text: str) -> QaResponse:
    """Validate a decoded response body against the wire schema.

    Raises :class:`DataError` when required keys are missing or of the
    wrong type. Out-of-range scores clamp with a flag. A non-empty answer
    whose span does not match the context degrades to abstention with an
    error note, preserving the extractiveness invariant.
    """
    if not isinstance(payload, dict):
        raise DataError("response body must be a JSON object")
    answer = payload.get("answer")
    score = payload.get("score")
    start = payload.get("start")
    end = payload.get("end")
    if not isinstance(answer, str):
        raise DataError("response 'answer' must be a string")
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise DataError("response 'score' must be a number")
    if not isinstance(start, int) or not isinstance(end, int):
        raise DataError("response 'start' and 'end' must be integers")
    clamped = False
    confidence = float(score)
    if confidence < 0.0 or confidence > 1.0:
        confidence = min(1.0, max(0.0, confidence))
        clamped = True
    if answer == "":
        return QaResponse(answer_text="", span=None, raw_confidence=confidence, clamped=clamped)
    if 0 <= start <= end <= len(passage_text) and passage_text[start:end] == answer:
        return QaResponse(
            answer_text=answer, span=(start, end), raw_confidence=confidence, clamped=clamped
        )
    at = passage_text.find(answer)
    if at >= 0:
        return QaResponse(
            answer_text=answer,
            span=(at, at + len(answer)),
            raw_confidence=confidence,
            clamped=clamped,
            error="span did not match context; recovered by search",
        )
    return QaResponse(
        answer_text="",
        span=None,
        raw_confidence=0.0,
        clamped=clamped,
        error="non-extractive answer degraded to abstention",
    )


class RemoteBackend:
    """HTTP client for one endpoint with retries and bounded concurrency."""

    def __init__(
        self,
        descriptor: BackendDescriptor,
        session: requests.Session | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        backoff_base: float = 0.25,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    ) -> None:
        if descriptor.kind != "REMOTE":
            raise ConfigError(f"backend {descriptor.name!r} is not remote")
        self.descriptor = descriptor
        self._session = session or requests.Session()
        self._sleeper = sleeper
        self._backoff_base = backoff_base
        self._gate = threading.Semaphore(max_in_flight)

    def ask(self, req: QaRequest) -> QaResponse:
        url = self.descriptor.endpoint.rstrip("/") + "/answer"
        attempts = self.descriptor.max_retries + 1
        last_error = "no attempts made"
        for attempt in range(attempts):
            if attempt > 0:
                self._sleeper(self._backoff_base * (2.0 ** (attempt - 1)))
            try:
                with self._gate:
                    resp = self._session.post(
                        url,
                        data=serialize_request(req),
                        headers={"Content-Type": "application/json"},
                        timeout=self.descriptor.timeout,
                    )
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                continue
            if resp.status_code != 200:
                last_error = f"HTTP {resp.status_code}"
                continue
            try:
                payload = resp.json()
            except ValueError as exc:
                last_error = f"invalid JSON body: {exc}"
                continue
            try:
                return parse_response(payload, req.passage_text)
            except DataError as exc:
                last_error = f"protocol violation: {exc}"
                continue
        raise BackendUnavailableError(self.descriptor.name, last_error)

    def health(self) -> bool:
        url = self.descriptor.endpoint.rstrip("/") + "/health"
        try:
            resp = self._session.get(url, timeout=self.descriptor.timeout)
        except requests.RequestException:
            return False
        return resp.status_code == 200


def ask(
    backend: BackendDescriptor,
    req: QaRequest,
    session: requests.Session | None = None,
) -> QaResponse:
    """Answer one request through a backend of either kind."""
    if backend.kind == "MOCK":
        assert backend.mock is not None
        return mock_answer(backend.mock, req, backend.name)
    return RemoteBackend(backend, session=session).ask(req)


# --------------------------------------------------------------------------
# Backends file
# --------------------------------------------------------------------------

def parse_backends(source: str, seed: int | None = None) -> list[BackendDescriptor]:
    """Parse a YAML backends file into descriptors.

    Shape::

        backends:
          - name: strong-dates
            kind: MOCK
            mock:
              seed: 7
              default_accuracy: 0.2
              per_class_accuracy: {When: 0.95, Date: 0.95}
              confidence_bands: {correct: [0.8, 0.98], wrong: [0.05, 0.3]}
              gold_table:
                - {passage: "doc-1/p0/g0", key: "due date", answer: "April 5, 2020"}
          - name: live
            kind: REMOTE
            endpoint: http://127.0.0.1:8940

    A ``seed`` argument (the CLI flag) overrides every mock seed so runs
    stay reproducible.
    """
    import yaml

    from .questions import class_from_label

    try:
        data = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ConfigError(f"backends file syntax error: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("backends"), list):
        raise ConfigError("backends file must be a mapping with a 'backends' list")
    out: list[BackendDescriptor] = []
    seen: set[str] = set()
    for i, raw in enumerate(data["backends"]):
        path = f"backends[{i}]"
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a mapping")
        name = raw.get("name")
        kind = str(raw.get("kind", "")).upper()
        if not isinstance(name, str) or not name:
            raise ConfigError(f"{path}.name: required")
        if name in seen:
            raise ConfigError(f"{path}.name: duplicate backend name {name!r}")
        seen.add(name)
        mock = None
        if kind == "MOCK":
            mock_raw = raw.get("mock")
            if not isinstance(mock_raw, dict):
                raise ConfigError(f"{path}.mock: required for MOCK backends")
            accuracy = {}
            for label, value in (mock_raw.get("per_class_accuracy") or {}).items():
                accuracy[class_from_label(str(label))] = float(value)
            bands_raw = mock_raw.get("confidence_bands") or {}
            bands = ConfidenceBands(
                correct=tuple(bands_raw.get("correct", (0.8, 0.98))),  # type: ignore[arg-type]
                wrong=tuple(bands_raw.get("wrong", (0.05, 0.3))),  # type: ignore[arg-type]
            )
            gold_table = {}
            for entry in mock_raw.get("gold_table") or []:
                if not isinstance(entry, dict) or not {"passage", "key", "answer"} <= set(entry):
                    raise ConfigError(
                        f"{path}.mock.gold_table: entries need passage, key, answer"
                    )
                gold_table[(str(entry["passage"]), str(entry["key"]))] = str(entry["answer"])
            mock = MockSpec(
                seed=seed if seed is not None else int(mock_raw.get("seed", 0)),
                per_class_accuracy=accuracy,
                default_accuracy=float(mock_raw.get("default_accuracy", 0.0)),
                gold_table=gold_table,
                confidence_bands=bands,
            )
        out.append(
            BackendDescriptor(
                name=name,
                kind=kind,
                endpoint=str(raw.get("endpoint", "")),
                timeout=float(raw.get("timeout", DEFAULT_TIMEOUT)),
                max_retries=int(raw.get("max_retries", DEFAULT_MAX_RETRIES)),
                mock=mock,
            )
        )
    if not out:
        raise ConfigError("backends file declares no backends")
    return out


def parse_backends_file(path: str, seed: int | None = None) -> list[BackendDescriptor]:
    with open(path, encoding="utf-8") as fh:
        return parse_backends(fh.read(), seed=seed)
