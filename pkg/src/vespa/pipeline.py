"""Document extraction pipeline and the append-only knowledge store.

``extract_document`` runs the full per-field flow: pre-process the
document once, retrieve the field's passages, generate and classify its
questions, fan the questions out to every backend over every retrieved
passage, weigh the answers by class weight, validate, apply rejection
thresholds, merge an expert override when one exists, vote, post-process
the winning value, and emit exactly one record per field. Fan-out
results are collected and canonically ordered before voting, so the
record set is deterministic for a fixed seed regardless of scheduling.

The knowledge store is a JSONL log (one record per line, schema key
``"v": 1``). Edits land in a sibling ``<name>.edits.jsonl`` log and are
never applied retroactively; the built-in expert-override provider
replays the latest edit for a (document, field) pair.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping, Protocol, Sequence

from .backends import BackendDescriptor, QaRequest, RemoteBackend, mock_answer
from .docmodel import Document, build_index, retrieve, segment
from .ensemble import (
    Candidate,
    ClassWeightTable,
    ThresholdResult,
    apply_thresholds,
    normalize_answer_text,
    vote,
    weigh,
)
from .errors import BackendUnavailableError, DataError, PipelineError
from .foi import ExtractionProfile, FieldOfInterest
from .processors import ProcessorRegistry, apply_post, default_registry, run_pre
from .questions import Question, QuestionClass, generate_questions
from .validator import (
    RecognizerProvider,
    ValidationOutcome,
    builtin_recognizer,
    validate_candidate,
)

log = logging.getLogger("vespa.pipeline")

EITL_MODEL_NAME = "EITL"
STORE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExtractionRecord:
    """One persisted decision for a (document, field) pair.

    ``value`` is the post-processed winning answer, or None when the
    field abstained. ``confidence`` is the winning group's total score
    clamped to 1.0; the unclamped total stays in provenance.
    """

    doc_id: str
    field_name: str
    value: str | None
    confidence: float
    provenance: Mapping[str, object] = field(default_factory=dict)
    rejected: Mapping[str, int] = field(default_factory=dict)
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        return {
            "v": STORE_SCHEMA_VERSION,
            "doc_id": self.doc_id,
            "field_name": self.field_name,
            "value": self.value,
            "confidence": self.confidence,
            "provenance": dict(self.provenance),
            "rejected": dict(self.rejected),
            "ts": self.timestamp,
        }

    @staticmethod
    def from_dict(raw: Mapping[str, object]) -> "ExtractionRecord":
        if raw.get("v") != STORE_SCHEMA_VERSION:
            raise DataError(f"unsupported record schema version {raw.get('v')!r}")
        value = raw.get("value")
        if value is not None and not isinstance(value, str):
            raise DataError("record 'value' must be a string or null")
        if not isinstance(raw.get("doc_id"), str) or not isinstance(raw.get("field_name"), str):
            raise DataError("record needs string doc_id and field_name")
        return ExtractionRecord(
            doc_id=raw["doc_id"],  # type: ignore[index]
            field_name=raw["field_name"],  # type: ignore[index]
            value=value,
            confidence=float(raw.get("confidence", 0.0)),  # type: ignore[arg-type]
            provenance=dict(raw.get("provenance") or {}),  # type: ignore[arg-type]
            rejected={k: int(v) for k, v in (raw.get("rejected") or {}).items()},  # type: ignore[union-attr]
            timestamp=float(raw.get("ts", 0.0)),  # type: ignore[arg-type]
        )


@dataclass(frozen=True)
class EditRecord:
    """One expert correction; the log is append-only."""

    doc_id: str
    field_name: str
    old_value: str | None
    new_value: str
    editor: str
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "v": STORE_SCHEMA_VERSION,
            "doc_id": self.doc_id,
            "field_name": self.field_name,
            "old_value": self.old_value,
            "new_value": self.new_value,
            "editor": self.editor,
            "ts": self.timestamp,
        }

    @staticmethod
    def from_dict(raw: Mapping[str, object]) -> "EditRecord":
        if raw.get("v") != STORE_SCHEMA_VERSION:
            raise DataError(f"unsupported edit schema version {raw.get('v')!r}")
        return EditRecord(
            doc_id=str(raw.get("doc_id", "")),
            field_name=str(raw.get("field_name", "")),
            old_value=raw.get("old_value") if isinstance(raw.get("old_value"), str) else None,
            new_value=str(raw.get("new_value", "")),
            editor=str(raw.get("editor", "")),
            timestamp=float(raw.get("ts", 0.0)),  # type: ignore[arg-type]
        )


class EitlCandidateProvider(Protocol):
    def lookup(self, doc_id: str, field_name: str) -> str | None: ...


# --------------------------------------------------------------------------
# Knowledge store
# --------------------------------------------------------------------------

def _scan_jsonl(path: Path) -> Iterator[dict]:
    """Yield parsed objects from a JSONL snapshot.

    A final line without a newline terminator is a crash artifact and is
    skipped with a warning; corruption elsewhere is a data error.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        return
    if not text:
        return
    lines = text.split("\n")
    if lines[-1] != "":
        log.warning("%s: skipping partial trailing line", path)
        lines = lines[:-1]
    else:
        lines = lines[:-1]
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path} line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise DataError(f"{path} line {lineno}: expected an object")
        yield raw


class KnowledgeStore:
    """Append-only JSONL record log with a sibling edit log."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    @property
    def edits_path(self) -> Path:
        if self.path.suffix == ".jsonl":
            return self.path.with_name(self.path.stem + ".edits.jsonl")
        return Path(str(self.path) + ".edits.jsonl")

    def append(self, record: ExtractionRecord) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
            fh.flush()

    def scan(self) -> Iterator[ExtractionRecord]:
        for raw in _scan_jsonl(self.path):
            yield ExtractionRecord.from_dict(raw)

    def append_edit(self, edit: EditRecord) -> None:
        self.edits_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.edits_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(edit.to_dict(), ensure_ascii=False) + "\n")
            fh.flush()

    def scan_edits(self) -> Iterator[EditRecord]:
        for raw in _scan_jsonl(self.edits_path):
            yield EditRecord.from_dict(raw)

    def latest_value(self, doc_id: str, field_name: str) -> str | None:
        """Current value for a pair: the latest edit, else the latest record."""
        edit = self._latest_edit(doc_id, field_name)
        if edit is not None:
            return edit.new_value
        value: str | None = None
        found = False
        for record in self.scan():
            if record.doc_id == doc_id and record.field_name == field_name:
                value = record.value
                found = True
        if not found:
            raise DataError(f"no extraction record for ({doc_id!r}, {field_name!r})")
        return value

    def has_record(self, doc_id: str, field_name: str) -> bool:
        return any(
            r.doc_id == doc_id and r.field_name == field_name for r in self.scan()
        )

    def _latest_edit(self, doc_id: str, field_name: str) -> EditRecord | None:
        latest: EditRecord | None = None
        for edit in self.scan_edits():
            if edit.doc_id == doc_id and edit.field_name == field_name:
                if latest is None or edit.timestamp >= latest.timestamp:
                    latest = edit
        return latest

    def eitl_provider(self) -> "EditLogProvider":
        return EditLogProvider(self)


class EditLogProvider:
    """Expert-override provider backed by a store's edit log.

    Lookups read the log at call time, so a fresh edit is visible to the
    next extraction without rebuilding anything.
    """

    def __init__(self, store: KnowledgeStore) -> None:
        self._store = store

    def lookup(self, doc_id: str, field_name: str) -> str | None:
        edit = self._store._latest_edit(doc_id, field_name)
        return edit.new_value if edit is not None else None


def record_edit(store: KnowledgeStore, edit: EditRecord) -> EditRecord:
    """Append an expert correction; the referenced record must exist."""
    if not store.has_record(edit.doc_id, edit.field_name):
        raise DataError(
            f"cannot record edit: no extraction record for "
            f"({edit.doc_id!r}, {edit.field_name!r})"
        )
    store.append_edit(edit)
    return edit


# --------------------------------------------------------------------------
# Extraction
# --------------------------------------------------------------------------

def _eitl_candidate(field_name: str, value: str) -> Candidate:
    question = Question(
        text="(expert override)",
        prefix="",
        verbiage_phrase="",
        qclass=QuestionClass.UNDEFINED,
        field_name=field_name,
    )
    return Candidate(
        answer_text=value,
        normalized_text=normalize_answer_text(value),
        model=EITL_MODEL_NAME,
        question=question,
        passage_id="eitl",
        raw_confidence=1.0,
        weighted_confidence=1.0,
    )


def _supporter_provenance(
    candidate: Candidate,
    outcome: ValidationOutcome,
    weights: ClassWeightTable,
) -> dict:
    if candidate.model == EITL_MODEL_NAME:
        class_weight = 100.0
    else:
        class_weight = weights.weight(candidate.question.qclass, candidate.model)
    entry = {
        "model": candidate.model,
        "question": candidate.question.text,
        "qclass": candidate.question.qclass.value,
        "class_weight": class_weight,
        "passage_id": candidate.passage_id,
        "raw_confidence": candidate.raw_confidence,
        "weighted_confidence": candidate.weighted_confidence,
        "validation": {
            "type_ok": outcome.type_ok,
            "passed_policies": list(outcome.passed_policies),
            "boosted": outcome.boosted,
            "final_confidence": outcome.final_confidence,
            "errors": list(outcome.errors),
        },
    }
    if candidate.confidence_clamped:
        entry["confidence_clamped"] = True
    return entry


def extract_document(
    doc: Document,
    profile: ExtractionProfile,
    ensemble: Sequence[BackendDescriptor],
    weights: ClassWeightTable,
    embedder=None,
    registry: ProcessorRegistry | None = None,
    eitl: EitlCandidateProvider | None = None,
    recognizer: RecognizerProvider | None = None,
    clock: Callable[[], float] = time.time,
) -> list[ExtractionRecord]:
    """Extract every profile field from one document.

    Returns one record per field, in profile order. A backend that
    becomes unavailable stops being asked and is noted in provenance;
    when every backend is down the document fails with a pipeline error.
    """
    if not ensemble:
        raise PipelineError(f"document {doc.id}: no backends configured")
    names = [b.name for b in ensemble]
    if len(set(names)) != len(names):
        raise PipelineError(f"document {doc.id}: duplicate backend names")
    registry = registry if registry is not None else default_registry()
    recognizer = recognizer if recognizer is not None else builtin_recognizer()

    doc = run_pre(registry, doc)

    remote_clients: dict[str, RemoteBackend] = {
        b.name: RemoteBackend(b) for b in ensemble if b.kind == "REMOTE"
    }
    dead: dict[str, str] = {}

    index_cache: dict = {}

    def index_for(level):
        if level not in index_cache:
            passages = segment(doc, level)
            if not passages:
                raise DataError(f"document {doc.id} produced no passages at level {level.value}")
            index_cache[level] = build_index(passages, embedder)
        return index_cache[level]

    records: list[ExtractionRecord] = []
    for foi in profile.fields:
        index = index_for(foi.passage_level)
        hits = retrieve(
            index,
            [entry.phrase for entry in foi.verbiage],
            foi.top_k_passages,
            embedder,
        )
        questions = generate_questions(foi)
        candidates: list[Candidate] = []
        for question in questions:
            for hit in hits:
                request = QaRequest(
                    question_text=question.text,
                    question_class=question.qclass,
                    passage_id=hit.passage.id,
                    passage_text=hit.passage.text,
                )
                for backend in ensemble:
                    if backend.name in dead:
                        continue
                    if backend.kind == "MOCK":
                        assert backend.mock is not None
                        response = mock_answer(backend.mock, request, backend.name)
                    else:
                        try:
                            response = remote_clients[backend.name].ask(request)
                        except BackendUnavailableError as exc:
                            dead[backend.name] = str(exc)
                            log.warning("backend %s unavailable: %s", backend.name, exc)
                            if len(dead) == len(ensemble):
                                raise PipelineError(
                                    f"document {doc.id}: all backends unavailable"
                                ) from exc
                            continue
                    if not response.answer_text:
                        continue
                    candidates.append(
                        weigh(response, question, backend.name, weights, hit.passage.id)
                    )

        outcomes = [
            validate_candidate(c.answer_text, foi, c.weighted_confidence, recognizer)
            for c in candidates
        ]
        partition: ThresholdResult = apply_thresholds(candidates, foi, outcomes)

        voting = list(partition.survivors)
        outcome_by_key: dict[tuple[str, str, str], ValidationOutcome] = {
            (c.model, c.question.text, c.passage_id): o
            for c, o in zip(partition.survivors, partition.survivor_outcomes)
        }
        if eitl is not None:
            override = eitl.lookup(doc.id, foi.name)
            if override is not None:
                eitl_candidate = _eitl_candidate(foi.name, override)
                voting.append(eitl_candidate)
                outcome_by_key[
                    (eitl_candidate.model, eitl_candidate.question.text, eitl_candidate.passage_id)
                ] = ValidationOutcome(
                    type_ok=True, passed_policies=(), boosted=False, final_confidence=1.0
                )

        result = vote(voting)
        winner = result.winner
        provenance: dict[str, object] = {"source": "ensemble", "supporters": []}
        if dead:
            provenance["backend_failures"] = dict(sorted(dead.items()))
        rejected = partition.rejection_counts()
        timestamp = clock()
        if winner is None:
            records.append(
                ExtractionRecord(
                    doc_id=doc.id,
                    field_name=foi.name,
                    value=None,
                    confidence=0.0,
                    provenance=provenance,
                    rejected=rejected,
                    timestamp=timestamp,
                )
            )
            continue
        supporters = [
            _supporter_provenance(
                c, outcome_by_key[(c.model, c.question.text, c.passage_id)], weights
            )
            for c in winner.supporters
        ]
        if any(c.model == EITL_MODEL_NAME for c in winner.supporters):
            provenance["source"] = "eitl"
        provenance["supporters"] = supporters
        provenance["total_score"] = winner.total_score
        value = apply_post(registry, foi, winner.display_text)
        records.append(
            ExtractionRecord(
                doc_id=doc.id,
                field_name=foi.name,
                value=value,
                confidence=min(1.0, winner.total_score),
                provenance=provenance,
                rejected=rejected,
                timestamp=timestamp,
            )
        )
    return records
