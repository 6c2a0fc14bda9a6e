"""QA evaluation metrics and report builders.

``squad_f1`` and ``exact_match`` follow the canonical SQuAD convention:
normalize both sides (casefold, strip punctuation, drop the articles
a/an/the, collapse whitespace), compare token multisets, and take the
max over gold variants. An empty gold list means the question is
unanswerable; a prediction scores 1.0 there exactly when it normalizes
to the empty string.

Report builders render per-field extraction accuracy (rows of fields
plus an Avg row) and the per-class calibration matrix (14 class rows,
one column per model). Both emit TSV and a JSON mirror.
"""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping, Protocol, Sequence

from .errors import DataError
from .questions import CLASS_ORDER

if TYPE_CHECKING:
    from .ensemble import ClassWeightTable

_ARTICLES = {"a", "an", "the"}
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_WS_RX = re.compile(r"\s+")


def normalize_answer(text: str) -> str:
    """SQuAD-style normalization: casefold, de-punctuate, de-article, squeeze."""
    s = text.casefold()
    s = s.translate(_PUNCT_TABLE)
    tokens = [t for t in _WS_RX.split(s) if t and t not in _ARTICLES]
    return " ".join(tokens)


def _token_f1(prediction: str, gold: str) -> float:
    pred_tokens = prediction.split()
    gold_tokens = gold.split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2.0 * precision * recall / (precision + recall)


def squad_f1(prediction: str, golds: Sequence[str]) -> float:
    """Token-multiset F1 against the best gold; handles unanswerables."""
    normalized_prediction = normalize_answer(prediction)
    normalized_golds = [normalize_answer(g) for g in golds]
    if not normalized_golds or all(not g for g in normalized_golds):
        return 1.0 if not normalized_prediction else 0.0
    return max(_token_f1(normalized_prediction, g) for g in normalized_golds)


def exact_match(prediction: str, golds: Sequence[str]) -> int:
    """1 iff the normalized prediction equals any normalized gold."""
    normalized_prediction = normalize_answer(prediction)
    normalized_golds = [normalize_answer(g) for g in golds]
    if not normalized_golds or all(not g for g in normalized_golds):
        return 1 if not normalized_prediction else 0
    return 1 if normalized_prediction in normalized_golds else 0


# --------------------------------------------------------------------------
# Eval data files
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class QaEvalRecord:
    """One evaluation question; an empty gold list marks it unanswerable."""

    id: str
    question: str
    gold_answers: tuple[str, ...]


def load_eval_set(path: str) -> list[QaEvalRecord]:
    """JSON list of {id, question, gold_answers}; ids must be unique."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"eval set {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError(f"eval set {path!r} must be a JSON list")
    records = []
    seen: set[str] = set()
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise DataError(f"eval set entry {i} must be an object")
        rid = entry.get("id")
        question = entry.get("question")
        golds = entry.get("gold_answers")
        if not isinstance(rid, str) or not rid:
            raise DataError(f"eval set entry {i} needs a non-empty string 'id'")
        if rid in seen:
            raise DataError(f"duplicate eval question id {rid!r}")
        seen.add(rid)
        if not isinstance(question, str) or not question:
            raise DataError(f"eval set entry {rid!r} needs a 'question'")
        if not isinstance(golds, list) or not all(isinstance(g, str) for g in golds):
            raise DataError(f"eval set entry {rid!r} needs 'gold_answers' as a string list")
        records.append(QaEvalRecord(id=rid, question=question, gold_answers=tuple(golds)))
    return records


def load_predictions(path: str) -> dict[str, str]:
    """JSON map of question id to predicted answer (empty = no-answer)."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"predictions {path!r} are not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
    ):
        raise DataError(f"predictions {path!r} must be a JSON object of id -> answer")
    return dict(raw)


def load_predictions_dir(path: str) -> dict[str, dict[str, str]]:
    """One predictions file per model: ``<dir>/<model>.json``, sorted by name."""
    import os

    out: dict[str, dict[str, str]] = {}
    try:
        names = sorted(os.listdir(path))
    except OSError as exc:
        raise DataError(f"cannot list predictions directory {path!r}: {exc}") from exc
    for name in names:
        if not name.endswith(".json"):
            continue
        out[name[: -len(".json")]] = load_predictions(os.path.join(path, name))
    if not out:
        raise DataError(f"predictions directory {path!r} holds no .json files")
    return out


# --------------------------------------------------------------------------
# Field-level extraction report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldGoldLabel:
    """Gold value for one (document, field); None means the field is absent."""

    doc_id: str
    field_name: str
    gold_value: str | None


def load_gold_labels(path: str) -> list[FieldGoldLabel]:
    """JSONL of {doc_id, field_name, gold_value (string or null)}."""
    labels = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"gold labels {path!r} line {lineno}: invalid JSON: {exc}") from exc
            doc_id = raw.get("doc_id")
            field_name = raw.get("field_name")
            gold_value = raw.get("gold_value")
            if not isinstance(doc_id, str) or not isinstance(field_name, str):
                raise DataError(f"gold labels {path!r} line {lineno}: need doc_id and field_name")
            if gold_value is not None and not isinstance(gold_value, str):
                raise DataError(f"gold labels {path!r} line {lineno}: gold_value must be string or null")
            key = (doc_id, field_name)
            if key in seen:
                raise DataError(f"gold labels {path!r} line {lineno}: duplicate {key}")
            seen.add(key)
            labels.append(FieldGoldLabel(doc_id=doc_id, field_name=field_name, gold_value=gold_value))
    return labels


class ExtractionRecordLike(Protocol):
    doc_id: str
    field_name: str
    value: str | None


@dataclass(frozen=True)
class FieldReportRow:
    field_name: str
    doc_count: int
    f1: float


@dataclass(frozen=True)
class FieldReport:
    """Per-field mean F1 (0-100 scale) plus the unweighted average row."""

    rows: tuple[FieldReportRow, ...]
    average: float

    def to_dict(self) -> dict:
        return {
            "fields": [
                {"field": r.field_name, "documents": r.doc_count, "f1": round(r.f1, 2)}
                for r in self.rows
            ],
            "avg_f1": round(self.average, 2),
        }

    def to_tsv(self) -> str:
        lines = ["Field\tDocuments\tF1"]
        for r in self.rows:
            lines.append(f"{r.field_name}\t{r.doc_count}\t{r.f1:.2f}")
        lines.append(f"Avg\t{sum(r.doc_count for r in self.rows)}\t{self.average:.2f}")
        return "\n".join(lines) + "\n"


def field_report(
    golds: Sequence[FieldGoldLabel], records: Iterable[ExtractionRecordLike]
) -> FieldReport:
    """Mean F1 per field over documents, against gold labels.

    An abstaining record predicts the empty string; an absent gold is an
    unanswerable, so abstaining there scores 1.0. Every gold label needs
    exactly one record.
    """
    by_key: dict[tuple[str, str], ExtractionRecordLike] = {}
    for record in records:
        key = (record.doc_id, record.field_name)
        if key in by_key:
            raise DataError(f"multiple extraction records for {key}")
        by_key[key] = record
    field_order: list[str] = []
    scores: dict[str, list[float]] = {}
    for gold in golds:
        key = (gold.doc_id, gold.field_name)
        if key not in by_key:
            raise DataError(f"no extraction record for gold label {key}")
        prediction = by_key[key].value or ""
        gold_answers = [gold.gold_value] if gold.gold_value is not None else []
        if gold.field_name not in scores:
            scores[gold.field_name] = []
            field_order.append(gold.field_name)
        scores[gold.field_name].append(squad_f1(prediction, gold_answers))
    rows = tuple(
        FieldReportRow(
            field_name=name,
            doc_count=len(scores[name]),
            f1=100.0 * sum(scores[name]) / len(scores[name]),
        )
        for name in field_order
    )
    if not rows:
        raise DataError("field report needs at least one gold label")
    average = sum(r.f1 for r in rows) / len(rows)
    return FieldReport(rows=rows, average=average)


# --------------------------------------------------------------------------
# Class-weight report (calibration matrix)
# --------------------------------------------------------------------------

def class_report(table: "ClassWeightTable") -> str:
    """TSV matrix: one row per question class, one column per model."""
    header = "Class\tQuestion count\t" + "\t".join(table.models)
    lines = [header]
    for qclass in CLASS_ORDER:
        cells = [qclass.value, str(table.count(qclass))]
        cells.extend(f"{table.weights[qclass][m]:.2f}" for m in table.models)
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def save_report(report: FieldReport, path: str) -> None:
    """Write the TSV report to ``path`` and a JSON mirror next to it."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_tsv())
    json_path = re.sub(r"\.[A-Za-z0-9]+$", "", path) + ".json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


__all__ = [
    "normalize_answer",
    "squad_f1",
    "exact_match",
    "QaEvalRecord",
    "load_eval_set",
    "load_predictions",
    "load_predictions_dir",
    "FieldGoldLabel",
    "load_gold_labels",
    "FieldReportRow",
    "FieldReport",
    "field_report",
    "class_report",
    "save_report",
]
