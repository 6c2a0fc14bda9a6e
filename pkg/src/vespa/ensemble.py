"""Class-aware weighted ensemble: calibration, thresholds, voting, subset search.

The engine weighs each backend answer by the backend's per-class weight
(a percentage), rejects candidates per the field's verbiage thresholds,
groups surviving answers by normalized text, and accumulates weighted
confidences per group. The highest-scoring group wins; ties break on
the best single supporter and then on the normalized text.

Weights live in a :class:`ClassWeightTable`: one row per question class,
one column per model, every cell present, values in [0, 100].
Calibration sets each cell to 100 times the mean QA F1 of that model on
that class over an evaluation set. Exhaustive subset search replays an
evaluation set through voting for every non-empty subset of models and
reports the best subset by mean F1.
"""

from __future__ import annotations

import json
import re
import string
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Sequence

from .backends import QaResponse
from .errors import ConfigError, DataError
from .evalkit import QaEvalRecord, squad_f1
from .foi import FieldOfInterest
from .questions import CLASS_ORDER, Question, QuestionClass, classify
from .validator import ValidationOutcome

ENSEMBLE_SEARCH_MAX_MODELS = 20

_WS_RX = re.compile(r"\s+")


def normalize_answer_text(text: str) -> str:
    """Voting key: trim, collapse whitespace, casefold, strip edge punctuation."""
    s = _WS_RX.sub(" ", text.strip())
    s = s.casefold()
    s = s.strip(string.punctuation)
    return s.strip()


# --------------------------------------------------------------------------
# Weight table
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassWeightTable:
    """Per-(class, model) weights in [0, 100] with calibration provenance.

    Every question class has a weight for every model; classes that were
    never observed during calibration carry weight 0 and count 0.
    """

    models: tuple[str, ...]
    weights: Mapping[QuestionClass, Mapping[str, float]]
    question_counts: Mapping[QuestionClass, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.models:
            raise ConfigError("weight table needs at least one model")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("weight table model names must be unique")
        for qclass in CLASS_ORDER:
            row = self.weights.get(qclass)
            if row is None:
                raise ConfigError(f"weight table missing class {qclass.value}")
            for model in self.models:
                if model not in row:
                    raise ConfigError(
                        f"weight table missing cell ({qclass.value}, {model})"
                    )
                value = row[model]
                if not (0.0 <= value <= 100.0):
                    raise ConfigError(
                        f"weight for ({qclass.value}, {model}) must be in [0,100], got {value}"
                    )

    def weight(self, qclass: QuestionClass, model: str) -> float:
        if model not in self.weights[qclass]:
            raise DataError(f"unknown model {model!r} in weight table")
        return self.weights[qclass][model]

    def count(self, qclass: QuestionClass) -> int:
        return int(self.question_counts.get(qclass, 0))

    @staticmethod
    def create(
        models: Sequence[str],
        weights: Mapping[QuestionClass, Mapping[str, float]],
        question_counts: Mapping[QuestionClass, int] | None = None,
        fill: float = 0.0,
    ) -> "ClassWeightTable":
        """Build a table, filling absent cells with ``fill``."""
        complete: dict[QuestionClass, dict[str, float]] = {}
        for qclass in CLASS_ORDER:
            row = dict(weights.get(qclass, {}))
            for model in models:
                row.setdefault(model, fill)
            complete[qclass] = row
        return ClassWeightTable(
            models=tuple(models),
            weights=complete,
            question_counts=dict(question_counts or {}),
        )


def save_weight_table(table: ClassWeightTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table_to_dict(table), fh, indent=2)
        fh.write("\n")


def table_to_dict(table: ClassWeightTable) -> dict:
    return {
        "models": list(table.models),
        "classes": {
            qclass.value: {
                "count": table.count(qclass),
                "weights": {m: table.weights[qclass][m] for m in table.models},
            }
            for qclass in CLASS_ORDER
        },
    }


def table_from_dict(raw: object) -> ClassWeightTable:
    from .questions import class_from_label

    if not isinstance(raw, dict):
        raise DataError("weight table JSON must be an object")
    models = raw.get("models")
    classes = raw.get("classes")
    if not isinstance(models, list) or not all(isinstance(m, str) for m in models):
        raise DataError("weight table 'models' must be a list of names")
    if not isinstance(classes, dict):
        raise DataError("weight table 'classes' must be an object")
    weights: dict[QuestionClass, dict[str, float]] = {}
    counts: dict[QuestionClass, int] = {}
    for label, row in classes.items():
        qclass = class_from_label(str(label))
        if not isinstance(row, dict) or not isinstance(row.get("weights"), dict):
            raise DataError(f"weight table class {label!r} needs a 'weights' object")
        weights[qclass] = {str(m): float(w) for m, w in row["weights"].items()}
        counts[qclass] = int(row.get("count", 0))
    try:
        return ClassWeightTable(
            models=tuple(models), weights=_complete(weights, models), question_counts=counts
        )
    except ConfigError as exc:
        raise DataError(str(exc)) from exc


def _complete(
    weights: Mapping[QuestionClass, Mapping[str, float]], models: Sequence[str]
) -> dict[QuestionClass, dict[str, float]]:
    out: dict[QuestionClass, dict[str, float]] = {}
    for qclass in CLASS_ORDER:
        row = dict(weights.get(qclass, {}))
        for model in models:
            if model not in row:
                raise DataError(f"weight table missing cell ({qclass.value}, {model})")
        out[qclass] = row
    return out


def load_weight_table(path: str) -> ClassWeightTable:
    """Load a weight table from JSON, or from a TSV matrix.

    The TSV layout is the one :func:`vespa.evalkit.class_report` emits:
    a ``Class`` column, a ``Question count`` column, then one column per
    model, with one row per question class.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return table_from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise DataError(f"weight table is not valid JSON: {exc}") from exc
    return _table_from_tsv(text)


def _table_from_tsv(text: str) -> ClassWeightTable:
    from .questions import class_from_label

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError("weight table TSV is empty")
    header = lines[0].split("\t")
    if len(header) < 3 or header[0] != "Class" or header[1] != "Question count":
        raise DataError(
            "weight table TSV header must be 'Class\\tQuestion count\\t<models...>'"
        )
    models = header[2:]
    weights: dict[QuestionClass, dict[str, float]] = {}
    counts: dict[QuestionClass, int] = {}
    for ln in lines[1:]:
        cells = ln.split("\t")
        if len(cells) != len(header):
            raise DataError(f"weight table TSV row has {len(cells)} cells, expected {len(header)}")
        qclass = class_from_label(cells[0])
        counts[qclass] = int(cells[1])
        weights[qclass] = {m: float(c) for m, c in zip(models, cells[2:])}
    try:
        return ClassWeightTable(
            models=tuple(models), weights=_complete(weights, models), question_counts=counts
        )
    except ConfigError as exc:
        raise DataError(str(exc)) from exc


# --------------------------------------------------------------------------
# Calibration
# --------------------------------------------------------------------------

def calibrate_weights(
    eval_set: Sequence[QaEvalRecord],
    predictions: Mapping[str, Mapping[str, str]],
) -> ClassWeightTable:
    """Per-class mean F1 of each model, scaled to [0, 100].

    Every model must supply a prediction (possibly the empty string) for
    every question id; a missing prediction is a data error, because
    silence is indistinguishable from a lost file.
    """
    if not predictions:
        raise DataError("calibration needs at least one model's predictions")
    models = tuple(predictions.keys())
    sums: dict[QuestionClass, dict[str, float]] = {c: {m: 0.0 for m in models} for c in CLASS_ORDER}
    counts: dict[QuestionClass, int] = {c: 0 for c in CLASS_ORDER}
    for record in eval_set:
        qclass = classify(record.question)
        counts[qclass] += 1
        for model in models:
            if record.id not in predictions[model]:
                raise DataError(f"model {model!r} has no prediction for question {record.id!r}")
            f1 = squad_f1(predictions[model][record.id], list(record.gold_answers))
            sums[qclass][model] += f1
    weights = {
        c: {
            m: (100.0 * sums[c][m] / counts[c]) if counts[c] else 0.0
            for m in models
        }
        for c in CLASS_ORDER
    }
    return ClassWeightTable(models=models, weights=weights, question_counts=counts)


# --------------------------------------------------------------------------
# Weighing, thresholds, voting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Candidate:
    """One weighted answer from one (model, question, passage) ask.

    At weigh time ``weighted_confidence`` is exactly
    ``raw_confidence * weight / 100``. Threshold survivors may carry a
    boosted value instead, per the validator's outcome.
    """

    answer_text: str
    normalized_text: str
    model: str
    question: Question
    passage_id: str
    raw_confidence: float
    weighted_confidence: float
    confidence_clamped: bool = False


def weigh(
    response: QaResponse,
    question: Question,
    model: str,
    table: ClassWeightTable,
    passage_id: str = "",
) -> Candidate:
    """Turn a backend response into a candidate with class-aware weight."""
    weight = table.weight(question.qclass, model)
    return Candidate(
        answer_text=response.answer_text,
        normalized_text=normalize_answer_text(response.answer_text),
        model=model,
        question=question,
        passage_id=passage_id,
        raw_confidence=response.raw_confidence,
        weighted_confidence=response.raw_confidence * weight / 100.0,
        confidence_clamped=response.clamped,
    )


class RejectReason(str, Enum):
    BELOW_THRESHOLD = "below_threshold"
    FAILED_VALIDATION = "failed_validation"
    FAILED_TYPE = "failed_type"


@dataclass(frozen=True)
class RejectedCandidate:
    candidate: Candidate
    reason: RejectReason


@dataclass(frozen=True)
class ThresholdResult:
    """Partition of candidates; survivors carry boost-adjusted confidences.

    ``survivors`` and ``survivor_outcomes`` are parallel sequences.
    """

    survivors: tuple[Candidate, ...]
    survivor_outcomes: tuple[ValidationOutcome, ...]
    rejected: tuple[RejectedCandidate, ...]

    def rejection_counts(self) -> dict[str, int]:
        counts = {reason.value: 0 for reason in RejectReason}
        for r in self.rejected:
            counts[r.reason.value] += 1
        return counts


def apply_thresholds(
    candidates: Sequence[Candidate],
    foi: FieldOfInterest,
    outcomes: Sequence[ValidationOutcome],
) -> ThresholdResult:
    """Partition candidates by the verbiage thresholds and validation.

    Below ``t_reject`` rejects outright. In the middle band a candidate
    must pass the type check and, when policies exist, at least one
    policy. At or above ``t_confident`` the type check alone decides.
    Survivors take their outcome's ``final_confidence`` (boost included).
    """
    if len(candidates) != len(outcomes):
        raise DataError("candidates and validation outcomes must align")
    survivors: list[Candidate] = []
    survivor_outcomes: list[ValidationOutcome] = []
    rejected: list[RejectedCandidate] = []
    for candidate, outcome in zip(candidates, outcomes):
        entry = foi.verbiage_entry(candidate.question.verbiage_phrase)
        wc = candidate.weighted_confidence
        if wc < entry.t_reject:
            rejected.append(RejectedCandidate(candidate, RejectReason.BELOW_THRESHOLD))
            continue
        if wc < entry.t_confident:
            policy_ok = not foi.policies or bool(outcome.passed_policies)
            if outcome.type_ok and policy_ok:
                survivors.append(replace(candidate, weighted_confidence=outcome.final_confidence))
                survivor_outcomes.append(outcome)
            else:
                rejected.append(RejectedCandidate(candidate, RejectReason.FAILED_VALIDATION))
            continue
        if outcome.type_ok:
            survivors.append(replace(candidate, weighted_confidence=outcome.final_confidence))
            survivor_outcomes.append(outcome)
        else:
            rejected.append(RejectedCandidate(candidate, RejectReason.FAILED_TYPE))
    return ThresholdResult(
        survivors=tuple(survivors),
        survivor_outcomes=tuple(survivor_outcomes),
        rejected=tuple(rejected),
    )


@dataclass(frozen=True)
class VoteGroup:
    normalized_text: str
    display_text: str
    total_score: float
    best_single: float
    supporters: tuple[Candidate, ...]


@dataclass(frozen=True)
class VoteResult:
    groups: tuple[VoteGroup, ...]

    @property
    def winner(self) -> VoteGroup | None:
        return self.groups[0] if self.groups else None


def _supporter_key(c: Candidate) -> tuple:
    return (
        -c.weighted_confidence,
        -c.raw_confidence,
        c.model,
        c.question.text,
        c.passage_id,
        c.answer_text,
    )


def vote(survivors: Sequence[Candidate]) -> VoteResult:
    """Group by normalized answer and rank by accumulated weighted confidence.

    Supporters are sorted canonically inside each group before their
    confidences are summed, so any permutation of the input produces
    byte-identical output. Ties between groups break on the best single
    supporter, then on the normalized text.
    """
    by_text: dict[str, list[Candidate]] = {}
    for candidate in survivors:
        by_text.setdefault(candidate.normalized_text, []).append(candidate)
    groups = []
    for normalized, members in by_text.items():
        members.sort(key=_supporter_key)
        total = 0.0
        for member in members:
            total += member.weighted_confidence
        groups.append(
            VoteGroup(
                normalized_text=normalized,
                display_text=members[0].answer_text,
                total_score=total,
                best_single=members[0].weighted_confidence,
                supporters=tuple(members),
            )
        )
    groups.sort(key=lambda g: (-g.total_score, -g.best_single, g.normalized_text))
    return VoteResult(groups=tuple(groups))


# --------------------------------------------------------------------------
# Exhaustive subset search
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SubsetScore:
    models: tuple[str, ...]
    score: float


@dataclass(frozen=True)
class EnsembleSearchResult:
    best_subset: tuple[str, ...]
    best_score: float
    table: tuple[SubsetScore, ...]


def ensemble_search(
    models: Sequence[str],
    eval_set: Sequence[QaEvalRecord],
    predictions: Mapping[str, Mapping[str, str]],
    table: ClassWeightTable | None = None,
) -> EnsembleSearchResult:
    """Score every non-empty model subset by voted mean F1 over the eval set.

    Each model's archived prediction enters voting with raw confidence
    1.0 and its class weight; empty predictions abstain. The best subset
    maximizes mean F1; ties prefer fewer models, then lexicographically
    smaller sorted names. The full table comes back sorted by subset size
    then names, independent of evaluation schedule.
    """
    names = tuple(models)
    if not (1 <= len(names) <= ENSEMBLE_SEARCH_MAX_MODELS):
        raise ConfigError(
            f"ensemble search supports 1..{ENSEMBLE_SEARCH_MAX_MODELS} models, got {len(names)}"
        )
    if len(set(names)) != len(names):
        raise ConfigError("duplicate model names in ensemble search")
    for model in names:
        if model not in predictions:
            raise DataError(f"no predictions supplied for model {model!r}")
    if table is None:
        table = calibrate_weights(eval_set, {m: predictions[m] for m in names})

    prepared = []
    for record in eval_set:
        question = Question(
            text=record.question,
            prefix="",
            verbiage_phrase="",
            qclass=classify(record.question),
            field_name=record.id,
        )
        answers = {}
        for model in names:
            if record.id not in predictions[model]:
                raise DataError(f"model {model!r} has no prediction for question {record.id!r}")
            answers[model] = predictions[model][record.id]
        prepared.append((record, question, answers))

    scores: list[SubsetScore] = []
    for mask in range(1, 1 << len(names)):
        subset = tuple(n for i, n in enumerate(names) if mask & (1 << i))
        total_f1 = 0.0
        for record, question, answers in prepared:
            candidates = []
            for model in subset:
                answer = answers[model]
                if not answer:
                    continue
                weight = table.weight(question.qclass, model)
                candidates.append(
                    Candidate(
                        answer_text=answer,
                        normalized_text=normalize_answer_text(answer),
                        model=model,
                        question=question,
                        passage_id="eval",
                        raw_confidence=1.0,
                        weighted_confidence=weight / 100.0,
                    )
                )
            winner = vote(candidates).winner
            predicted = winner.display_text if winner is not None else ""
            total_f1 += squad_f1(predicted, list(record.gold_answers))
        score = total_f1 / len(prepared) if prepared else 0.0
        scores.append(SubsetScore(models=subset, score=score))

    scores.sort(key=lambda s: (len(s.models), tuple(sorted(s.models))))
    best = min(scores, key=lambda s: (-s.score, len(s.models), tuple(sorted(s.models))))
    return EnsembleSearchResult(best_subset=best.models, best_score=best.score, table=tuple(scores))
