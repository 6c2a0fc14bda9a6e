"""Zero-shot document field extraction over ensembles of QA backends."""

from .backends import (
    BackendDescriptor,
    ConfidenceBands,
    MockSpec,
    QaRequest,
    QaResponse,
    RemoteBackend,
    ask,
    mock_answer,
    parse_backends,
    parse_backends_file,
    parse_response,
    serialize_request,
)
from .docmodel import (
    Document,
    HashEmbedder,
    Page,
    Passage,
    PassageIndex,
    RetrievedPassage,
    Section,
    build_index,
    ingest,
    ingest_plain,
    ingest_structured,
    retrieve,
    segment,
    tokenize,
)
from .ensemble import (
    Candidate,
    ClassWeightTable,
    EnsembleSearchResult,
    RejectReason,
    RejectedCandidate,
    SubsetScore,
    ThresholdResult,
    VoteGroup,
    VoteResult,
    apply_thresholds,
    calibrate_weights,
    ensemble_search,
    load_weight_table,
    normalize_answer_text,
    save_weight_table,
    vote,
    weigh,
)
from .errors import (
    BackendUnavailableError,
    ConfigError,
    DataError,
    PipelineError,
    ProcessorError,
    VespaError,
)
from .evalkit import (
    FieldGoldLabel,
    FieldReport,
    QaEvalRecord,
    class_report,
    exact_match,
    field_report,
    load_eval_set,
    load_gold_labels,
    load_predictions,
    load_predictions_dir,
    normalize_answer,
    save_report,
    squad_f1,
)
from .foi import (
    ExtractionProfile,
    FieldOfInterest,
    PassageLevel,
    ProfileDefaults,
    ResponseType,
    ValidationPolicy,
    VerbiageEntry,
    parse_profile,
    parse_profile_file,
    serialize_profile,
    validate_profile,
)
from .pipeline import (
    EditRecord,
    ExtractionRecord,
    KnowledgeStore,
    extract_document,
    record_edit,
)
from .processors import (
    ProcessorRegistry,
    build_registry,
    date_to_iso,
    default_registry,
    normalize_amount,
)
from .questions import (
    CLASS_ORDER,
    Question,
    QuestionClass,
    class_from_label,
    classify,
    generate_questions,
)
from .validator import (
    BuiltinRecognizer,
    EntitySpan,
    PolicyEvaluation,
    ValidationOutcome,
    apply_policies,
    boost,
    check_type,
    validate_candidate,
)

__version__ = "0.1.0"

__all__ = [
    "BackendDescriptor",
    "BackendUnavailableError",
    "BuiltinRecognizer",
    "CLASS_ORDER",
    "Candidate",
    "ClassWeightTable",
    "ConfidenceBands",
    "ConfigError",
    "DataError",
    "Document",
    "EditRecord",
    "EnsembleSearchResult",
    "EntitySpan",
    "ExtractionProfile",
    "ExtractionRecord",
    "FieldGoldLabel",
    "FieldOfInterest",
    "FieldReport",
    "HashEmbedder",
    "KnowledgeStore",
    "MockSpec",
    "Page",
    "Passage",
    "PassageIndex",
    "PassageLevel",
    "PipelineError",
    "PolicyEvaluation",
    "ProcessorError",
    "ProcessorRegistry",
    "ProfileDefaults",
    "QaEvalRecord",
    "QaRequest",
    "QaResponse",
    "Question",
    "QuestionClass",
    "RejectReason",
    "RejectedCandidate",
    "RemoteBackend",
    "ResponseType",
    "RetrievedPassage",
    "Section",
    "SubsetScore",
    "ThresholdResult",
    "ValidationOutcome",
    "ValidationPolicy",
    "VerbiageEntry",
    "VespaError",
    "VoteGroup",
    "VoteResult",
    "apply_policies",
    "apply_thresholds",
    "ask",
    "boost",
    "build_index",
    "build_registry",
    "calibrate_weights",
    "class_from_label",
    "class_report",
    "classify",
    "check_type",
    "date_to_iso",
    "default_registry",
    "ensemble_search",
    "exact_match",
    "extract_document",
    "field_report",
    "generate_questions",
    "ingest",
    "ingest_plain",
    "ingest_structured",
    "load_eval_set",
    "load_gold_labels",
    "load_predictions",
    "load_predictions_dir",
    "load_weight_table",
    "mock_answer",
    "normalize_amount",
    "normalize_answer",
    "normalize_answer_text",
    "parse_backends",
    "parse_backends_file",
    "parse_profile",
    "parse_profile_file",
    "parse_response",
    "record_edit",
    "retrieve",
    "save_report",
    "save_weight_table",
    "segment",
    "serialize_profile",
    "serialize_request",
    "squad_f1",
    "tokenize",
    "validate_candidate",
    "validate_profile",
    "vote",
    "weigh",
]
