"""Declarative field-of-interest (FOI) schema: parsing, validation, serialization.

A profile is a single YAML document with a ``defaults`` block and a
``fields`` list. Each field declares the question verbiage (with its
per-phrase rejection thresholds), question prefixes, response type,
retrieval level, and validation policies. Profiles are immutable after
parsing and safe to share across workers.

Example field entry::

    fields:
      - name: total_amount
        locale: US
        domain: finance
        doc_type: invoice
        passage_level: PAGE
        verbiage:
          "amount due": [0.7, 0.9]
          "total inclusive of tax": [0.85, 0.9]
          "amount in dollars": [0.8, 0.8]
        prefixes: ["what is the", "How much is the"]
        response_type: NUMERIC
        policies:
          - {type: NER, entity: MONEY}
          - {type: REGEX, pattern: "[0-9.,]+\\\\s*USD"}

The two numbers per verbiage phrase are ``[t_reject, t_confident]``:
weighted confidence below ``t_reject`` rejects the candidate outright;
between the two it must pass a validation policy (when any are
configured); at or above ``t_confident`` the type check alone decides.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator

import yaml

from .errors import ConfigError

DEFAULT_TOP_K_PASSAGES = 1
DEFAULT_BOOST_FACTOR = 1.1


class ResponseType(str, Enum):
    NUMERIC = "NUMERIC"
    DATE = "DATE"
    MONEY = "MONEY"
    ALPHANUM = "ALPHANUM"
    ENTITY = "ENTITY"
    TEXT = "TEXT"


class PassageLevel(str, Enum):
    PAGE = "PAGE"
    SECTION = "SECTION"
    PARA = "PARA"


# Declared regex dialect: Python's `re` restricted to a Perl-compatible
# subset without backreferences. Patterns using backreferences are config
# errors even though `re` would accept them.
_BACKREF_RX = re.compile(r"\\[1-9]|\(\?P=|\\k<")


def compile_policy_pattern(pattern: str) -> re.Pattern[str]:
    if _BACKREF_RX.search(pattern):
        raise ConfigError(f"regex pattern uses backreferences (unsupported dialect): {pattern!r}")
    try:
        return re.compile(pattern)
    except re.error as exc:
        raise ConfigError(f"invalid regex pattern {pattern!r}: {exc}") from exc


@dataclass(frozen=True)
class ValidationPolicy:
    """Either an NER policy (``entity`` set) or a REGEX policy (``pattern`` set)."""

    kind: str  # "NER" | "REGEX"
    entity: str = ""
    pattern: str = ""
    compiled: re.Pattern[str] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in ("NER", "REGEX"):
            raise ConfigError(f"policy type must be NER or REGEX, got {self.kind!r}")
        if self.kind == "NER" and not self.entity:
            raise ConfigError("NER policy requires a non-empty entity label")
        if self.kind == "REGEX":
            if not self.pattern:
                raise ConfigError("REGEX policy requires a non-empty pattern")
            object.__setattr__(self, "compiled", compile_policy_pattern(self.pattern))

    @staticmethod
    def ner(entity: str) -> "ValidationPolicy":
        return ValidationPolicy(kind="NER", entity=entity)

    @staticmethod
    def regex(pattern: str) -> "ValidationPolicy":
        return ValidationPolicy(kind="REGEX", pattern=pattern)


@dataclass(frozen=True)
class VerbiageEntry:
    """A field-naming phrase with its learned rejection thresholds."""

    phrase: str
    t_reject: float
    t_confident: float


@dataclass(frozen=True)
class FieldOfInterest:
    name: str
    locale: str = ""
    domain: str = ""
    doc_type: str = ""
    passage_level: PassageLevel = PassageLevel.PAGE
    top_k_passages: int = DEFAULT_TOP_K_PASSAGES
    verbiage: tuple[VerbiageEntry, ...] = ()
    prefixes: tuple[str, ...] = ()
    response_type: ResponseType = ResponseType.TEXT
    policies: tuple[ValidationPolicy, ...] = ()
    boost_factor: float = DEFAULT_BOOST_FACTOR

    def verbiage_entry(self, phrase: str) -> VerbiageEntry:
        for entry in self.verbiage:
            if entry.phrase == phrase:
                return entry
        raise KeyError(f"field {self.name!r} has no verbiage phrase {phrase!r}")

    @property
    def question_capacity(self) -> int:
        return len(self.prefixes) * len(self.verbiage)


@dataclass(frozen=True)
class ProfileDefaults:
    top_k_passages: int = DEFAULT_TOP_K_PASSAGES
    boost_factor: float = DEFAULT_BOOST_FACTOR
    pre_processors: tuple[str, ...] | None = None
    post_processors: tuple[tuple[str, tuple[str, ...]], ...] | None = None


@dataclass(frozen=True)
class ExtractionProfile:
    fields: tuple[FieldOfInterest, ...]
    defaults: ProfileDefaults = ProfileDefaults()

    def __iter__(self) -> Iterator[FieldOfInterest]:
        return iter(self.fields)

    def field(self, name: str) -> FieldOfInterest:
        for foi in self.fields:
            if foi.name == name:
                return foi
        raise KeyError(f"no field named {name!r} in profile")


@dataclass(frozen=True)
class Violation:
    """One invariant violation: which field, where, and which rule broke."""

    field_name: str
    path: str
    rule: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: [{self.rule}] {self.message}"


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_PROFILE_KEYS = {"defaults", "fields"}
_DEFAULTS_KEYS = {"top_k_passages", "boost_factor", "pre_processors", "post_processors"}
_FIELD_KEYS = {
    "name",
    "locale",
    "domain",
    "doc_type",
    "passage_level",
    "top_k_passages",
    "verbiage",
    "prefixes",
    "response_type",
    "policies",
    "boost_factor",
}
_POLICY_KEYS = {"type", "entity", "pattern"}


class _StrictLoader(yaml.SafeLoader):
    """SafeLoader that rejects duplicate mapping keys instead of silently overriding."""


def _strict_mapping(loader: _StrictLoader, node: yaml.MappingNode, deep: bool = False) -> dict:
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=True)
        if key in seen:
            raise ConfigError(
                f"duplicate key {key!r} at line {key_node.start_mark.line + 1}"
            )
        seen.add(key)
    return yaml.SafeLoader.construct_mapping(loader, node, deep=deep)


_StrictLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _strict_mapping
)


def _load_yaml(source: str) -> Any:
    try:
        return yaml.load(source, Loader=_StrictLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"profile syntax error{loc}: {exc}") from exc


def _reject_unknown(mapping: dict, allowed: set[str], path: str) -> None:
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def _require(mapping: dict, key: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return mapping[key]


def _as_str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {type(value).__name__}")
    return value


def _as_number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {type(value).__name__}")
    return float(value)


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {type(value).__name__}")
    return value


def _parse_policy(raw: Any, path: str) -> ValidationPolicy:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping with a 'type' key")
    _reject_unknown(raw, _POLICY_KEYS, path)
    kind = _as_str(_require(raw, "type", path), f"{path}.type").upper()
    if kind == "NER":
        return ValidationPolicy.ner(_as_str(_require(raw, "entity", path), f"{path}.entity"))
    if kind == "REGEX":
        return ValidationPolicy.regex(_as_str(_require(raw, "pattern", path), f"{path}.pattern"))
    raise ConfigError(f"{path}.type: must be NER or REGEX, got {kind!r}")


def _parse_verbiage(raw: Any, path: str) -> tuple[VerbiageEntry, ...]:
    if not isinstance(raw, dict) or not raw:
        raise ConfigError(f"{path}: expected a non-empty mapping of phrase -> [t_reject, t_confident]")
    entries = []
    for phrase, thresholds in raw.items():
        p = f"{path}[{phrase!r}]"
        phrase = _as_str(phrase, p)
        if not isinstance(thresholds, list) or len(thresholds) != 2:
            raise ConfigError(f"{p}: thresholds must be a two-element numeric array")
        t_reject = _as_number(thresholds[0], f"{p}[0]")
        t_confident = _as_number(thresholds[1], f"{p}[1]")
        entries.append(VerbiageEntry(phrase=phrase, t_reject=t_reject, t_confident=t_confident))
    return tuple(entries)


def _parse_field(raw: Any, defaults: ProfileDefaults, path: str) -> FieldOfInterest:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    _reject_unknown(raw, _FIELD_KEYS, path)
    name = _as_str(_require(raw, "name", path), f"{path}.name")

    level_raw = raw.get("passage_level", PassageLevel.PAGE.value)
    try:
        level = PassageLevel(_as_str(level_raw, f"{path}.passage_level").upper())
    except ValueError:
        raise ConfigError(
            f"{path}.passage_level: must be one of PAGE, SECTION, PARA; got {level_raw!r}"
        ) from None

    rt_raw = _require(raw, "response_type", path)
    try:
        rt = ResponseType(_as_str(rt_raw, f"{path}.response_type").upper())
    except ValueError:
        raise ConfigError(f"{path}.response_type: unknown response type {rt_raw!r}") from None

    prefixes_raw = _require(raw, "prefixes", path)
    if not isinstance(prefixes_raw, list):
        raise ConfigError(f"{path}.prefixes: expected a list of strings")
    prefixes = tuple(_as_str(p, f"{path}.prefixes[{i}]") for i, p in enumerate(prefixes_raw))

    policies_raw = raw.get("policies", [])
    if not isinstance(policies_raw, list):
        raise ConfigError(f"{path}.policies: expected a list")
    policies = tuple(
        _parse_policy(p, f"{path}.policies[{i}]") for i, p in enumerate(policies_raw)
    )

    return FieldOfInterest(
        name=name,
        locale=_as_str(raw.get("locale", ""), f"{path}.locale"),
        domain=_as_str(raw.get("domain", ""), f"{path}.domain"),
        doc_type=_as_str(raw.get("doc_type", ""), f"{path}.doc_type"),
        passage_level=level,
        top_k_passages=_as_int(raw.get("top_k_passages", defaults.top_k_passages), f"{path}.top_k_passages"),
        verbiage=_parse_verbiage(_require(raw, "verbiage", path), f"{path}.verbiage"),
        prefixes=prefixes,
        response_type=rt,
        policies=policies,
        boost_factor=_as_number(raw.get("boost_factor", defaults.boost_factor), f"{path}.boost_factor"),
    )


def _parse_defaults(raw: Any) -> ProfileDefaults:
    if raw is None:
        return ProfileDefaults()
    if not isinstance(raw, dict):
        raise ConfigError("defaults: expected a mapping")
    _reject_unknown(raw, _DEFAULTS_KEYS, "defaults")
    pre = raw.get("pre_processors")
    if pre is not None:
        if not isinstance(pre, list):
            raise ConfigError("defaults.pre_processors: expected a list of names")
        pre = tuple(_as_str(n, f"defaults.pre_processors[{i}]") for i, n in enumerate(pre))
    post = raw.get("post_processors")
    if post is not None:
        if not isinstance(post, dict):
            raise ConfigError("defaults.post_processors: expected a mapping of key -> [names]")
        items = []
        for key, names in post.items():
            if not isinstance(names, list):
                raise ConfigError(f"defaults.post_processors[{key!r}]: expected a list of names")
            items.append((str(key), tuple(str(n) for n in names)))
        post = tuple(items)
    return ProfileDefaults(
        top_k_passages=_as_int(raw.get("top_k_passages", DEFAULT_TOP_K_PASSAGES), "defaults.top_k_passages"),
        boost_factor=_as_number(raw.get("boost_factor", DEFAULT_BOOST_FACTOR), "defaults.boost_factor"),
        pre_processors=pre,
        post_processors=post,
    )


def parse_profile(source: str) -> ExtractionProfile:
    """Parse a YAML profile document into a validated :class:`ExtractionProfile`.

    Raises :class:`ConfigError` on syntax errors (with location), unknown
    keys (with their path), invalid regex patterns, or invariant violations.
    """
    data = _load_yaml(source)
    if not isinstance(data, dict):
        raise ConfigError("profile must be a mapping with a 'fields' list")
    _reject_unknown(data, _PROFILE_KEYS, "profile")
    defaults = _parse_defaults(data.get("defaults"))
    fields_raw = _require(data, "fields", "profile")
    if not isinstance(fields_raw, list) or not fields_raw:
        raise ConfigError("profile.fields: expected a non-empty list")
    fields = tuple(
        _parse_field(f, defaults, f"fields[{i}]") for i, f in enumerate(fields_raw)
    )
    profile = ExtractionProfile(fields=fields, defaults=defaults)
    violations = validate_profile(profile)
    if violations:
        raise ConfigError(
            "profile invariant violations:\n" + "\n".join(f"  - {v}" for v in violations)
        )
    return profile


def parse_profile_file(path: str) -> ExtractionProfile:
    with open(path, encoding="utf-8") as fh:
        return parse_profile(fh.read())


# --------------------------------------------------------------------------
# Validation (usable on programmatically built profiles)
# --------------------------------------------------------------------------

def validate_profile(profile: ExtractionProfile) -> list[Violation]:
    """Check every schema invariant; violations are data, not exceptions."""
    out: list[Violation] = []

    def bad(field_name: str, path: str, rule: str, message: str) -> None:
        out.append(Violation(field_name=field_name, path=path, rule=rule, message=message))

    if not profile.fields:
        bad("", "fields", "non-empty", "profile must declare at least one field")

    seen_names: set[str] = set()
    for i, foi in enumerate(profile.fields):
        path = f"fields[{i}]"
        if not foi.name:
            bad(foi.name, f"{path}.name", "non-empty", "field name must be non-empty")
        if foi.name in seen_names:
            bad(foi.name, f"{path}.name", "unique-name", f"duplicate field name {foi.name!r}")
        seen_names.add(foi.name)

        if not foi.verbiage:
            bad(foi.name, f"{path}.verbiage", "non-empty", "verbiage list must be non-empty")
        phrases: set[str] = set()
        for j, entry in enumerate(foi.verbiage):
            vpath = f"{path}.verbiage[{j}]"
            if not entry.phrase:
                bad(foi.name, vpath, "non-empty", "verbiage phrase must be non-empty")
            if entry.phrase in phrases:
                bad(foi.name, vpath, "unique-phrase", f"duplicate verbiage phrase {entry.phrase!r}")
            phrases.add(entry.phrase)
            if not (0.0 <= entry.t_reject <= entry.t_confident <= 1.0):
                bad(
                    foi.name,
                    vpath,
                    "threshold-order",
                    f"thresholds must satisfy 0 <= t_reject <= t_confident <= 1, "
                    f"got [{entry.t_reject}, {entry.t_confident}]",
                )

        if not foi.prefixes:
            bad(foi.name, f"{path}.prefixes", "non-empty", "prefixes list must be non-empty")
        for j, prefix in enumerate(foi.prefixes):
            if not prefix.strip():
                bad(foi.name, f"{path}.prefixes[{j}]", "non-empty", "prefix must be non-empty")

        if foi.top_k_passages < 1:
            bad(foi.name, f"{path}.top_k_passages", "positive", "top_k_passages must be >= 1")
        if foi.boost_factor < 1.0:
            bad(foi.name, f"{path}.boost_factor", "boost-range", "boost_factor must be >= 1")
    return out


# --------------------------------------------------------------------------
# Serialization (round-trips through parse_profile)
# --------------------------------------------------------------------------

def profile_to_dict(profile: ExtractionProfile) -> dict:
    defaults: dict[str, Any] = {
        "top_k_passages": profile.defaults.top_k_passages,
        "boost_factor": profile.defaults.boost_factor,
    }
    if profile.defaults.pre_processors is not None:
        defaults["pre_processors"] = list(profile.defaults.pre_processors)
    if profile.defaults.post_processors is not None:
        defaults["post_processors"] = {k: list(v) for k, v in profile.defaults.post_processors}
    fields = []
    for foi in profile.fields:
        entry: dict[str, Any] = {
            "name": foi.name,
            "locale": foi.locale,
            "domain": foi.domain,
            "doc_type": foi.doc_type,
            "passage_level": foi.passage_level.value,
            "top_k_passages": foi.top_k_passages,
            "verbiage": {v.phrase: [v.t_reject, v.t_confident] for v in foi.verbiage},
            "prefixes": list(foi.prefixes),
            "response_type": foi.response_type.value,
            "boost_factor": foi.boost_factor,
        }
        if foi.policies:
            entry["policies"] = [
                {"type": "NER", "entity": p.entity} if p.kind == "NER" else {"type": "REGEX", "pattern": p.pattern}
                for p in foi.policies
            ]
        fields.append(entry)
    return {"defaults": defaults, "fields": fields}


def serialize_profile(profile: ExtractionProfile) -> str:
    return yaml.safe_dump(profile_to_dict(profile), sort_keys=False, allow_unicode=True)
