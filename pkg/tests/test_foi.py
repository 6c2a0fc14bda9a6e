"""Profile schema: parsing, validation, serialization round-trips."""

import pytest

from vespa.errors import ConfigError
from vespa.foi import (
    ExtractionProfile,
    FieldOfInterest,
    PassageLevel,
    ResponseType,
    ValidationPolicy,
    VerbiageEntry,
    compile_policy_pattern,
    parse_profile,
    parse_profile_file,
    serialize_profile,
    validate_profile,
)

from conftest import TOTAL_AMOUNT_PROFILE_YAML


def test_parse_reference_profile(total_amount_foi):
    foi = total_amount_foi
    assert foi.name == "total_amount"
    assert foi.locale == "US"
    assert foi.passage_level is PassageLevel.PAGE
    assert foi.response_type is ResponseType.NUMERIC
    assert foi.question_capacity == 6
    assert [v.phrase for v in foi.verbiage] == [
        "amount due",
        "total inclusive of tax",
        "amount in dollars",
    ]
    entry = foi.verbiage_entry("total inclusive of tax")
    assert (entry.t_reject, entry.t_confident) == (0.85, 0.9)
    kinds = [p.kind for p in foi.policies]
    assert kinds == ["NER", "REGEX"]
    assert foi.policies[0].entity == "MONEY"
    assert foi.policies[1].compiled is not None
    assert foi.policies[1].compiled.search("120.00 USD")


def test_verbiage_entry_unknown_phrase_raises(total_amount_foi):
    with pytest.raises(KeyError):
        total_amount_foi.verbiage_entry("grand total")


def test_round_trip_serialize_parse(total_amount_profile):
    text = serialize_profile(total_amount_profile)
    again = parse_profile(text)
    assert again == total_amount_profile
    assert serialize_profile(again) == text


def test_parse_profile_file(tmp_path, total_amount_profile):
    path = tmp_path / "profile.yaml"
    path.write_text(TOTAL_AMOUNT_PROFILE_YAML, encoding="utf-8")
    assert parse_profile_file(str(path)) == total_amount_profile


def test_duplicate_yaml_keys_rejected():
    text = """
fields:
  - name: a
    name: b
    verbiage:
      x: [0.1, 0.9]
    prefixes: [what is the]
"""
    with pytest.raises(ConfigError):
        parse_profile(text)


def test_duplicate_field_names_rejected():
    text = """
fields:
  - name: a
    verbiage:
      x: [0.1, 0.9]
    prefixes: [what is the]
  - name: a
    verbiage:
      y: [0.1, 0.9]
    prefixes: [what is the]
"""
    with pytest.raises(ConfigError):
        parse_profile(text)


def test_threshold_order_enforced():
    text = """
fields:
  - name: a
    verbiage:
      x: [0.9, 0.1]
    prefixes: [what is the]
"""
    with pytest.raises(ConfigError):
        parse_profile(text)


def test_unknown_response_type_rejected():
    text = """
fields:
  - name: a
    response_type: BLOB
    verbiage:
      x: [0.1, 0.9]
    prefixes: [what is the]
"""
    with pytest.raises(ConfigError):
        parse_profile(text)


def test_backreference_patterns_rejected():
    for pattern in (r"(a)\1", r"(?P<g>a)(?P=g)", r"(a)\k<g>"):
        with pytest.raises(ConfigError):
            compile_policy_pattern(pattern)
    assert compile_policy_pattern(r"[0-9.,]+\s*USD").search("120 USD")


def test_validate_profile_reports_violations():
    foi = FieldOfInterest(
        name="",
        verbiage=(VerbiageEntry("x", 0.9, 0.1),),
        prefixes=("what is the",),
        top_k_passages=0,
        boost_factor=0.5,
    )
    violations = validate_profile(ExtractionProfile(fields=(foi,)))
    rules = {v.rule for v in violations}
    assert rules == {"non-empty", "threshold-order", "positive", "boost-range"}
    assert all(v.field_name == "" for v in violations)


def test_validate_profile_clean_profile_is_empty(total_amount_profile):
    assert validate_profile(total_amount_profile) == []


def test_policy_constructors():
    ner = ValidationPolicy.ner("ORG")
    assert (ner.kind, ner.entity) == ("NER", "ORG")
    rx = ValidationPolicy.regex(r"INV-[0-9]+")
    assert rx.kind == "REGEX"
    assert rx.compiled.search("see INV-42 here")


def test_empty_profile_rejected():
    with pytest.raises(ConfigError):
        parse_profile("fields: []")
