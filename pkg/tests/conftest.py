"""Shared fixtures: a reference profile, planted documents, mock ensembles."""

from __future__ import annotations

import os

import pytest

from vespa.backends import BackendDescriptor, ConfidenceBands, MockSpec
from vespa.docmodel import ingest_plain
from vespa.ensemble import ClassWeightTable
from vespa.foi import parse_profile
from vespa.questions import QuestionClass

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

TOTAL_AMOUNT_PROFILE_YAML = """
fields:
  - name: total_amount
    locale: US
    domain: finance
    doc_type: invoice
    passage_level: PAGE
    top_k_passages: 1
    response_type: NUMERIC
    boost_factor: 1.1
    verbiage:
      amount due: [0.7, 0.9]
      total inclusive of tax: [0.85, 0.9]
      amount in dollars: [0.8, 0.8]
    prefixes:
      - what is the
      - How much is the
    policies:
      - type: NER
        entity: MONEY
      - type: REGEX
        pattern: "[0-9.,]+\\\\s*USD"
"""

PLANTED_INVOICE_TEXT = """INVOICE INV-7001

Vendor: Meridian Paper Co.

Bill To: Coastal Bakeries Ltd

Invoice Date: April 5, 2020

Due Date: May 5, 2020

Total amount due: $120.00 USD

Terms: payment within thirty days of the invoice date.
"""


@pytest.fixture()
def total_amount_profile():
    return parse_profile(TOTAL_AMOUNT_PROFILE_YAML)


@pytest.fixture()
def total_amount_foi(total_amount_profile):
    return total_amount_profile.field("total_amount")


@pytest.fixture()
def planted_invoice():
    return ingest_plain(PLANTED_INVOICE_TEXT.encode("utf-8"), doc_id="inv-7001")


def make_trace_backends() -> list[BackendDescriptor]:
    """Two always-correct mocks with a degenerate confidence band.

    The correct band collapses to a single point so every raw confidence
    is exactly 0.95, which keeps hand-computed vote traces exact.
    """
    bands = ConfidenceBands(correct=(0.95, 0.95), wrong=(0.05, 0.3))
    gold = {
        ("*", "amount due"): "$120.00",
        ("*", "total inclusive of tax"): "$120.00",
        ("*", "amount in dollars"): "$120.00",
    }
    spec = MockSpec(
        seed=7,
        per_class_accuracy={},
        default_accuracy=1.0,
        gold_table=gold,
        confidence_bands=bands,
    )
    return [
        BackendDescriptor(name="alpha", kind="MOCK", mock=spec),
        BackendDescriptor(name="beta", kind="MOCK", mock=spec),
    ]


def make_trace_weights() -> ClassWeightTable:
    weights = {
        QuestionClass.WHAT: {"alpha": 92.0, "beta": 92.0},
        QuestionClass.HOW_MM: {"alpha": 96.0, "beta": 96.0},
    }
    return ClassWeightTable.create(("alpha", "beta"), weights, fill=50.0)


@pytest.fixture()
def trace_backends():
    return make_trace_backends()


@pytest.fixture()
def trace_weights():
    return make_trace_weights()
