"""Randomized invariants for voting, weighting, normalization, and retrieval.

The voting properties use dyadic confidences (multiples of 1/256) and
power-of-two scale factors so every product and running sum is exact in
binary floating point; invariance assertions can then demand equality
rather than tolerance.
"""

import dataclasses
import random

from hypothesis import given, settings, strategies as st

from vespa.backends import QaResponse
from vespa.docmodel import Passage, PassageLevel, bm25_scores, build_index
from vespa.ensemble import Candidate, ClassWeightTable, vote, weigh
from vespa.evalkit import normalize_answer, squad_f1
from vespa.processors import date_to_iso, normalize_amount
from vespa.questions import Question, QuestionClass, classify
from vespa.validator import boost

QUESTION = Question(
    text="what is the total amount?",
    prefix="what is the",
    verbiage_phrase="total amount",
    qclass=QuestionClass.WHAT,
    field_name="total_amount",
)

SURFACES = (
    "$120.00",
    "120.00",
    "May 5, 2020",
    "total due",
    "Meridian Paper",
    "net 30",
    "4 items",
)
MODELS = ("alpha", "beta", "gamma")
PASSAGE_IDS = ("d/p0/p0", "d/p0/p1", "d/p1/p0")

dyadic = st.integers(min_value=0, max_value=256).map(lambda k: k / 256.0)


@st.composite
def candidates(draw, min_size=1, max_size=12):
    size = draw(st.integers(min_value=min_size, max_value=max_size))
    out = []
    for _ in range(size):
        surface = draw(st.sampled_from(SURFACES))
        out.append(
            Candidate(
                answer_text=surface,
                normalized_text=normalize_answer(surface),
                model=draw(st.sampled_from(MODELS)),
                question=QUESTION,
                passage_id=draw(st.sampled_from(PASSAGE_IDS)),
                raw_confidence=draw(dyadic),
                weighted_confidence=draw(dyadic),
            )
        )
    return out


def scale_candidate(candidate, factor):
    return dataclasses.replace(
        candidate,
        weighted_confidence=candidate.weighted_confidence * factor,
    )


@given(candidates(), st.integers(min_value=-3, max_value=6))
@settings(max_examples=300)
def test_vote_ranking_invariant_under_uniform_scaling(cands, exponent):
    factor = 2.0 ** exponent
    base = vote(cands)
    scaled = vote([scale_candidate(c, factor) for c in cands])
    assert [g.normalized_text for g in scaled.groups] == [
        g.normalized_text for g in base.groups
    ]
    for before, after in zip(base.groups, scaled.groups):
        assert after.total_score == before.total_score * factor
        assert after.best_single == before.best_single * factor
        assert [s.model for s in after.supporters] == [s.model for s in before.supporters]


@given(candidates(), st.randoms(use_true_random=False))
@settings(max_examples=300)
def test_vote_permutation_invariance(cands, rng):
    shuffled = list(cands)
    rng.shuffle(shuffled)
    assert vote(shuffled) == vote(cands)


@given(candidates())
@settings(max_examples=200)
def test_vote_output_is_totally_ordered_and_grouped(cands):
    result = vote(cands)
    keys = [(-g.total_score, -g.best_single, g.normalized_text) for g in result.groups]
    assert keys == sorted(keys)
    texts = [g.normalized_text for g in result.groups]
    assert len(texts) == len(set(texts))
    assert sum(len(g.supporters) for g in result.groups) == len(cands)
    for group in result.groups:
        assert group.best_single == max(s.weighted_confidence for s in group.supporters)
        assert group.display_text == group.supporters[0].answer_text


@given(
    dyadic,
    st.integers(min_value=0, max_value=3),
    st.integers(min_value=-3, max_value=3),
)
@settings(max_examples=200)
def test_weigh_scales_exactly_with_power_of_two_weights(raw, wexp, sexp):
    response = QaResponse(answer_text="$120.00", span=(0, 7), raw_confidence=raw)
    low = ClassWeightTable.create(MODELS[:1], {}, fill=2.0 ** wexp)
    high = ClassWeightTable.create(MODELS[:1], {}, fill=2.0 ** (wexp + sexp))
    a = weigh(response, QUESTION, "alpha", low).weighted_confidence
    b = weigh(response, QUESTION, "alpha", high).weighted_confidence
    assert b == a * 2.0 ** sexp


@given(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    st.floats(min_value=0.0, max_value=100.0, allow_nan=False),
    st.floats(min_value=0.0, max_value=100.0, allow_nan=False),
)
@settings(max_examples=200)
def test_weigh_is_monotone_in_class_weight(raw, w1, w2):
    lo, hi = sorted((w1, w2))
    response = QaResponse(answer_text="$120.00", span=(0, 7), raw_confidence=raw)
    low = ClassWeightTable.create(MODELS[:1], {}, fill=lo)
    high = ClassWeightTable.create(MODELS[:1], {}, fill=hi)
    a = weigh(response, QUESTION, "alpha", low).weighted_confidence
    b = weigh(response, QUESTION, "alpha", high).weighted_confidence
    assert a <= b


@given(
    dyadic.filter(lambda value: value > 0),
    st.integers(min_value=0, max_value=400),
    st.integers(min_value=0, max_value=400),
)
@settings(max_examples=200)
def test_weigh_is_strictly_monotone_on_quarter_point_grid(raw, q1, q2):
    # Quarter-point weights multiplied by dyadic confidences stay exactly
    # representable, so strictness cannot be lost to underflow or rounding.
    lo, hi = sorted((q1 / 4.0, q2 / 4.0))
    if lo == hi:
        return
    response = QaResponse(answer_text="$120.00", span=(0, 7), raw_confidence=raw)
    low = ClassWeightTable.create(MODELS[:1], {}, fill=lo)
    high = ClassWeightTable.create(MODELS[:1], {}, fill=hi)
    a = weigh(response, QUESTION, "alpha", low).weighted_confidence
    b = weigh(response, QUESTION, "alpha", high).weighted_confidence
    assert a < b


@given(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    st.floats(min_value=1.0, max_value=2.0, allow_nan=False),
)
@settings(max_examples=200)
def test_boost_is_monotone_and_capped(c1, c2, factor):
    assert 0.0 <= boost(c1, factor) <= 1.0
    assert boost(c1, factor) >= min(1.0, c1)
    if c1 <= c2:
        assert boost(c1, factor) <= boost(c2, factor)


@given(st.text(max_size=40))
@settings(max_examples=300)
def test_classify_is_total(text):
    assert isinstance(classify(text), QuestionClass)


AMOUNT_BODIES = st.one_of(
    st.integers(min_value=0, max_value=10**9).map(str),
    st.tuples(
        st.integers(min_value=0, max_value=10**6),
        st.integers(min_value=0, max_value=99),
    ).map(lambda t: f"{t[0]}.{t[1]:02d}"),
)


@given(
    st.sampled_from(("", "-")),
    AMOUNT_BODIES,
    st.sampled_from(("", " USD", " EUR", " GBP")),
    st.sampled_from(("US", "EU", "")),
)
@settings(max_examples=300)
def test_normalize_amount_idempotent(sign, body, currency, locale):
    once = normalize_amount(sign + body + currency, locale)
    assert normalize_amount(once, locale) == once


@given(
    st.integers(min_value=1970, max_value=2069),
    st.integers(min_value=1, max_value=12),
    st.integers(min_value=1, max_value=28),
    st.sampled_from(("US", "EU", "")),
)
@settings(max_examples=200)
def test_date_to_iso_idempotent(year, month, day, locale):
    once = date_to_iso(f"{year:04d}-{month:02d}-{day:02d}", locale)
    assert once == f"{year:04d}-{month:02d}-{day:02d}"
    assert date_to_iso(once, locale) == once


WORDS_A = ("invoice", "total", "amount", "due", "vendor", "paper", "terms", "net")
WORDS_B = ("zebra", "quartz", "jigsaw", "oboe")


def make_passage(doc_id, ordinal, words):
    return Passage(
        id=f"{doc_id}/p0/p{ordinal}",
        doc_id=doc_id,
        level=PassageLevel.PARA,
        page_index=0,
        ordinal=ordinal,
        text=" ".join(words),
    )


@given(
    st.lists(
        st.lists(st.sampled_from(WORDS_A), min_size=1, max_size=6),
        min_size=2,
        max_size=5,
    ),
    st.lists(st.sampled_from(WORDS_A), min_size=1, max_size=3),
    st.lists(st.sampled_from(WORDS_B), min_size=1, max_size=4),
)
@settings(max_examples=200)
def test_bm25_ignores_passages_outside_the_candidate_set(bodies, query, noise):
    passages = [make_passage("d", i, words) for i, words in enumerate(bodies)]
    extra = make_passage("d", len(bodies), noise)
    before = bm25_scores(build_index(passages), query)
    after = bm25_scores(build_index(passages + [extra]), query)
    assert after[: len(before)] == before
    assert after[len(before)] == 0.0


@given(st.lists(st.sampled_from(WORDS_A + ("the", "a", "$5")), min_size=1, max_size=8))
@settings(max_examples=200)
def test_squad_f1_bounds_and_self_match(tokens):
    text = " ".join(tokens)
    score = squad_f1(text, [text])
    assert score == 1.0
    other = squad_f1(text, ["zebra quartz"])
    assert 0.0 <= other <= 1.0


@given(candidates(min_size=2))
@settings(max_examples=100)
def test_vote_winner_total_is_group_sum(cands):
    winner = vote(cands).winner
    assert winner is not None
    replay = 0.0
    for supporter in winner.supporters:
        replay += supporter.weighted_confidence
    assert winner.total_score == replay
