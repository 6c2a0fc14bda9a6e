"""Document model: ingestion, segmentation, lexical index, hybrid retrieval.

Documents are page/section/paragraph trees. Segmentation flattens a
document into passages at one of three granularities; passage ids encode
the granularity with a level letter so ids never collide across levels:

* PAGE    -> ``{doc_id}/p{page}/g{ordinal}``
* SECTION -> ``{doc_id}/p{page}/s{ordinal}``
* PARA    -> ``{doc_id}/p{page}/p{ordinal}``

Retrieval scores passages with BM25 (k1=1.2, b=0.75). The collection
statistics (document count, average length, document frequencies) are
computed over the candidate set: the passages sharing at least one token
with the query. This keeps scores stable when unrelated passages are
added to the index, and passages with no query tokens always score zero.
Candidate scores are min-max normalized into [0, 1]. When an embedding
provider is attached, the final score blends the normalized lexical
score and a [0, 1]-shifted cosine similarity at equal weight.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .errors import DataError
from .foi import PassageLevel

_LEVEL_LETTERS = {
    PassageLevel.PAGE: "g",
    PassageLevel.SECTION: "s",
    PassageLevel.PARA: "p",
}

_TOKEN_RX = re.compile(r"[a-z0-9]+")

BM25_K1 = 1.2
BM25_B = 0.75


@dataclass(frozen=True)
class Section:
    ordinal: int
    paragraphs: tuple[str, ...]


@dataclass(frozen=True)
class Page:
    index: int
    sections: tuple[Section, ...]
    declared_sections: bool = False

    @property
    def paragraphs(self) -> tuple[str, ...]:
        return tuple(p for s in self.sections for p in s.paragraphs)

    @property
    def text(self) -> str:
        return "\n\n".join(self.paragraphs)


@dataclass(frozen=True)
class Document:
    id: str
    pages: tuple[Page, ...]
    source_path: str = ""
    metadata: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class Passage:
    """One retrievable text unit with a stable, level-qualified id."""

    id: str
    doc_id: str
    level: PassageLevel
    page_index: int
    ordinal: int
    text: str


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric token runs; everything else is a separator."""
    return _TOKEN_RX.findall(text.lower())


# --------------------------------------------------------------------------
# Ingestion
# --------------------------------------------------------------------------

def _paragraphs_from_text(text: str) -> list[str]:
    parts = re.split(r"\n\s*\n", text)
    return [p.strip() for p in parts if p.strip()]


def ingest_plain(data: bytes | str, doc_id: str, source_path: str = "") -> Document:
    """Build a document from plain text.

    Form feeds split pages; blank lines split paragraphs. Pages with no
    text are dropped and the rest reindexed so page indices stay
    contiguous from zero. A document with no text at all is a data error.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"document {doc_id!r} is not valid UTF-8: {exc}") from exc
    else:
        text = data
    pages = []
    for raw_page in text.split("\x0c"):
        paragraphs = _paragraphs_from_text(raw_page)
        if not paragraphs:
            continue
        pages.append(
            Page(
                index=len(pages),
                sections=(Section(ordinal=0, paragraphs=tuple(paragraphs)),),
                declared_sections=False,
            )
        )
    if not pages:
        raise DataError(f"document {doc_id!r} contains no text")
    return Document(id=doc_id, pages=tuple(pages), source_path=source_path)


def ingest_structured(data: bytes | str, doc_id: str = "", source_path: str = "") -> Document:
    """Build a document from the structured JSON layout.

    Expected shape::

        {"id": "...", "pages": [{"index": 0, "sections": [
            {"ordinal": 0, "paragraphs": ["..."]}]}]}

    Page indices must be contiguous from zero and every page must carry
    text; violations are data errors.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="strict")
    try:
        raw = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"structured document is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError("structured document must be a JSON object")
    the_id = raw.get("id") or doc_id
    if not isinstance(the_id, str) or not the_id:
        raise DataError("structured document needs a non-empty string 'id'")
    pages_raw = raw.get("pages")
    if not isinstance(pages_raw, list) or not pages_raw:
        raise DataError(f"document {the_id!r}: 'pages' must be a non-empty list")
    pages = []
    for p in pages_raw:
        if not isinstance(p, dict) or not isinstance(p.get("index"), int):
            raise DataError(f"document {the_id!r}: each page needs an integer 'index'")
        sections_raw = p.get("sections")
        if not isinstance(sections_raw, list):
            raise DataError(f"document {the_id!r}: page {p['index']} needs a 'sections' list")
        sections = []
        seen_ordinals: set[int] = set()
        for s in sections_raw:
            if not isinstance(s, dict) or not isinstance(s.get("ordinal"), int):
                raise DataError(
                    f"document {the_id!r}: each section needs an integer 'ordinal'"
                )
            paras_raw = s.get("paragraphs")
            if not isinstance(paras_raw, list) or not all(isinstance(x, str) for x in paras_raw):
                raise DataError(
                    f"document {the_id!r}: section paragraphs must be a list of strings"
                )
            if s["ordinal"] in seen_ordinals:
                raise DataError(
                    f"document {the_id!r}: page {p['index']} repeats section ordinal {s['ordinal']}"
                )
            seen_ordinals.add(s["ordinal"])
            paragraphs = tuple(x.strip() for x in paras_raw if x.strip())
            if paragraphs:
                sections.append(Section(ordinal=s["ordinal"], paragraphs=paragraphs))
        if not sections:
            raise DataError(f"document {the_id!r}: page {p['index']} has no text")
        pages.append(Page(index=p["index"], sections=tuple(sections), declared_sections=True))
    pages.sort(key=lambda pg: pg.index)
    if [pg.index for pg in pages] != list(range(len(pages))):
        raise DataError(f"document {the_id!r}: page indices must be contiguous from 0")
    return Document(id=the_id, pages=tuple(pages), source_path=source_path)


def ingest(data: bytes | str, fmt: str, doc_id: str = "", source_path: str = "") -> Document:
    """Dispatch on format name: ``plain`` or ``structured``."""
    fmt = fmt.lower()
    if fmt == "plain":
        if not doc_id:
            raise DataError("plain ingestion requires an explicit doc_id")
        return ingest_plain(data, doc_id, source_path)
    if fmt == "structured":
        return ingest_structured(data, doc_id, source_path)
    raise DataError(f"unknown document format {fmt!r}")


# --------------------------------------------------------------------------
# Segmentation
# --------------------------------------------------------------------------

def segment(doc: Document, level: PassageLevel) -> list[Passage]:
    """Flatten a document into passages at the requested granularity.

    SECTION segmentation of a document without declared sections falls
    back to PARA and returns output identical to ``segment(doc, PARA)``.
    """
    if level is PassageLevel.SECTION and not any(p.declared_sections for p in doc.pages):
        return segment(doc, PassageLevel.PARA)
    letter = _LEVEL_LETTERS[level]
    passages: list[Passage] = []
    for page in doc.pages:
        if level is PassageLevel.PAGE:
            text = page.text
            if text:
                passages.append(
                    Passage(
                        id=f"{doc.id}/p{page.index}/{letter}0",
                        doc_id=doc.id,
                        level=level,
                        page_index=page.index,
                        ordinal=0,
                        text=text,
                    )
                )
        elif level is PassageLevel.SECTION:
            for section in page.sections:
                text = "\n\n".join(section.paragraphs)
                if text:
                    passages.append(
                        Passage(
                            id=f"{doc.id}/p{page.index}/{letter}{section.ordinal}",
                            doc_id=doc.id,
                            level=level,
                            page_index=page.index,
                            ordinal=section.ordinal,
                            text=text,
                        )
                    )
        else:
            ordinal = 0
            for paragraph in page.paragraphs:
                passages.append(
                    Passage(
                        id=f"{doc.id}/p{page.index}/{letter}{ordinal}",
                        doc_id=doc.id,
                        level=level,
                        page_index=page.index,
                        ordinal=ordinal,
                        text=paragraph,
                    )
                )
                ordinal += 1
    return passages


# --------------------------------------------------------------------------
# Embeddings
# --------------------------------------------------------------------------

class EmbeddingProvider(Protocol):
    @property
    def dimension(self) -> int: ...

    def embed(self, text: str) -> Sequence[float]: ...


class HashEmbedder:
    """Deterministic hashing embedder for tests and offline runs.

    Each token hashes to a bucket and a sign; the vector is the signed
    bucket histogram, L2-normalized. Identical text embeds identically on
    every platform and run.
    """

    def __init__(self, dimension: int = 32) -> None:
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self._dimension = dimension

    @property
    def dimension(self) -> int:
        return self._dimension

    def embed(self, text: str) -> list[float]:
        import hashlib

        vec = [0.0] * self._dimension
        for token in tokenize(text):
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "big")
            bucket = value % self._dimension
            sign = 1.0 if (value >> 63) & 1 == 0 else -1.0
            vec[bucket] += sign
        norm = math.sqrt(sum(x * x for x in vec))
        if norm > 0.0:
            vec = [x / norm for x in vec]
        return vec


# --------------------------------------------------------------------------
# Index and retrieval
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PassageIndex:
    """Per-passage term statistics plus corpus-wide aggregates.

    The corpus aggregates (``doc_freqs``, ``avg_length``) describe the
    whole index; scoring recomputes them over the candidate subset.
    """

    passages: tuple[Passage, ...]
    term_freqs: tuple[Mapping[str, int], ...]
    lengths: tuple[int, ...]
    doc_freqs: Mapping[str, int]
    avg_length: float
    vectors: tuple[tuple[float, ...], ...] | None = None


def build_index(
    passages: Sequence[Passage], embedder: EmbeddingProvider | None = None
) -> PassageIndex:
    if not passages:
        raise DataError("cannot index an empty passage list")
    term_freqs = []
    lengths = []
    doc_freqs: Counter[str] = Counter()
    for passage in passages:
        tokens = tokenize(passage.text)
        tf = Counter(tokens)
        term_freqs.append(dict(tf))
        lengths.append(len(tokens))
        doc_freqs.update(tf.keys())
    vectors = None
    if embedder is not None:
        rows = []
        for passage in passages:
            vec = tuple(float(x) for x in embedder.embed(passage.text))
            if len(vec) != embedder.dimension:
                raise DataError(
                    f"embedder returned {len(vec)} dims, declared {embedder.dimension}"
                )
            rows.append(vec)
        vectors = tuple(rows)
    return PassageIndex(
        passages=tuple(passages),
        term_freqs=tuple(term_freqs),
        lengths=tuple(lengths),
        doc_freqs=dict(doc_freqs),
        avg_length=sum(lengths) / len(lengths),
        vectors=vectors,
    )


@dataclass(frozen=True)
class RetrievedPassage:
    passage: Passage
    score: float
    lexical_score: float
    dense_score: float | None = None


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def bm25_scores(index: PassageIndex, query_tokens: Sequence[str]) -> list[float]:
    """Raw BM25 over the candidate subset; non-candidates score 0.

    Query tokens keep their multiplicity: a term appearing twice in the
    query contributes twice.
    """
    unique_terms = set(query_tokens)
    candidates = [
        i
        for i, tf in enumerate(index.term_freqs)
        if any(t in tf for t in unique_terms)
    ]
    scores = [0.0] * len(index.passages)
    if not candidates:
        return scores
    n = len(candidates)
    avgdl = sum(index.lengths[i] for i in candidates) / n
    df: dict[str, int] = {
        t: sum(1 for i in candidates if t in index.term_freqs[i]) for t in unique_terms
    }
    for i in candidates:
        tf = index.term_freqs[i]
        length = index.lengths[i]
        total = 0.0
        for term in query_tokens:
            f = tf.get(term, 0)
            if f == 0:
                continue
            idf = math.log(1.0 + (n - df[term] + 0.5) / (df[term] + 0.5))
            denom = f + BM25_K1 * (1.0 - BM25_B + BM25_B * (length / avgdl if avgdl > 0 else 0.0))
            total += idf * f * (BM25_K1 + 1.0) / denom
        scores[i] = total
    return scores


def _minmax(scores: list[float], candidate_ids: list[int]) -> list[float]:
    out = [0.0] * len(scores)
    if not candidate_ids:
        return out
    values = [scores[i] for i in candidate_ids]
    lo, hi = min(values), max(values)
    for i in candidate_ids:
        if hi > lo:
            out[i] = (scores[i] - lo) / (hi - lo)
        else:
            out[i] = 1.0 if hi > 0.0 else 0.0
    return out


def retrieve(
    index: PassageIndex,
    query_phrases: Sequence[str],
    k: int,
    embedder: EmbeddingProvider | None = None,
) -> list[RetrievedPassage]:
    """Top-k passages for a query given as a list of phrases.

    The query is the concatenation of the phrases. Ties break on passage
    id so ranking is deterministic. Asks for more passages than exist
    return them all.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query_tokens = tokenize(" ".join(query_phrases))
    raw = bm25_scores(index, query_tokens)
    unique_terms = set(query_tokens)
    candidate_ids = [
        i
        for i, tf in enumerate(index.term_freqs)
        if any(t in tf for t in unique_terms)
    ]
    lexical = _minmax(raw, candidate_ids)

    dense: list[float] | None = None
    if embedder is not None and index.vectors is not None:
        phrase_vecs = [embedder.embed(p) for p in query_phrases]
        if phrase_vecs:
            centroid = [
                sum(v[d] for v in phrase_vecs) / len(phrase_vecs)
                for d in range(embedder.dimension)
            ]
        else:
            centroid = [0.0] * embedder.dimension
        dense = [(1.0 + _cosine(centroid, vec)) / 2.0 for vec in index.vectors]

    results = []
    for i, passage in enumerate(index.passages):
        if dense is not None:
            combined = 0.5 * lexical[i] + 0.5 * dense[i]
            results.append(
                RetrievedPassage(
                    passage=passage,
                    score=combined,
                    lexical_score=lexical[i],
                    dense_score=dense[i],
                )
            )
        else:
            results.append(
                RetrievedPassage(passage=passage, score=lexical[i], lexical_score=lexical[i])
            )
    results.sort(key=lambda r: (-r.score, r.passage.id))
    return results[:k]
