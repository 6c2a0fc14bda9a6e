"""Pre- and post-processing hooks around extraction.

Pre-processors transform a whole document before segmentation (for
example whitespace normalization). Post-processors transform a winning
value before it is persisted (for example date canonicalization).

Registries are built once from a profile's ``defaults`` block and then
treated as immutable. Post-processor chains are looked up first by field
name and then by the field's response type; the first chain found wins.
Processor failures are wrapped in :class:`ProcessorError` carrying the
processor name so faults are attributable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Sequence

from . import dates
from .docmodel import Document
from .errors import ConfigError, ProcessorError
from .foi import FieldOfInterest, ProfileDefaults

PreProcessor = Callable[[Document], Document]
PostProcessor = Callable[[str, FieldOfInterest], str]

_WS_RX = re.compile(r"\s+")
_CONTROL_RX = re.compile(r"[\x00-\x08\x0b-\x1f\x7f]")


# --------------------------------------------------------------------------
# Built-in operations
# --------------------------------------------------------------------------

def normalize_whitespace_text(text: str) -> str:
    """Strip control characters and collapse whitespace runs to one space."""
    return _WS_RX.sub(" ", _CONTROL_RX.sub("", text)).strip()


def normalize_whitespace_doc(doc: Document) -> Document:
    """Apply :func:`normalize_whitespace_text` to every paragraph.

    Paragraphs that become empty are dropped; structure is otherwise kept.
    """
    pages = []
    for page in doc.pages:
        sections = []
        for section in page.sections:
            paragraphs = tuple(
                cleaned
                for cleaned in (normalize_whitespace_text(p) for p in section.paragraphs)
                if cleaned
            )
            if paragraphs:
                sections.append(replace(section, paragraphs=paragraphs))
        pages.append(replace(page, sections=tuple(sections)))
    return replace(doc, pages=tuple(pages))


def date_to_iso(value: str, locale: str = "") -> str:
    """Render a validated date surface as ``yyyy-mm-dd``.

    Net-terms surfaces (``Net 30``) pass through unchanged; they carry no
    calendar date. Already-ISO values are returned canonically padded, so
    the operation is idempotent. Unparseable input raises ValueError
    (unreachable after validation; surfaced as a pipeline fault).
    """
    if dates.is_net_terms(value):
        return value
    parsed = dates.parse_date(value, locale)
    if parsed is None:
        raise ValueError(f"cannot convert {value!r} to an ISO date under locale {locale!r}")
    return parsed.isoformat()


_AMOUNT_RX = re.compile(r"^[+-]?\d+(\.\d*)?$|^[+-]?\.\d+$")


# Decimal-separator convention is independent of date order: the UK writes
# day-first dates but dot-decimal amounts, so this set deliberately excludes
# the anglosphere tags that dates.py groups with the EU.
_COMMA_DECIMAL_TAGS = frozenset(
    {"EU", "DE", "FR", "ES", "IT", "NL", "PT", "PL", "AT", "BE", "DK", "FI", "SE", "NO", "CZ"}
)

_DOT_DECIMAL_TAGS = frozenset({"US", "USA", "UK", "GB", "IE", "AU", "NZ", "IN", "ZA"})


def _comma_decimal_locale(locale: str) -> bool:
    parts = {p.upper() for p in re.split(r"[-_\s]+", locale) if p}
    if parts & _DOT_DECIMAL_TAGS:
        return False
    return bool(parts & _COMMA_DECIMAL_TAGS)


def normalize_amount(value: str, locale: str = "") -> str:
    """Canonicalize a monetary or numeric surface to ``<digits>.<frac> <CODE>``.

    Currency symbols map to their ISO code ($ -> USD and so on); an
    explicit trailing or leading 3-letter code wins over a symbol.
    Separator ambiguity resolves by locale: under comma-decimal locales
    (continental Europe) a single comma is the decimal separator and
    dots act as thousands marks; everywhere else, dot-decimal with
    comma thousands is assumed. The comma rule only fires when a comma
    is present, so canonical dot-decimal output re-normalizes to itself
    under any locale. Fractions are padded to two digits but longer
    fractions are kept verbatim so no value information is lost. When
    no currency marker is present the bare normalized number is
    returned.
    """
    symbol_codes = {"$": "USD", "€": "EUR", "£": "GBP", "¥": "JPY", "₹": "INR"}
    s = value.strip()
    comma_decimal = _comma_decimal_locale(locale)
    code = ""
    m = re.match(r"^([A-Z]{3})(?![A-Za-z])", s)
    if m:
        code = m.group(1)
        s = s[m.end():]
    m = re.search(r"(?<![A-Za-z])([A-Z]{3})$", s)
    if m and not code:
        code = m.group(1)
        s = s[: m.start()]
    for sym, sym_code in symbol_codes.items():
        if sym in s:
            if not code:
                code = sym_code
            s = s.replace(sym, "")
    s = s.replace(" ", "")
    if comma_decimal and s.count(",") == 1:
        s = s.replace(".", "").replace(",", ".")
    else:
        s = s.replace(",", "")
    if not _AMOUNT_RX.match(s):
        raise ValueError(f"cannot normalize amount {value!r}")
    sign = ""
    if s[0] in "+-":
        sign, s = ("-" if s[0] == "-" else ""), s[1:]
    whole, _, frac = s.partition(".")
    whole = whole.lstrip("0") or "0"
    if len(frac) < 2:
        frac = frac.ljust(2, "0")
    number = f"{sign}{whole}.{frac}"
    return f"{number} {code}" if code else number


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProcessorRegistry:
    """Named processors with deterministic application order.

    ``pre`` runs in order over the document. ``post`` maps a field name
    or response-type value to an ordered chain.
    """

    pre: tuple[tuple[str, PreProcessor], ...] = ()
    post: tuple[tuple[str, tuple[tuple[str, PostProcessor], ...]], ...] = ()

    def __post_init__(self) -> None:
        names = [name for name, _ in self.pre]
        if len(names) != len(set(names)):
            raise ConfigError("duplicate pre-processor name")
        keys = [key for key, _ in self.post]
        if len(keys) != len(set(keys)):
            raise ConfigError("duplicate post-processor key")
        for key, chain in self.post:
            chain_names = [name for name, _ in chain]
            if len(chain_names) != len(set(chain_names)):
                raise ConfigError(f"duplicate post-processor name under {key!r}")

    def post_chain(self, foi: FieldOfInterest) -> tuple[tuple[str, PostProcessor], ...]:
        """Chain for a field: by field name first, then by response type."""
        table: Mapping[str, tuple[tuple[str, PostProcessor], ...]] = dict(self.post)
        if foi.name in table:
            return table[foi.name]
        return table.get(foi.response_type.value, ())


def run_pre(registry: ProcessorRegistry, doc: Document) -> Document:
    """Run every pre-processor in registration order."""
    for name, fn in registry.pre:
        try:
            doc = fn(doc)
        except Exception as exc:  # noqa: BLE001
            raise ProcessorError(name, exc) from exc
    return doc


def apply_post(registry: ProcessorRegistry, foi: FieldOfInterest, value: str) -> str:
    """Run the field's post-processor chain over a winning value."""
    for name, fn in registry.post_chain(foi):
        try:
            value = fn(value, foi)
        except Exception as exc:  # noqa: BLE001
            raise ProcessorError(name, exc) from exc
    return value


def _date_to_iso_post(value: str, foi: FieldOfInterest) -> str:
    return date_to_iso(value, foi.locale)


def _normalize_amount_post(value: str, foi: FieldOfInterest) -> str:
    return normalize_amount(value, foi.locale)


BUILTIN_PRE: Mapping[str, PreProcessor] = {
    "normalize-whitespace": normalize_whitespace_doc,
}
BUILTIN_POST: Mapping[str, PostProcessor] = {
    "date-to-iso": _date_to_iso_post,
    "normalize-amount": _normalize_amount_post,
}

_DEFAULT_PRE = ("normalize-whitespace",)
_DEFAULT_POST: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("DATE", ("date-to-iso",)),
    ("MONEY", ("normalize-amount",)),
    ("NUMERIC", ("normalize-amount",)),
)


def build_registry(defaults: ProfileDefaults | None = None) -> ProcessorRegistry:
    """Build a registry from a profile's defaults block.

    Absent (None) processor lists select the built-in defaults; explicit
    empty lists disable that stage. Unknown names are config errors.
    """
    pre_names: Sequence[str] = _DEFAULT_PRE
    post_spec: Sequence[tuple[str, tuple[str, ...]]] = _DEFAULT_POST
    if defaults is not None:
        if defaults.pre_processors is not None:
            pre_names = defaults.pre_processors
        if defaults.post_processors is not None:
            post_spec = defaults.post_processors

    pre = []
    for name in pre_names:
        if name not in BUILTIN_PRE:
            raise ConfigError(f"unknown pre-processor {name!r}")
        pre.append((name, BUILTIN_PRE[name]))
    post = []
    for key, names in post_spec:
        chain = []
        for name in names:
            if name not in BUILTIN_POST:
                raise ConfigError(f"unknown post-processor {name!r}")
            chain.append((name, BUILTIN_POST[name]))
        post.append((key, tuple(chain)))
    return ProcessorRegistry(pre=tuple(pre), post=tuple(post))


def default_registry() -> ProcessorRegistry:
    return build_registry(None)
