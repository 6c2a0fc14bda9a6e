"""Locale-aware date parsing shared by type checks, recognizers, and post-processors.

Accepted formats:

* ISO ``yyyy-mm-dd`` under any locale tag.
* Month-name forms (``April 5, 2020`` / ``5 April 2020``) under any locale
  tag; month names are unambiguous, so both orders are accepted everywhere.
* Numeric triples (``4/5/2020``) only under a locale that fixes the order:
  US-tagged locales read month/day/year, EU-tagged locales day/month/year.
* Net-terms due dates (``Net 30``, ``30 days``) are recognized as valid
  DATE surfaces but are never converted to a calendar date.

Two-digit years resolve to 2000-2069 and 1970-1999.
"""

from __future__ import annotations

import datetime as dt
import re

_US_TAGS = {"US", "USA"}
_EU_TAGS = {
    "EU", "UK", "GB", "IE", "DE", "FR", "ES", "IT", "NL", "PT", "PL",
    "AU", "NZ", "IN", "ZA",
}

_MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5,
    "june": 6, "july": 7, "august": 8, "september": 9, "october": 10,
    "november": 11, "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7,
    "aug": 8, "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}

_MONTH_RX = "|".join(sorted(_MONTHS, key=len, reverse=True))

_ISO_RX = re.compile(r"^\s*(\d{4})-(\d{1,2})-(\d{1,2})\s*$")
_TRIPLE_RX = re.compile(r"^\s*(\d{1,2})[/.-](\d{1,2})[/.-](\d{2}|\d{4})\s*$")
_NAME_FIRST_RX = re.compile(
    rf"^\s*({_MONTH_RX})\.?\s+(\d{{1,2}})(?:st|nd|rd|th)?\s*,?\s+(\d{{2}}|\d{{4}})\s*$",
    re.IGNORECASE,
)
_DAY_FIRST_RX = re.compile(
    rf"^\s*(\d{{1,2}})(?:st|nd|rd|th)?\s+(?:of\s+)?({_MONTH_RX})\.?\s*,?\s+(\d{{2}}|\d{{4}})\s*$",
    re.IGNORECASE,
)
_NET_TERMS_RX = re.compile(r"^\s*(?:net[\s-]*\d{1,3}|\d{1,3}\s*days?)\s*$", re.IGNORECASE)

# Scanning variants used by the built-in recognizer and mock distractor search.
DATE_SCAN_RX = re.compile(
    rf"\b\d{{4}}-\d{{1,2}}-\d{{1,2}}\b"
    rf"|\b\d{{1,2}}[/.-]\d{{1,2}}[/.-]\d{{2,4}}\b"
    rf"|\b(?:{_MONTH_RX})\.?\s+\d{{1,2}}(?:st|nd|rd|th)?\s*,?\s+\d{{4}}\b"
    rf"|\b\d{{1,2}}(?:st|nd|rd|th)?\s+(?:of\s+)?(?:{_MONTH_RX})\.?\s*,?\s+\d{{4}}\b",
    re.IGNORECASE,
)


def locale_kind(locale: str) -> str:
    """Map an opaque locale tag to a date convention: 'US', 'EU', or ''."""
    parts = re.split(r"[-_\s]+", locale.strip().upper())
    for part in parts:
        if part in _US_TAGS:
            return "US"
    for part in parts:
        if part in _EU_TAGS:
            return "EU"
    return ""


def is_net_terms(value: str) -> bool:
    return bool(_NET_TERMS_RX.match(value))


def _year(raw: str) -> int:
    y = int(raw)
    if len(raw) == 2:
        return 2000 + y if y <= 69 else 1900 + y
    return y


def _make_date(year: int, month: int, day: int) -> dt.date | None:
    try:
        return dt.date(year, month, day)
    except ValueError:
        return None


def parse_date(value: str, locale: str = "") -> dt.date | None:
    """Parse ``value`` under the locale's accepted formats; None when invalid."""
    m = _ISO_RX.match(value)
    if m:
        return _make_date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
    m = _NAME_FIRST_RX.match(value)
    if m:
        return _make_date(_year(m.group(3)), _MONTHS[m.group(1).lower()], int(m.group(2)))
    m = _DAY_FIRST_RX.match(value)
    if m:
        return _make_date(_year(m.group(3)), _MONTHS[m.group(2).lower()], int(m.group(1)))
    kind = locale_kind(locale)
    m = _TRIPLE_RX.match(value)
    if m and kind:
        a, b, y = int(m.group(1)), int(m.group(2)), _year(m.group(3))
        if kind == "US":
            return _make_date(y, a, b)
        return _make_date(y, b, a)
    return None
