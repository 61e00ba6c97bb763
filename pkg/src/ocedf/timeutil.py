"""Timestamp parsing/formatting helpers.

All timestamps in a log are timezone-aware, normalized to UTC and truncated
to millisecond precision. Naive inputs are assumed to be UTC.
"""

from __future__ import annotations

from datetime import datetime, timezone

from .errors import DataError

ISO_MS = "%Y-%m-%dT%H:%M:%S.%f"


def to_utc_ms(dt: datetime) -> datetime:
    """Normalize to UTC and truncate microseconds to whole milliseconds."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    else:
        dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


def parse_iso(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; a trailing ``Z`` is accepted for UTC."""
    cleaned = text.strip()
    if cleaned.endswith(("Z", "z")):
        cleaned = cleaned[:-1] + "+00:00"
    try:
        return to_utc_ms(datetime.fromisoformat(cleaned))
    except ValueError as exc:
        raise DataError(f"unparseable timestamp {text!r}: {exc}") from None


def parse_with_format(text: str, fmt: str) -> datetime:
    """Parse with a strftime pattern; naive results are assumed UTC."""
    try:
        return to_utc_ms(datetime.strptime(text.strip(), fmt))
    except ValueError as exc:
        raise DataError(f"unparseable timestamp {text!r} for format {fmt!r}: {exc}") from None


def format_iso(dt: datetime) -> str:
    """Render as ISO-8601 with explicit UTC offset and millisecond precision."""
    return to_utc_ms(dt).isoformat(timespec="milliseconds")
