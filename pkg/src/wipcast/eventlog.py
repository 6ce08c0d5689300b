"""Event log ingestion: XES (XML) and CSV parsers producing a normalized event sequence.

Both parsers emit the same structure: a timestamp-sorted sequence of events, each
carrying a case id, an activity name, a UTC timestamp, an optional lifecycle
marker, and any further attributes found in the source. Individually malformed
events are skipped with a diagnostic rather than aborting the whole file, since
real-world logs routinely contain sporadic defects.
"""

from __future__ import annotations

import csv
import gzip
import io
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Union

logger = logging.getLogger(__name__)

Scalar = Union[str, int, float, bool, datetime]


class EventLogError(Exception):
    """Base class for ingestion failures."""


class XesParseError(EventLogError):
    """Structurally malformed XES (bad XML). Carries line/column in the message."""


class EmptyLogError(EventLogError):
    """The source contained no usable events."""


class MappingError(EventLogError):
    """The CSV column mapping does not match the file header."""


@dataclass(frozen=True)
class Event:
    """One process event: who (case), what (activity), when (UTC timestamp)."""

    case_id: str
    activity: str
    timestamp: datetime
    lifecycle: str | None = None
    attributes: dict[str, Scalar] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.case_id:
            raise ValueError("case_id must be non-empty")
        if not self.activity:
            raise ValueError("activity must be non-empty")
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")


@dataclass(frozen=True)
class SourceMeta:
    """Provenance of a parsed log, plus skip accounting."""

    name: str
    format: str
    row_count: int
    skipped: int = 0
    diagnostics: tuple[str, ...] = ()


@dataclass(frozen=True)
class EventLog:
    """Immutable, timestamp-sorted event sequence."""

    events: tuple[Event, ...]
    source_meta: SourceMeta

    def __len__(self) -> int:
        return len(self.events)

    def case_ids(self) -> list[str]:
        """Distinct case ids in order of first appearance."""
        seen: dict[str, None] = {}
        for ev in self.events:
            seen.setdefault(ev.case_id, None)
        return list(seen)


@dataclass(frozen=True)
class ColumnMapping:
    """Names the CSV columns holding the core event fields.

    ``timestamp_format`` is a ``strptime`` pattern; ``None`` means ISO 8601.
    Columns not mentioned here are ingested as string attributes.
    """

    case: str
    activity: str
    timestamp: str
    lifecycle: str | None = None
    timestamp_format: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    event_count: int
    case_count: int
    first_timestamp: datetime | None
    last_timestamp: datetime | None
    monotonic: bool
    duplicate_count: int


def parse_timestamp(text: str, fmt: str | None = None) -> datetime:
    """Parse a timestamp string to an aware UTC datetime.

    Accepts ISO 8601 (with ``Z`` or numeric offsets) when ``fmt`` is None,
    otherwise uses the given ``strptime`` format. Naive values are taken as UTC.
    """
    text = text.strip()
    if fmt is not None:
        parsed = datetime.strptime(text, fmt)
    else:
        iso = text.replace("Z", "+00:00") if text.endswith("Z") else text
        parsed = datetime.fromisoformat(iso)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def _as_bytes(stream: bytes | IO[bytes]) -> bytes:
    if isinstance(stream, bytes):
        data = stream
    else:
        data = stream.read()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _as_text(stream: str | bytes | IO[str] | IO[bytes]) -> str:
    if isinstance(stream, str):
        return stream
    data = stream if isinstance(stream, bytes) else stream.read()
    if isinstance(data, str):
        return data
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data.decode("utf-8-sig")


def _sorted_events(events: list[Event]) -> tuple[Event, ...]:
    # Stable sort: equal timestamps keep input order (then case_id can never
    # differ within one input position, so the documented tie rule reduces to this).
    return tuple(sorted(events, key=lambda ev: ev.timestamp))


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


_XES_VALUE_PARSERS = {
    "string": lambda v: v,
    "int": int,
    "float": float,
    "boolean": lambda v: v.strip().lower() == "true",
    "date": parse_timestamp,
}


def _xes_attributes(element: ET.Element) -> dict[str, Scalar]:
    """Read the typed key/value children of a trace or event element."""
    out: dict[str, Scalar] = {}
    for child in element:
        kind = _local(child.tag)
        parser = _XES_VALUE_PARSERS.get(kind)
        if parser is None:
            continue
        key = child.get("key")
        value = child.get("value")
        if key is None or value is None:
            continue
        try:
            out[key] = parser(value)
        except (ValueError, TypeError):
            out[key] = value
    return out


def parse_xes(stream: bytes | IO[bytes], source_name: str = "<xes>") -> EventLog:
    """Parse an XES byte stream into an :class:`EventLog`.

    The case id comes from the trace-level ``concept:name``; each event needs
    ``concept:name`` and ``time:timestamp``. Events missing either are skipped
    with a diagnostic. Raises :class:`XesParseError` on malformed XML and
    :class:`EmptyLogError` when no usable event remains.
    """
    data = _as_bytes(stream)
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise XesParseError(f"{source_name}: malformed XML at line {line}, column {col}: {exc}") from exc

    events: list[Event] = []
    diagnostics: list[str] = []
    seen = 0
    for trace in root:
        if _local(trace.tag) != "trace":
            continue
        trace_attrs = _xes_attributes(trace)
        case_id = trace_attrs.get("concept:name")
        if not isinstance(case_id, str) or not case_id:
            n = sum(1 for el in trace if _local(el.tag) == "event")
            seen += n
            diagnostics.append(f"trace without concept:name skipped ({n} events)")
            continue
        for el in trace:
            if _local(el.tag) != "event":
                continue
            seen += 1
            attrs = _xes_attributes(el)
            activity = attrs.pop("concept:name", None)
            ts = attrs.pop("time:timestamp", None)
            if not isinstance(activity, str) or not activity:
                diagnostics.append(f"case {case_id!r}: event without concept:name skipped")
                continue
            if not isinstance(ts, datetime):
                diagnostics.append(f"case {case_id!r}: event {activity!r} without parseable time:timestamp skipped")
                continue
            lifecycle = attrs.pop("lifecycle:transition", None)
            if lifecycle is not None and not isinstance(lifecycle, str):
                lifecycle = str(lifecycle)
            events.append(Event(case_id, activity, ts, lifecycle, attrs))

    for msg in diagnostics:
        logger.warning("%s: %s", source_name, msg)
    if not events:
        raise EmptyLogError(f"{source_name}: no usable events")
    meta = SourceMeta(source_name, "xes", seen, seen - len(events), tuple(diagnostics))
    return EventLog(_sorted_events(events), meta)


def parse_csv(
    stream: str | bytes | IO[str] | IO[bytes],
    mapping: ColumnMapping,
    source_name: str = "<csv>",
) -> EventLog:
    """Parse CSV input (header row required, UTF-8 if bytes) into an :class:`EventLog`.

    Unmapped columns become string attributes; empty cells are dropped. Rows
    with an unparseable timestamp or a blank case/activity are skipped with a
    diagnostic.
    """
    text = _as_text(stream)
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    required = [mapping.case, mapping.activity, mapping.timestamp]
    if mapping.lifecycle:
        required.append(mapping.lifecycle)
    missing = [col for col in required if col not in header]
    if missing:
        raise MappingError(f"{source_name}: mapped column(s) not in header: {', '.join(missing)}")

    core = {mapping.case, mapping.activity, mapping.timestamp, mapping.lifecycle}
    events: list[Event] = []
    diagnostics: list[str] = []
    seen = 0
    for i, row in enumerate(reader, start=2):
        seen += 1
        case_id = (row.get(mapping.case) or "").strip()
        activity = (row.get(mapping.activity) or "").strip()
        raw_ts = (row.get(mapping.timestamp) or "").strip()
        if not case_id or not activity:
            diagnostics.append(f"row {i}: empty case or activity, skipped")
            continue
        try:
            ts = parse_timestamp(raw_ts, mapping.timestamp_format)
        except ValueError:
            diagnostics.append(f"row {i}: unparseable timestamp {raw_ts!r}, skipped")
            continue
        lifecycle = None
        if mapping.lifecycle:
            lifecycle = (row.get(mapping.lifecycle) or "").strip() or None
        attrs: dict[str, Scalar] = {
            k: v for k, v in row.items() if k not in core and v is not None and v != ""
        }
        events.append(Event(case_id, activity, ts, lifecycle, attrs))

    for msg in diagnostics:
        logger.warning("%s: %s", source_name, msg)
    if not events:
        raise EmptyLogError(f"{source_name}: no usable events")
    meta = SourceMeta(source_name, "csv", seen, seen - len(events), tuple(diagnostics))
    return EventLog(_sorted_events(events), meta)


def export_csv(log: EventLog, mapping: ColumnMapping | None = None) -> str:
    """Render a log back to CSV text that :func:`parse_csv` round-trips.

    Attribute keys become extra columns (union over all events, sorted).
    Typed attribute values are stringified, so only logs with string attributes
    round-trip to equality.
    """
    mapping = mapping or ColumnMapping("case", "activity", "timestamp", "lifecycle")
    extra = sorted({k for ev in log.events for k in ev.attributes})
    lifecycle_col = mapping.lifecycle or "lifecycle"
    header = [mapping.case, mapping.activity, mapping.timestamp, lifecycle_col, *extra]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for ev in log.events:
        row = [ev.case_id, ev.activity, ev.timestamp.isoformat(), ev.lifecycle or ""]
        for key in extra:
            value = ev.attributes.get(key, "")
            row.append(value.isoformat() if isinstance(value, datetime) else str(value) if value != "" else "")
        writer.writerow(row)
    return buf.getvalue()


def validate(log: EventLog) -> ValidationReport:
    """Summarize a log: counts, span, sortedness, and duplicate events."""
    events = log.events
    if not events:
        return ValidationReport(0, 0, None, None, True, 0)
    monotonic = all(a.timestamp <= b.timestamp for a, b in zip(events, events[1:]))
    keys = [(ev.case_id, ev.activity, ev.timestamp) for ev in events]
    duplicates = len(keys) - len(set(keys))
    return ValidationReport(
        event_count=len(events),
        case_count=len(set(ev.case_id for ev in events)),
        first_timestamp=events[0].timestamp,
        last_timestamp=events[-1].timestamp,
        monotonic=monotonic,
        duplicate_count=duplicates,
    )
