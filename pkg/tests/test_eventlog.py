"""Ingestion tests: XES and CSV parsing, skip-and-report, validation."""

from __future__ import annotations

import gzip
import io
import random
from datetime import date, datetime, timezone

import pytest

from wipcast.eventlog import (
    ColumnMapping,
    EmptyLogError,
    MappingError,
    XesParseError,
    export_csv,
    parse_csv,
    parse_timestamp,
    parse_xes,
    validate,
)

from conftest import CSV_MAPPING, NINE_EVENTS, csv_document, xes_document


def test_parse_timestamp_accepts_zulu_suffix():
    ts = parse_timestamp("2024-03-01T08:00:00Z")
    assert ts == datetime(2024, 3, 1, 8, tzinfo=timezone.utc)


def test_parse_timestamp_normalizes_offset_to_utc():
    ts = parse_timestamp("2024-03-01T10:00:00+02:00")
    assert ts == datetime(2024, 3, 1, 8, tzinfo=timezone.utc)
    assert ts.tzinfo == timezone.utc


def test_parse_timestamp_assumes_utc_for_naive():
    ts = parse_timestamp("2024-03-01T08:00:00")
    assert ts.tzinfo == timezone.utc


def test_parse_timestamp_custom_format():
    ts = parse_timestamp("01/03/2024 08:30", fmt="%d/%m/%Y %H:%M")
    assert ts == datetime(2024, 3, 1, 8, 30, tzinfo=timezone.utc)


def test_parse_xes_minimal_trace():
    doc = xes_document({"case1": [("A", datetime(2024, 1, 1, 9, tzinfo=timezone.utc)),
                                  ("B", datetime(2024, 1, 2, 9, tzinfo=timezone.utc))]})
    log = parse_xes(io.BytesIO(doc.encode()), source_name="mini.xes")
    assert len(log.events) == 2
    assert all(ev.case_id == "case1" for ev in log.events)
    assert log.events[0].activity == "A"
    assert log.source_meta.row_count == 2
    assert log.source_meta.skipped == 0


def test_parse_xes_empty_log_raises():
    with pytest.raises(EmptyLogError):
        parse_xes(io.BytesIO(b'<log xes.version="1.0"></log>'), source_name="empty.xes")


def test_parse_xes_orders_events_globally(nine_event_log):
    got = [(ev.case_id, ev.activity, ev.timestamp) for ev in nine_event_log.events]
    assert got == NINE_EVENTS


def test_parse_xes_malformed_xml_reports_position():
    broken = b'<log><trace><event></log>'
    with pytest.raises(XesParseError) as exc:
        parse_xes(io.BytesIO(broken), source_name="broken.xes")
    assert "line" in str(exc.value)


def test_parse_xes_skips_event_missing_activity():
    doc = (
        '<log><trace><string key="concept:name" value="c1"/>'
        '<event><date key="time:timestamp" value="2024-01-01T09:00:00Z"/></event>'
        '<event><string key="concept:name" value="A"/>'
        '<date key="time:timestamp" value="2024-01-01T10:00:00Z"/></event>'
        "</trace></log>"
    )
    log = parse_xes(io.BytesIO(doc.encode()), source_name="partial.xes")
    assert len(log.events) == 1
    assert log.source_meta.skipped == 1
    assert log.source_meta.diagnostics


def test_parse_xes_gzip_stream(nine_event_xes):
    packed = gzip.compress(nine_event_xes.encode())
    log = parse_xes(io.BytesIO(packed), source_name="nine.xes.gz")
    assert len(log.events) == 9


def test_parse_xes_typed_attributes():
    doc = (
        '<log><trace><string key="concept:name" value="c1"/>'
        '<event><string key="concept:name" value="A"/>'
        '<date key="time:timestamp" value="2024-01-01T09:00:00Z"/>'
        '<int key="priority" value="3"/>'
        '<float key="cost" value="1.5"/>'
        '<boolean key="urgent" value="true"/>'
        "</event></trace></log>"
    )
    log = parse_xes(io.BytesIO(doc.encode()), source_name="typed.xes")
    attrs = log.events[0].attributes
    assert attrs["priority"] == 3
    assert attrs["cost"] == 1.5
    assert attrs["urgent"] is True


def test_parse_csv_basic():
    text = csv_document(NINE_EVENTS[:3])
    log = parse_csv(io.StringIO(text), CSV_MAPPING, source_name="three.csv")
    assert len(log.events) == 3
    assert log.source_meta.format == "csv"


def test_parse_csv_skips_bad_timestamp_rows():
    rows = csv_document(NINE_EVENTS[:4]).splitlines()
    rows.insert(2, "caseX,Broken,not-a-date")
    log = parse_csv(io.StringIO("\n".join(rows)), CSV_MAPPING, source_name="bad.csv")
    assert len(log.events) == 4
    assert log.source_meta.skipped == 1
    assert any("not-a-date" in d or "row" in d.lower() for d in log.source_meta.diagnostics)


def test_parse_csv_missing_column_raises():
    text = "case,when\nc1,2024-01-01T00:00:00Z\n"
    with pytest.raises(MappingError):
        parse_csv(io.StringIO(text), CSV_MAPPING, source_name="cols.csv")


def test_parse_csv_all_rows_bad_raises_empty():
    text = "case,activity,ts\nc1,A,nope\nc2,B,also-nope\n"
    with pytest.raises(EmptyLogError):
        parse_csv(io.StringIO(text), CSV_MAPPING, source_name="allbad.csv")


def test_parse_csv_extra_columns_become_attributes():
    text = "case,activity,ts,team\nc1,A,2024-01-01T09:00:00Z,blue\n"
    log = parse_csv(io.StringIO(text), CSV_MAPPING, source_name="extra.csv")
    assert log.events[0].attributes == {"team": "blue"}


def test_csv_and_xes_fixtures_agree(nine_event_log, nine_event_csv_log):
    xes_rows = [(e.case_id, e.activity, e.timestamp) for e in nine_event_log.events]
    csv_rows = [(e.case_id, e.activity, e.timestamp) for e in nine_event_csv_log.events]
    assert xes_rows == csv_rows


def test_parse_is_deterministic(nine_event_xes):
    a = parse_xes(io.BytesIO(nine_event_xes.encode()), source_name="a.xes")
    b = parse_xes(io.BytesIO(nine_event_xes.encode()), source_name="b.xes")
    assert a.events == b.events


def test_events_sorted_by_timestamp_after_shuffle():
    rng = random.Random(7)
    rows = list(NINE_EVENTS)
    rng.shuffle(rows)
    log = parse_csv(io.StringIO(csv_document(rows)), CSV_MAPPING, source_name="shuf.csv")
    stamps = [ev.timestamp for ev in log.events]
    assert stamps == sorted(stamps)


def test_export_csv_round_trip(nine_event_log):
    mapping = ColumnMapping(case="case_id", activity="activity", timestamp="timestamp")
    text = export_csv(nine_event_log, mapping)
    back = parse_csv(io.StringIO(text), mapping, source_name="roundtrip.csv")
    orig = [(e.case_id, e.activity, e.timestamp) for e in nine_event_log.events]
    again = [(e.case_id, e.activity, e.timestamp) for e in back.events]
    assert orig == again


def test_validate_counts_cases_and_span(nine_event_log):
    report = validate(nine_event_log)
    assert report.event_count == 9
    assert report.case_count == 3
    assert report.first_timestamp == datetime(2024, 3, 1, 8, tzinfo=timezone.utc)
    assert report.last_timestamp == datetime(2024, 3, 4, 10, tzinfo=timezone.utc)
    assert report.monotonic
    assert report.duplicate_count == 0


def test_validate_flags_duplicates():
    rows = list(NINE_EVENTS) + [NINE_EVENTS[0]]
    log = parse_csv(io.StringIO(csv_document(rows)), CSV_MAPPING, source_name="dup.csv")
    report = validate(log)
    assert report.duplicate_count == 1
