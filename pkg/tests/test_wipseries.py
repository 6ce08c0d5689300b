"""WiP replay tests, checked against hand-computed values and a brute-force oracle."""

from __future__ import annotations

import io
import random
from datetime import date, datetime, time, timedelta, timezone

import pytest

from wipcast.eventlog import ColumnMapping, EmptyLogError, parse_csv
from wipcast.wipseries import (
    WIP_CSV_HEADER,
    LifecycleConfig,
    WipEvent,
    active_count_at,
    build_wip_series,
    export_wip_csv,
    fill_gaps,
    first_event,
    last_event,
    load_wip_csv,
    wip_event,
)

from conftest import (
    CSV_MAPPING,
    FIVE_CASE_EXPECTED,
    FIVE_CASE_INTERVALS,
    csv_document,
    make_log,
)


def _utc(y, mo, d, h, mi=0):
    return datetime(y, mo, d, h, mi, tzinfo=timezone.utc)


def test_single_case_same_day():
    log = make_log([("c1", "open", _utc(2024, 1, 1, 9)), ("c1", "close", _utc(2024, 1, 1, 17))])
    series = build_wip_series(log, LifecycleConfig())
    assert len(series.events) == 1
    ev = series.events[0]
    assert (ev.open, ev.high, ev.low, ev.close) == (0, 1, 0, 0)
    assert (ev.new, ev.done, ev.started) == (1, 1, 1)


def test_single_event_case_never_counts_as_active():
    log = make_log([("c1", "solo", _utc(2024, 1, 1, 9))])
    series = build_wip_series(log, LifecycleConfig())
    ev = series.events[0]
    assert (ev.open, ev.high, ev.low, ev.close) == (0, 0, 0, 0)
    assert (ev.new, ev.done) == (1, 1)
    assert active_count_at(log, LifecycleConfig(), _utc(2024, 1, 1, 9)) == 0


def test_five_case_fixture_matches_hand_simulation(five_case_log):
    series = build_wip_series(five_case_log, LifecycleConfig())
    got = [
        (ev.date, ev.open, ev.high, ev.low, ev.close, ev.new, ev.done, ev.started)
        for ev in series.events
    ]
    assert got == FIVE_CASE_EXPECTED


def test_five_case_calendar_fields(five_case_log):
    series = build_wip_series(five_case_log, LifecycleConfig())
    first = series.events[0]
    # 2024-05-01 was a Wednesday, day 122 of a leap year.
    assert first.day_of_week == 3
    assert first.day_of_month == 1
    assert first.day_of_year == 122


def test_adjacency_open_equals_previous_close(five_case_log):
    series = build_wip_series(five_case_log, LifecycleConfig())
    for prev, cur in zip(series.events, series.events[1:]):
        assert cur.open == prev.close


def test_flow_conservation(five_case_log):
    series = build_wip_series(five_case_log, LifecycleConfig())
    net = sum(ev.new - ev.done for ev in series.events)
    assert net == series.events[-1].close - series.events[0].open
    for ev in series.events:
        assert ev.close == ev.open + ev.new - ev.done


def test_oracle_agrees_with_bounds(five_case_log):
    cfg = LifecycleConfig()
    series = build_wip_series(five_case_log, cfg)
    for ev in series.events:
        for hour in range(0, 24, 3):
            instant = datetime.combine(ev.date, time(hour), tzinfo=timezone.utc)
            count = active_count_at(five_case_log, cfg, instant)
            assert ev.low <= count <= ev.high


def test_oracle_hand_counts(five_case_log):
    cfg = LifecycleConfig()
    assert active_count_at(five_case_log, cfg, _utc(2024, 4, 30, 12)) == 0
    assert active_count_at(five_case_log, cfg, _utc(2024, 5, 1, 10)) == 2
    assert active_count_at(five_case_log, cfg, _utc(2024, 5, 2, 11, 30)) == 4
    assert active_count_at(five_case_log, cfg, _utc(2024, 5, 4, 0)) == 0


def test_open_matches_oracle_at_day_start(five_case_log):
    cfg = LifecycleConfig()
    series = build_wip_series(five_case_log, cfg)
    for ev in series.events:
        start = datetime.combine(ev.date, time(0), tzinfo=timezone.utc)
        assert ev.open == active_count_at(five_case_log, cfg, start)


def test_build_invariant_to_input_order(five_case_log):
    rows = []
    for case_id, (start, end) in FIVE_CASE_INTERVALS.items():
        rows.append((case_id, "open", start))
        rows.append((case_id, "close", end))
    rng = random.Random(11)
    rng.shuffle(rows)
    shuffled = make_log(rows, name="shuffled.csv")
    a = build_wip_series(five_case_log, LifecycleConfig())
    b = build_wip_series(shuffled, LifecycleConfig())
    assert a.events == b.events


def test_gap_carry_inserts_flat_day():
    log = make_log(
        [
            ("c1", "open", _utc(2024, 1, 1, 9)),
            ("c1", "close", _utc(2024, 1, 3, 9)),
            ("c2", "open", _utc(2024, 1, 1, 10)),
            ("c2", "close", _utc(2024, 1, 3, 10)),
        ]
    )
    series = build_wip_series(log, LifecycleConfig(), gap_policy="carry")
    assert [ev.date for ev in series.events] == [date(2024, 1, j) for j in (1, 2, 3)]
    middle = series.events[1]
    assert (middle.open, middle.high, middle.low, middle.close) == (2, 2, 2, 2)
    assert (middle.new, middle.done, middle.started) == (0, 0, 0)
    assert series.contiguous


def test_gap_drop_keeps_event_days_only():
    log = make_log(
        [
            ("c1", "open", _utc(2024, 1, 1, 9)),
            ("c1", "close", _utc(2024, 1, 5, 9)),
        ]
    )
    series = build_wip_series(log, LifecycleConfig(), gap_policy="drop")
    assert [ev.date for ev in series.events] == [date(2024, 1, 1), date(2024, 1, 5)]
    assert not series.contiguous


def test_unknown_gap_policy_rejected(five_case_log):
    with pytest.raises(ValueError):
        build_wip_series(five_case_log, LifecycleConfig(), gap_policy="interpolate")


def test_multi_day_gap_carry_adjacency():
    log = make_log(
        [
            ("c1", "open", _utc(2024, 1, 1, 9)),
            ("c2", "open", _utc(2024, 1, 2, 9)),
            ("c1", "close", _utc(2024, 1, 6, 9)),
            ("c2", "close", _utc(2024, 1, 7, 9)),
        ]
    )
    series = build_wip_series(log, LifecycleConfig(), gap_policy="carry")
    assert len(series.events) == 7
    for prev, cur in zip(series.events, series.events[1:]):
        assert cur.open == prev.close
        assert cur.date == prev.date + timedelta(days=1)


def test_start_marker_shifts_started_day():
    # With lifecycle "start" markers present, "started" follows the marker day.
    text = (
        "case,activity,ts,lc\n"
        "c1,queued,2024-01-01T09:00:00Z,schedule\n"
        "c1,work,2024-01-02T09:00:00Z,start\n"
        "c1,finish,2024-01-03T09:00:00Z,complete\n"
    )
    mapping = ColumnMapping(case="case", activity="activity", timestamp="ts", lifecycle="lc")
    log = parse_csv(io.StringIO(text), mapping, source_name="lc.csv")
    series = build_wip_series(log, LifecycleConfig())
    by_date = {ev.date: ev for ev in series.events}
    assert by_date[date(2024, 1, 1)].started == 0
    assert by_date[date(2024, 1, 2)].started == 1
    assert by_date[date(2024, 1, 1)].new == 1
    assert by_date[date(2024, 1, 3)].done == 1


def test_inverted_case_dropped():
    # Swapping rules so closing precedes opening invalidates the only case.
    rows = [("c1", "A", _utc(2024, 1, 1, 9)), ("c1", "B", _utc(2024, 1, 2, 9))]
    log = make_log(rows)
    cfg = LifecycleConfig(new_rule=last_event, done_rule=first_event, name="swapped")
    with pytest.raises(EmptyLogError):
        build_wip_series(log, cfg)


def test_timezone_changes_day_attribution():
    # 23:30 UTC on Jan 1 is already Jan 2 in UTC+1.
    log = make_log(
        [("c1", "open", _utc(2024, 1, 1, 23, 30)), ("c1", "close", _utc(2024, 1, 2, 4))]
    )
    utc_series = build_wip_series(log, LifecycleConfig(), tz="UTC")
    shifted = build_wip_series(log, LifecycleConfig(), tz="Etc/GMT-1")
    assert utc_series.events[0].date == date(2024, 1, 1)
    assert shifted.events[0].date == date(2024, 1, 2)
    assert len(shifted.events) == 1
    assert shifted.events[0].new == 1
    assert shifted.events[0].done == 1


def test_wip_event_rejects_inconsistent_range():
    with pytest.raises(ValueError):
        wip_event(date(2024, 1, 1), open=5, high=4, low=0, close=3)
    with pytest.raises(ValueError):
        wip_event(date(2024, 1, 1), open=3, high=5, low=4, close=3)
    with pytest.raises(ValueError):
        wip_event(date(2024, 1, 1), open=3, high=5, low=0, close=3, new=-1)


def test_paper_style_day_is_representable():
    # close != open + new - done is allowed: real logs clip flows at series edges.
    ev = wip_event(date(2024, 3, 4), open=55, high=70, low=55, close=66, new=24, done=10,
                   started=21)
    assert ev.close == 66
    assert ev.open + ev.new - ev.done == 69


def test_fill_gaps_noop_when_contiguous(five_case_log):
    series = build_wip_series(five_case_log, LifecycleConfig())
    assert fill_gaps(series, "carry") == series


def test_wip_csv_round_trip(five_case_log):
    series = build_wip_series(five_case_log, LifecycleConfig())
    text = export_wip_csv(series)
    header = text.splitlines()[0]
    assert header == ",".join(WIP_CSV_HEADER)
    back = load_wip_csv(io.StringIO(text))
    assert back.events == series.events


def test_randomized_logs_respect_invariants():
    rng = random.Random(4242)
    for trial in range(20):
        rows = []
        base = datetime(2024, 6, 1, tzinfo=timezone.utc)
        for i in range(rng.randint(1, 40)):
            start = base + timedelta(hours=rng.randint(0, 24 * 20))
            end = start + timedelta(hours=rng.randint(0, 24 * 10))
            rows.append((f"c{i}", "open", start))
            if end != start:
                rows.append((f"c{i}", "close", end))
        log = make_log(rows, name=f"rand{trial}.csv")
        cfg = LifecycleConfig()
        series = build_wip_series(log, cfg)
        for prev, cur in zip(series.events, series.events[1:]):
            assert cur.open == prev.close
            assert cur.date == prev.date + timedelta(days=1)
        for ev in series.events:
            assert ev.close == ev.open + ev.new - ev.done
        net = sum(ev.new - ev.done for ev in series.events)
        assert net == series.events[-1].close - series.events[0].open
        day = rng.choice(series.events)
        instant = datetime.combine(day.date, time(rng.randint(0, 23)), tzinfo=timezone.utc)
        assert day.low <= active_count_at(log, cfg, instant) <= day.high
