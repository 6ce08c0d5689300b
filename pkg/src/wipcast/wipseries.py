"""Daily work-in-progress series derived from an event log.

Each calendar day gets a ten-field vector: three calendar components
(day of week / month / year) and seven counts describing how the number of
active cases moved through the day (open, high, low, close) plus how many
cases finished, appeared, or were start-marked that day.

A case is considered active from its opening event (inclusive) up to, but not
including, its closing event. Which events open and close a case is policy,
not data: the default treats a case's first event as its opening and its last
event as its closing, and :class:`LifecycleConfig` lets callers swap in other
rules (e.g. logs where completion is a specific activity).
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import date as Date, datetime, timedelta
from typing import IO, Callable, Sequence
from zoneinfo import ZoneInfo

from .eventlog import EmptyLogError, Event, EventLog

logger = logging.getLogger(__name__)

WIP_CSV_HEADER = ["date", "dow", "dom", "doy", "open", "high", "low", "close", "new", "done", "started"]

GAP_POLICIES = ("carry", "drop")

CaseRule = Callable[[Sequence[Event]], Event]


def first_event(case_events: Sequence[Event]) -> Event:
    return case_events[0]


def last_event(case_events: Sequence[Event]) -> Event:
    return case_events[-1]


def first_start_marked(case_events: Sequence[Event]) -> Event:
    """First event with lifecycle "start"; the case's first event when none is marked."""
    for ev in case_events:
        if ev.lifecycle == "start":
            return ev
    return case_events[0]


@dataclass(frozen=True)
class LifecycleConfig:
    """Rules mapping a case's events onto its opening, closing, and start markers."""

    new_rule: CaseRule = first_event
    done_rule: CaseRule = last_event
    started_rule: CaseRule = first_start_marked
    name: str = "default"


@dataclass(frozen=True)
class WipEvent:
    """One day's WiP vector."""

    date: Date
    day_of_week: int
    day_of_month: int
    day_of_year: int
    open: int
    high: int
    low: int
    close: int
    new: int
    done: int
    started: int

    def __post_init__(self) -> None:
        if not (self.low <= self.open <= self.high and self.low <= self.close <= self.high):
            raise ValueError(f"{self.date}: OHLC out of order (o={self.open} h={self.high} l={self.low} c={self.close})")
        if min(self.open, self.high, self.low, self.close, self.new, self.done, self.started) < 0:
            raise ValueError(f"{self.date}: negative count")


def wip_event(day: Date, open: int, high: int, low: int, close: int,
              new: int = 0, done: int = 0, started: int = 0) -> WipEvent:
    """Build a :class:`WipEvent` with the calendar fields filled in from ``day``."""
    return WipEvent(
        date=day,
        day_of_week=day.isoweekday(),
        day_of_month=day.day,
        day_of_year=day.timetuple().tm_yday,
        open=open,
        high=high,
        low=low,
        close=close,
        new=new,
        done=done,
        started=started,
    )


@dataclass(frozen=True)
class WipSeries:
    """Daily WiP vectors with strictly increasing dates.

    ``contiguous`` is False when gap days were dropped; the adjacency property
    (next day's open equals the previous day's close) is only guaranteed when
    it is True.
    """

    events: tuple[WipEvent, ...]
    contiguous: bool = True
    lifecycle: LifecycleConfig = field(default=LifecycleConfig(), compare=False)

    def __post_init__(self) -> None:
        for a, b in zip(self.events, self.events[1:]):
            if b.date <= a.date:
                raise ValueError(f"dates not strictly increasing at {b.date}")
            if self.contiguous and b.date != a.date + timedelta(days=1):
                raise ValueError(f"contiguous series has a gap before {b.date}")

    def __len__(self) -> int:
        return len(self.events)

    def closes(self) -> list[int]:
        return [ev.close for ev in self.events]

    def by_date(self, day: Date) -> WipEvent:
        for ev in self.events:
            if ev.date == day:
                return ev
        raise KeyError(day)


def _case_anchors(
    log: EventLog, cfg: LifecycleConfig
) -> list[tuple[str, Event, Event, Event]]:
    """Resolve (case_id, opening, closing, started) per case; drop inverted cases."""
    by_case: dict[str, list[Event]] = {}
    for ev in log.events:
        by_case.setdefault(ev.case_id, []).append(ev)
    anchors = []
    for case_id, evts in by_case.items():
        opening = cfg.new_rule(evts)
        closing = cfg.done_rule(evts)
        started = cfg.started_rule(evts)
        if closing.timestamp < opening.timestamp:
            logger.warning("case %r: closing precedes opening under rules %r, case dropped", case_id, cfg.name)
            continue
        anchors.append((case_id, opening, closing, started))
    return anchors


def build_wip_series(
    log: EventLog,
    cfg: LifecycleConfig | None = None,
    gap_policy: str = "carry",
    tz: str = "UTC",
) -> WipSeries:
    """Replay a log's case openings and closings into a daily WiP series.

    Day boundaries are midnights in the reporting timezone ``tz``. The running
    active count is sampled after every instant at which cases open or close
    (simultaneous transitions are applied together), which yields each day's
    high and low; the day's open is the count carried in from the previous
    day and its close is the count carried out.
    """
    if gap_policy not in GAP_POLICIES:
        raise ValueError(f"unknown gap policy {gap_policy!r}")
    if not log.events:
        raise EmptyLogError("cannot build a WiP series from an empty log")
    cfg = cfg or LifecycleConfig()
    zone = ZoneInfo(tz)

    def local_day(ts: datetime) -> Date:
        return ts.astimezone(zone).date()

    anchors = _case_anchors(log, cfg)
    if not anchors:
        raise EmptyLogError("no usable cases after lifecycle-rule filtering")

    transitions: list[tuple[datetime, int]] = []
    new_per_day: dict[Date, int] = {}
    done_per_day: dict[Date, int] = {}
    started_per_day: dict[Date, int] = {}
    for _case_id, opening, closing, started in anchors:
        transitions.append((opening.timestamp, +1))
        transitions.append((closing.timestamp, -1))
        d = local_day(opening.timestamp)
        new_per_day[d] = new_per_day.get(d, 0) + 1
        d = local_day(closing.timestamp)
        done_per_day[d] = done_per_day.get(d, 0) + 1
        d = local_day(started.timestamp)
        started_per_day[d] = started_per_day.get(d, 0) + 1
    transitions.sort(key=lambda t: t[0])

    first_day = local_day(log.events[0].timestamp)
    last_day = local_day(log.events[-1].timestamp)
    event_days = {local_day(ev.timestamp) for ev in log.events}

    days: list[WipEvent] = []
    running = 0
    ti = 0
    n = len(transitions)
    day = first_day
    while day <= last_day:
        open_count = running
        high = low = running
        while ti < n and local_day(transitions[ti][0]) <= day:
            ts = transitions[ti][0]
            while ti < n and transitions[ti][0] == ts:
                running += transitions[ti][1]
                ti += 1
            high = max(high, running)
            low = min(low, running)
        days.append(
            wip_event(
                day,
                open=open_count,
                high=high,
                low=low,
                close=running,
                new=new_per_day.get(day, 0),
                done=done_per_day.get(day, 0),
                started=started_per_day.get(day, 0),
            )
        )
        day += timedelta(days=1)

    if gap_policy == "drop":
        kept = tuple(ev for ev in days if ev.date in event_days)
        return WipSeries(kept, contiguous=len(kept) == len(days), lifecycle=cfg)
    return WipSeries(tuple(days), contiguous=True, lifecycle=cfg)


def active_count_at(log: EventLog, cfg: LifecycleConfig | None = None, instant: datetime | None = None) -> int:
    """Number of cases open at ``instant``: opening event at or before it, closing event after it.

    Deliberately brute force (one pass over cases per call) so it can serve as
    an independent oracle for the replay in :func:`build_wip_series`.
    """
    if instant is None:
        raise ValueError("instant is required")
    cfg = cfg or LifecycleConfig()
    count = 0
    for _case_id, opening, closing, _started in _case_anchors(log, cfg):
        if opening.timestamp <= instant < closing.timestamp:
            count += 1
    return count


def fill_gaps(series: WipSeries, policy: str = "carry") -> WipSeries:
    """Apply a gap policy to a (possibly non-contiguous) series.

    "carry" inserts a flat day for each missing date: open/high/low/close all
    equal the previous close, counts zero. "drop" keeps the series as-is and
    records whether it is contiguous.
    """
    if policy not in GAP_POLICIES:
        raise ValueError(f"unknown gap policy {policy!r}")
    if not series.events:
        return series
    if policy == "drop":
        gapless = all(b.date == a.date + timedelta(days=1) for a, b in zip(series.events, series.events[1:]))
        return WipSeries(series.events, contiguous=gapless, lifecycle=series.lifecycle)

    filled: list[WipEvent] = [series.events[0]]
    for ev in series.events[1:]:
        day = filled[-1].date + timedelta(days=1)
        while day < ev.date:
            prev_close = filled[-1].close
            filled.append(wip_event(day, prev_close, prev_close, prev_close, prev_close, 0, 0, 0))
            day += timedelta(days=1)
        filled.append(ev)
    return WipSeries(tuple(filled), contiguous=True, lifecycle=series.lifecycle)


def export_wip_csv(series: WipSeries) -> str:
    """Serialize to the inter-stage CSV contract (header per WIP_CSV_HEADER)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(WIP_CSV_HEADER)
    for ev in series.events:
        writer.writerow(
            [ev.date.isoformat(), ev.day_of_week, ev.day_of_month, ev.day_of_year,
             ev.open, ev.high, ev.low, ev.close, ev.new, ev.done, ev.started]
        )
    return buf.getvalue()


def load_wip_csv(source: str | IO[str]) -> WipSeries:
    """Parse the inter-stage CSV back into a series (inverse of :func:`export_wip_csv`)."""
    text = source if isinstance(source, str) else source.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != WIP_CSV_HEADER:
        raise ValueError(f"unexpected WiP CSV header: {header}")
    events = []
    for row in reader:
        if not row:
            continue
        day = Date.fromisoformat(row[0])
        o, h, l, c, new, done, started = (int(v) for v in row[4:11])
        events.append(wip_event(day, o, h, l, c, new, done, started))
    contiguous = all(b.date == a.date + timedelta(days=1) for a, b in zip(events, events[1:]))
    return WipSeries(tuple(events), contiguous=contiguous)
