"""
From an event log to a daily WiP series
=======================================

A process event log is a list of (case, activity, timestamp) rows. Each
case opens with its first event and closes with its last; the number of
cases open at any instant is the work in progress. Replaying every opening
and closing in timestamp order gives one OHLC-style row per day.
"""

from wipcast import build_wip_series, validate
from wipcast.eventlog import parse_csv, ColumnMapping, export_csv
from wipcast.synthetic import synthetic_event_log

# a synthetic service-desk log: 80 tickets over roughly a month
log = synthetic_event_log(n_cases=80, seed=7, span_days=30)
print(f"log: {len(log.events)} events, source={log.source_meta.name}")

report = validate(log)
print(f"validated: {report.event_count} events / {report.case_count} cases, "
      f"monotonic={report.monotonic}")

# the same data round-trips through the CSV parser
csv_text = export_csv(log)
mapping = ColumnMapping(case="case", activity="activity", timestamp="timestamp",
                        lifecycle="lifecycle")
reparsed = parse_csv(csv_text, mapping)
assert reparsed.events == log.events

series = build_wip_series(log)
print(f"\nseries: {len(series.events)} days "
      f"({series.events[0].date} .. {series.events[-1].date})\n")

print("date        open high  low close  new done started")
for row in series.events[:10]:
    print(f"{row.date}  {row.open:4d} {row.high:4d} {row.low:4d} {row.close:5d} "
          f"{row.new:4d} {row.done:4d} {row.started:7d}")
print("...")

# the day-boundary invariant that makes OHLC semantics meaningful:
# every day opens exactly where the previous day closed
for prev, cur in zip(series.events, series.events[1:]):
    assert cur.open == prev.close
print("\nadjacency holds: every open(d+1) == close(d)")
