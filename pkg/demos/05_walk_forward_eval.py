"""
Walk-forward evaluation
=======================

The harness replays history day by day: memory only ever contains stories
dated before the day being forecast, and grows by one story per granularity
per step. Besides the fused forecast it records each agent alone (ablations)
and a persistence baseline, then writes predictions.csv, metrics.csv, and a
two-panel SVG report.
"""

import os

from wipcast import merge_traces, persistence_baseline, rolling_forecast, summarize
from wipcast.evaluation import default_split_date, emit_report
from wipcast.synthetic import synthetic_series

series = synthetic_series(n_days=90, seed=17)
split = default_split_date(series)  # last 20% of days held out
print(f"series: {len(series.events)} days, test starts after {split}")

result = rolling_forecast(series, split_date=split)
baseline = persistence_baseline(series, split_date=split)
trace = merge_traces(result.trace, baseline)

# the corpus audit: memory grew by exactly one daily story per step and
# never contained anything dated at or past the forecast day
first, last = result.audit[0], result.audit[-1]
print(f"\ndaily corpus grew {first.corpus_sizes['daily']} -> "
      f"{last.corpus_sizes['daily']} stories across {len(result.audit)} steps")
assert all(a.max_story_dates["daily"] < a.date for a in result.audit)
print("corpus audit: no story ever dated at/after its forecast day")

print(f"\n{'source':<16} {'mape':>8} {'mae':>8} {'n':>4} {'skipped':>8}")
for s in summarize(trace):
    print(f"{s.source:<16} {s.mape:>8.2f} {s.mae:>8.2f} {s.n:>4} "
          f"{s.skipped_zero_actuals:>8}")

out_dir = os.path.join(os.path.dirname(__file__) or ".", "demo_out")
paths = emit_report(trace, out_dir, freeze_timestamps=True,
                    split_note=f"split={split}")
print()
for name, path in paths.items():
    print(f"wrote {name}: {path}")
