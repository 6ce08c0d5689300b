"""
One day, three agents, one forecast
===================================

Three predictor agents each look at the same day through a different lens
(the day itself, the weekday-framed day, the trailing week), retrieve their
own nearest stories, and predict tomorrow's close. A trend analyst labels
the recent trajectory, and fusion combines everything: trend-weighted
averaging in rules mode, or a bounded tool-calling loop in react mode.
"""

from datetime import timedelta

from wipcast import (
    DeterministicEmbedder,
    StoryIndex,
    StubBackend,
    fuse,
    predictor_predict,
    trend_analyze,
)
from wipcast.narrative import render_contextual_story, render_windowed_story
from wipcast.synthetic import synthetic_series

series = synthetic_series(n_days=50, seed=5)
events = series.events
current = events[-1]
forecast_date = current.date + timedelta(days=1)

# one index per granularity, filled with everything known so far
embedder = DeterministicEmbedder()
daily_ix, weekday_ix, windowed_ix = (StoryIndex(provider=embedder) for _ in range(3))
for i in range(len(events) - 1):
    nxt = events[i + 1].close
    daily_ix.add_story(render_contextual_story(events[i], nxt))
    weekday_ix.add_story(render_contextual_story(events[i], nxt, "weekday"))
    if i >= 6:
        windowed_ix.add_story(render_windowed_story(events[i - 6:i + 1], next_close=nxt))

backend = StubBackend()
preds = {
    "daily": predictor_predict("daily", current, series, daily_ix, backend),
    "weekday": predictor_predict("weekday", current, series, weekday_ix, backend),
    "windowed": predictor_predict("windowed", current, series, windowed_ix, backend),
}
print(f"forecasting {forecast_date} (today closed at {current.close})")
for name, p in preds.items():
    print(f"  {name:>8} agent: {p.value:.2f}  "
          f"(from {len(p.retrieved)} retrieved stories)")

trend = trend_analyze([ev.close for ev in events])
print(f"\ntrend analyst: {trend.label}  "
      f"(sma {trend.sma_first:.1f} -> {trend.sma_last:.1f}, "
      f"rc={trend.relative_change:+.3f})")
print(f'  "{trend.text}"')

rules = fuse(preds, trend, forecast_date)
print(f"\nrules fusion: {rules.final_value:.2f}")
print(f"  rationale: {rules.rationale}")

react = fuse(preds, trend, forecast_date, index=daily_ix, backend=backend,
             mode="react")
print(f"\nreact fusion: {react.final_value:.2f} (mode={react.mode})")
print(f"  rationale: {react.rationale}")
