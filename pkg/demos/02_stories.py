"""
Narrating WiP days as stories
=============================

Each day of the series becomes a one-sentence story. A *query* story
describes the day alone; a *contextual* story appends what the next day's
close turned out to be, which is what gets stored in retrieval memory.
Windowed stories compress a trailing week into a single sentence.
"""

from wipcast import parse_story
from wipcast.narrative import (
    render_contextual_story,
    render_query_story,
    render_windowed_story,
)
from wipcast.synthetic import synthetic_series

series = synthetic_series(n_days=30, seed=11)
events = series.events
day, next_day = events[14], events[15]

print("query story (daily):")
print(" ", render_query_story(day).text)

print("\nquery story (weekday granularity adds the day name):")
print(" ", render_query_story(day, granularity="weekday").text)

contextual = render_contextual_story(day, next_day.close)
print("\ncontextual story (the retrieval memory format):")
print(" ", contextual.text)
print("  -> stored with target =", contextual.target)

windowed = render_windowed_story(events[8:15], next_close=next_day.close)
print("\nwindowed story (the past week in one sentence):")
print(" ", windowed.text)

# stories are exactly invertible back to their numbers
numbers = parse_story(contextual.text)
assert numbers.open == day.open and numbers.close == day.close
assert numbers.target == float(next_day.close)
print("\nparse_story round-trips the numbers:", numbers)
