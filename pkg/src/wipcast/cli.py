"""Command-line pipeline: event log -> WiP series -> stories -> index -> forecast.

Each subcommand reads the previous stage's files from the output directory and
overwrites its own, so re-running any stage with the same inputs reproduces
the same files (timestamps in the SVG report can be frozen with a flag).

Exit codes: 0 success, 1 processing error, 2 missing/invalid path or usage,
3 empty event log.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import date as Date
from datetime import timedelta

from .agents import fuse, predictor_predict, trend_analyze
from .config import (
    PipelineConfig,
    build_backend,
    build_embedder,
    build_lifecycle,
    load_config,
)
from .eventlog import (
    ColumnMapping,
    EmptyLogError,
    EventLogError,
    parse_csv,
    parse_xes,
    validate,
)
from .evaluation import (
    emit_report,
    load_predictions_csv,
    merge_traces,
    persistence_baseline,
    render_report_svg,
    rolling_forecast,
    summarize,
)
from .llm import AGENT_IDS, LlmError
from .memory import EmbeddingError, StoryIndex, load_index, save_index
from .narrative import (
    read_stories_jsonl,
    render_contextual_story,
    render_query_story,
    render_windowed_story,
    write_stories_jsonl,
)
from .wipseries import build_wip_series, export_wip_csv, load_wip_csv

GRANULARITIES = ("daily", "weekday", "windowed")

SERIES_FILE = "wip.csv"


def _stories_file(out_dir: str, granularity: str) -> str:
    return os.path.join(out_dir, f"stories_{granularity}.jsonl")


def _index_file(out_dir: str, granularity: str) -> str:
    return os.path.join(out_dir, f"index_{granularity}.jsonl")


def _require(path: str, hint: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path} not found ({hint})")
    return path


def _load_series(out_dir: str):
    path = _require(os.path.join(out_dir, SERIES_FILE),
                    "run `wipcast ingest` first or pass --series")
    with open(path, encoding="utf-8") as fh:
        return load_wip_csv(fh)


def _detect_format(path: str, declared: str) -> str:
    if declared != "auto":
        return declared
    name = path.lower()
    if name.endswith((".xes", ".xes.gz")):
        return "xes"
    if name.endswith((".csv", ".csv.gz")):
        return "csv"
    raise ValueError(f"cannot infer log format from {path!r}; pass --format")


def _day_stories(events, window: int):
    """Query and contextual stories per granularity for days with a known
    next-day close. Windowed stories require a full window, so that file
    starts at the window-th day."""
    out = {g: [] for g in GRANULARITIES}
    for i in range(len(events) - 1):
        next_close = float(events[i + 1].close)
        for g in ("daily", "weekday"):
            out[g].append(render_query_story(events[i], g))
            out[g].append(render_contextual_story(events[i], next_close, g))
        if i >= window - 1:
            window_events = events[i - window + 1:i + 1]
            out["windowed"].append(render_windowed_story(window_events))
            out["windowed"].append(render_windowed_story(window_events, next_close=next_close))
    return out


# --- subcommands ---


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    path = args.path or cfg.input.path
    if not path:
        raise FileNotFoundError("no input log given (positional path or config input.path)")
    _require(path, "input event log")

    fmt = _detect_format(path, args.format or cfg.input.format)
    with open(path, "rb") as fh:
        if fmt == "xes":
            log = parse_xes(fh, source_name=os.path.basename(path))
        else:
            mapping = ColumnMapping(
                case=args.case or cfg.input.case_column,
                activity=args.activity or cfg.input.activity_column,
                timestamp=args.timestamp or cfg.input.timestamp_column,
                lifecycle=args.lifecycle or cfg.input.lifecycle_column,
                timestamp_format=cfg.input.timestamp_format,
            )
            log = parse_csv(fh, mapping, source_name=os.path.basename(path))

    report = validate(log)
    series = build_wip_series(log, build_lifecycle(cfg.lifecycle),
                              gap_policy=args.gap_policy or cfg.gap_policy)

    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, SERIES_FILE)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(export_wip_csv(series))
    print(f"ingested {report.event_count} events / {report.case_count} cases "
          f"-> {len(series.events)} days ({series.events[0].date} .. "
          f"{series.events[-1].date})")
    print(f"wrote {out_path}")
    return 0


def cmd_stories(args, cfg: PipelineConfig) -> int:
    series = _load_series(args.out)
    if len(series.events) < 2:
        raise ValueError("need at least two days to render contextual stories")
    stories = _day_stories(series.events, cfg.forecast.window)
    for g in GRANULARITIES:
        path = _stories_file(args.out, g)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            count = write_stories_jsonl(stories[g], fh)
        contextual = sum(1 for s in stories[g] if s.kind == "contextual")
        print(f"wrote {path}: {count} stories ({contextual} contextual)")
    return 0


def cmd_index(args, cfg: PipelineConfig) -> int:
    embedder = build_embedder(cfg.embedder)
    for g in GRANULARITIES:
        src = _require(_stories_file(args.out, g), "run `wipcast stories` first")
        with open(src, encoding="utf-8") as fh:
            stories = [s for s in read_stories_jsonl(fh) if s.kind == "contextual"]
        index = StoryIndex(provider=embedder, retention=cfg.forecast.retention())
        for story in stories:
            index.add_story(story)
        path = _index_file(args.out, g)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            count = save_index(index, fh)
        print(f"wrote {path}: {count} documents")
    return 0


def _load_or_build_indexes(args, cfg: PipelineConfig, series):
    """Prefer snapshots from `wipcast index`; otherwise embed on the fly."""
    embedder = build_embedder(cfg.embedder)
    indexes = {}
    snapshots = [_index_file(args.out, g) for g in GRANULARITIES]
    if all(os.path.exists(p) for p in snapshots):
        for g, path in zip(GRANULARITIES, snapshots):
            with open(path, encoding="utf-8") as fh:
                indexes[g] = load_index(fh, provider=embedder,
                                        retention=cfg.forecast.retention())
        return indexes
    stories = _day_stories(series.events, cfg.forecast.window)
    for g in GRANULARITIES:
        index = StoryIndex(provider=embedder, retention=cfg.forecast.retention())
        for story in stories[g]:
            if story.kind == "contextual":
                index.add_story(story)
        indexes[g] = index
    return indexes


def cmd_forecast(args, cfg: PipelineConfig) -> int:
    series = _load_series(args.out)
    events = series.events
    if args.date is None:
        current = events[-1]
    else:
        target = Date.fromisoformat(args.date)
        by_date = {ev.date: ev for ev in events}
        wanted = target - timedelta(days=1)
        if wanted not in by_date:
            raise ValueError(f"cannot forecast {target}: no series day at {wanted}")
        current = by_date[wanted]
    forecast_date = current.date + timedelta(days=1)

    indexes = _load_or_build_indexes(args, cfg, series)
    backend = build_backend(cfg.backend)
    agent_to_granularity = {"daily": "daily", "weekday": "weekday", "windowed": "windowed"}
    preds = {
        aid: predictor_predict(aid, current, series, indexes[agent_to_granularity[aid]],
                               backend, cfg.forecast.k, cfg.forecast.window)
        for aid in AGENT_IDS
    }
    closes = [ev.close for ev in events if ev.date <= current.date]
    trend = trend_analyze(closes, window=cfg.forecast.trend_window,
                          lookback=cfg.forecast.trend_lookback,
                          thresholds=cfg.forecast.trend_thresholds)
    report = fuse(preds, trend, forecast_date, index=indexes["daily"],
                  backend=backend, mode=args.mode or cfg.forecast.fusion_mode,
                  weights=cfg.forecast.fusion_weights, k=cfg.forecast.k)

    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "forecast.jsonl")
    import json

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")

    print(f"forecast for {forecast_date}: {report.final_value:.2f} "
          f"(mode={report.mode}, trend={trend.label})")
    for aid in AGENT_IDS:
        print(f"  {aid}: {preds[aid].value:.2f}")
    print(f"wrote {path}")
    return 0


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    series = _load_series(args.out)
    if args.split:
        split = Date.fromisoformat(args.split)
    elif cfg.split_date:
        split = Date.fromisoformat(cfg.split_date)
    else:
        from .evaluation import default_split_date

        split = default_split_date(series, cfg.test_fraction)

    params = cfg.forecast
    if args.mode and args.mode != params.fusion_mode:
        from dataclasses import replace

        params = replace(params, fusion_mode=args.mode)
    backend = build_backend(cfg.backend)
    embedder = build_embedder(cfg.embedder)

    result = rolling_forecast(series, split_date=split, params=params,
                              backend=backend, embedder=embedder)
    baseline = persistence_baseline(series, split_date=split)
    merged = merge_traces(result.trace, baseline)

    freeze = args.freeze_timestamps or cfg.freeze_timestamps
    paths = emit_report(merged, args.out, rolling_window=params.trend_window,
                        freeze_timestamps=freeze, split_note=f"split={split}")

    import json

    reports_path = os.path.join(args.out, "forecast_reports.jsonl")
    with open(reports_path, "w", encoding="utf-8", newline="") as fh:
        for report in result.reports:
            fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")

    print(f"evaluated {len(result.reports)} days after split {split}")
    print(f"{'source':<16} {'mape':>8} {'mae':>8} {'n':>4} {'skipped':>8}")
    for summary in summarize(merged):
        print(f"{summary.source:<16} {summary.mape:>8.2f} {summary.mae:>8.2f} "
              f"{summary.n:>4} {summary.skipped_zero_actuals:>8}")
    for name in ("predictions", "metrics", "report"):
        print(f"wrote {paths[name]}")
    print(f"wrote {reports_path}")
    return 0


def cmd_plot(args, cfg: PipelineConfig) -> int:
    src = _require(os.path.join(args.out, "predictions.csv"),
                   "run `wipcast evaluate` first")
    with open(src, encoding="utf-8") as fh:
        trace = load_predictions_csv(fh)
    freeze = args.freeze_timestamps or cfg.freeze_timestamps
    svg = render_report_svg(trace, rolling_window=cfg.forecast.trend_window,
                            freeze_timestamps=freeze)
    path = os.path.join(args.out, "report.svg")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(svg)
    print(f"wrote {path}")
    return 0


# --- wiring ---


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON file")
    common.add_argument("--out", default=None, help="output directory (default: out)")
    common.add_argument("--backend", choices=["stub", "remote"], default=None,
                        help="chat backend override")
    common.add_argument("--freeze-timestamps", action="store_true",
                        help="write a fixed timestamp into generated reports")

    parser = argparse.ArgumentParser(
        prog="wipcast",
        description="Forecast daily work-in-progress from process event logs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common],
                       help="parse an event log and write the daily WiP series")
    p.add_argument("path", nargs="?", help="XES or CSV event log (gzip ok)")
    p.add_argument("--format", choices=["auto", "xes", "csv"], default=None)
    p.add_argument("--case", help="CSV column holding the case id")
    p.add_argument("--activity", help="CSV column holding the activity name")
    p.add_argument("--timestamp", help="CSV column holding the timestamp")
    p.add_argument("--lifecycle", help="CSV column holding the lifecycle marker")
    p.add_argument("--gap-policy", choices=["carry", "drop"], default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stories", parents=[common],
                       help="render query and contextual stories from the series")
    p.set_defaults(func=cmd_stories)

    p = sub.add_parser("index", parents=[common],
                       help="embed contextual stories into retrieval indexes")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("forecast", parents=[common],
                       help="forecast a single day's closing WiP")
    p.add_argument("--date", help="target day (ISO); default: day after the series ends")
    p.add_argument("--mode", choices=["rules", "react"], default=None)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", parents=[common],
                       help="walk-forward evaluation with ablations and baseline")
    p.add_argument("--split", help="last training day (ISO); default: last 20%% as test")
    p.add_argument("--mode", choices=["rules", "react"], default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", parents=[common],
                       help="re-render report.svg from predictions.csv")
    p.set_defaults(func=cmd_plot)

    return parser


def _effective_config(args) -> PipelineConfig:
    if args.config:
        _require(args.config, "config file")
        with open(args.config, encoding="utf-8") as fh:
            cfg = load_config(fh)
    else:
        cfg = PipelineConfig()
    if args.backend and args.backend != cfg.backend.kind:
        from dataclasses import replace

        cfg = replace(cfg, backend=replace(cfg.backend, kind=args.backend))
    if args.out is None:
        args.out = cfg.out_dir
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
        return args.func(args, cfg)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EmptyLogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (EventLogError, EmbeddingError, LlmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
