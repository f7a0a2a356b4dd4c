"""Command line: ingest, assess, eval, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from loguru import logger

from ..analysts.client import AnalystError
from ..geo import UnknownZipError
from ..window import TimeWindow
from .config import ConfigError, load_config

MODES = ("text_only", "text_caption", "multimodal")


def configure_logging(level: str = "INFO", json_lines: bool = True) -> None:
    logger.remove()
    # resolve sys.stderr per message so redirected streams are honoured
    logger.add(lambda msg: sys.stderr.write(msg), level=level, serialize=json_lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="engine config (YAML)")
    common.add_argument("--log-level", default=argparse.SUPPRESS)
    common.add_argument("--plain-logs", action="store_true", default=argparse.SUPPRESS,
                        help="human-readable logs instead of JSON lines")

    parser = argparse.ArgumentParser(prog="impactrag", parents=[common],
                                     description="ZIP-level flood extent and damage assessment")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("ingest", parents=[common], help="build the document store and index snapshot")
    p.add_argument("--out", type=Path, help="output directory (default: data.index_dir)")

    p = sub.add_parser("assess", parents=[common], help="assess one ZIP and window; JSON on stdout")
    p.add_argument("--zip", required=True)
    p.add_argument("--start", required=True, help="YYYY-MM-DD")
    p.add_argument("--end", required=True, help="YYYY-MM-DD")
    p.add_argument("--mode", choices=MODES, default="multimodal")

    p = sub.add_parser("eval", parents=[common], help="run the ablation table")
    p.add_argument("--queries", type=Path, help="CSV zip,start,end (default: eval.queries)")
    p.add_argument("--configs", default=",".join(MODES))
    p.add_argument("--out", type=Path, help="write the metric CSV here instead of stdout")
    p.add_argument("--records", type=Path, help="per-query predictions CSV")
    p.add_argument("--summary", type=Path, help="JSON summary")
    p.add_argument("--geojson", type=Path, help="predictions joined to ZIP polygons")

    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    configure_logging(getattr(args, "log_level", "INFO"), not getattr(args, "plain_logs", False))
    config_path = getattr(args, "config", None) or os.environ.get("IMPACTRAG_CONFIG")
    if not config_path:
        print("error: --config is required", file=sys.stderr)
        return 2
    try:
        return _dispatch(args, config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except UnknownZipError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
    except AnalystError as exc:
        print(f"analyst failure: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


def _dispatch(args, config_path: str) -> int:
    from .engine import Engine, render_response, write_index

    if args.command == "serve":
        from .service import serve

        serve(config_path, args.host, args.port)
        return 0

    config = load_config(config_path)
    if args.command == "ingest":
        out = args.out or config.index_dir
        if out is None:
            raise ConfigError("ingest needs --out or data.index_dir")
        # always rebuild from the raw corpora
        from dataclasses import replace

        engine = Engine.load(replace(config, index_dir=None))
        print(json.dumps(write_index(engine, out), indent=2))
        return 0

    engine = Engine.load(config)
    if args.command == "assess":
        window = TimeWindow.parse(args.start, args.end)
        sys.stdout.write(render_response(engine.assess(args.zip, window, args.mode)))
        return 0

    if args.command == "eval":
        from ..evaluation import load_ground_truth, load_queries, predictions_geojson, run_ablation, write_json

        queries_path = args.queries or config.queries
        if queries_path is None or config.ground_truth is None:
            raise ConfigError("eval needs queries (--queries or eval.queries) and data.ground_truth")
        result = run_ablation(
            load_queries(queries_path),
            [c.strip() for c in args.configs.split(",") if c.strip()],
            engine,
            load_ground_truth(config.ground_truth),
            seed=config.seed,
            resamples=config.resamples,
            parallelism=config.parallelism,
        )
        table = result.to_csv()
        if args.out:
            args.out.write_text(table, encoding="utf-8")
        else:
            sys.stdout.write(table)
        if args.records:
            args.records.write_text(result.records_csv(), encoding="utf-8")
        if args.summary:
            write_json(args.summary, result.summary())
        if args.geojson:
            write_json(args.geojson, predictions_geojson(engine.regions.values(), result.records))
        return 0
    raise AssertionError(args.command)
