"""Command-line entry points: ingest, ask, eval, serve, chunks.

Exit codes: 0 success, 2 usage, 3 configuration, 4 upstream/model failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .engine import Engine, EngineConfig
from .errors import ConfigError, EngineError, UpstreamError

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_UPSTREAM = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contractengine")
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--storage", help="storage root (overrides config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse, chunk, and index a document")
    p_ingest.add_argument("file")

    p_ask = sub.add_parser("ask", help="interrogate a document with a question")
    p_ask.add_argument("doc_id")
    p_ask.add_argument("question")
    p_ask.add_argument("--d-max", type=int, default=None)
    p_ask.add_argument("--json", action="store_true", dest="as_json")
    p_ask.add_argument("--cassette", help="replay chat completions from a cassette")

    p_eval = sub.add_parser("eval", help="run the retrieval benchmark on a corpus dir")
    p_eval.add_argument("corpus_dir")
    p_eval.add_argument("--k", default="1,2,4,8,16,32,64")
    p_eval.add_argument("--out", default=".", help="directory for metrics.csv/json")

    sub.add_parser("serve", help="start the HTTP service")

    p_chunks = sub.add_parser("chunks", help="dump a document's chunk set as JSONL")
    p_chunks.add_argument("doc_id")
    return parser


def _load_config(args) -> EngineConfig:
    config = EngineConfig.from_file(args.config) if args.config else EngineConfig().with_env_overrides()
    if args.storage:
        config.storage_root = args.storage
    return config


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        config = _load_config(args)

        if args.command == "ingest":
            with open(args.file, encoding="utf-8") as fh:
                text = fh.read()
            engine = _offline_engine(config)
            meta = engine.ingest(text, filename=args.file)
            print(json.dumps(meta))
            return 0

        if args.command == "ask":
            if args.cassette:
                config.cassette_path = args.cassette
            engine = Engine(config) if (config.cassette_path or config.chat_profile) else None
            if engine is None:
                print("error: ask requires a chat provider or --cassette", file=sys.stderr)
                return EXIT_CONFIG
            session_id = engine.create_session(args.doc_id)
            engine.post_message(session_id, args.question)
            engine.post_message(session_id, None)
            engine.interrogate(session_id, d_max=args.d_max)
            report, markdown = engine.report(session_id)
            print(json.dumps(report.to_dict()) if args.as_json else markdown)
            return 0

        if args.command == "eval":
            from .evalharness import run_benchmark

            engine = _offline_engine(config)
            k_grid = [int(k) for k in args.k.split(",") if k]
            metrics = run_benchmark(
                args.corpus_dir,
                engine.embedder,
                engine.reranker,
                config=config.retrieval,
                k_grid=k_grid,
                output_dir=args.out,
            )
            print(metrics.to_csv())
            return 0

        if args.command == "serve":
            from .server import serve

            serve(config)
            return 0

        if args.command == "chunks":
            engine = _offline_engine(config)
            sys.stdout.write(engine.document_chunks_jsonl(args.doc_id))
            return 0

        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UpstreamError as exc:
        print(f"upstream error: {exc}", file=sys.stderr)
        return EXIT_UPSTREAM
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _offline_engine(config: EngineConfig) -> Engine:
    """Engine with deterministic offline clients; ingest/eval/chunks need
    no chat provider."""
    from .gateway import ScriptedChatClient

    return Engine(config, chat_client=ScriptedChatClient([]))


if __name__ == "__main__":
    sys.exit(main())
