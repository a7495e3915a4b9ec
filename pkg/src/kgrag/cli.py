"""Command-line entry point: serve the query API or answer one question."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .compose import compose_answer
from .demo import build_demo_kg
from .kg import load_graph
from .llm import BackendConfig
from .service import create_app
from .traversal import TraversalBackendError, TraversalConfig, ontology_based_retrieval, render_trace


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgrag",
        description="Knowledge-graph question answering via LLM-guided traversal",
    )
    parser.add_argument("--kg", type=Path, help="KG document to load (default: built-in demo graph)")
    parser.add_argument(
        "--backend",
        choices=("http", "scripted"),
        default="scripted",
        help="LLM backend kind",
    )
    parser.add_argument(
        "--script",
        type=Path,
        help="JSON script for the scripted backend: list (ordered) or object (keyed)",
    )
    parser.add_argument("--endpoint", help="chat-completions endpoint URL (http backend)")
    parser.add_argument("--model", help="model name (http backend)")
    parser.add_argument("--temperature", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--max-iterations", type=int, default=25)
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument(
        "--ask",
        metavar="QUESTION",
        help="one-shot mode: print answer and trace for QUESTION, then exit",
    )
    return parser


def _backend_config(args: argparse.Namespace) -> BackendConfig:
    if args.backend == "http":
        if not args.endpoint or not args.model:
            raise SystemExit("--backend http requires --endpoint and --model")
        return BackendConfig(
            kind="http",
            endpoint=args.endpoint,
            model=args.model,
            temperature=args.temperature,
            seed=args.seed,
        )
    if not args.script:
        raise SystemExit("--backend scripted requires --script")
    script = json.loads(args.script.read_text(encoding="utf-8"))
    if isinstance(script, dict):
        return BackendConfig(kind="scripted", keyed_script=tuple(script.items()))
    if isinstance(script, list):
        return BackendConfig(kind="scripted", script=tuple(script))
    raise SystemExit("--script must contain a JSON list or object")


def _load_graph(args: argparse.Namespace):
    if args.kg:
        return load_graph(args.kg.read_text(encoding="utf-8"))
    return build_demo_kg()


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    graph = _load_graph(args)
    backend_config = _backend_config(args)
    traversal_config = TraversalConfig(iteration_cap=args.max_iterations)

    if args.ask is not None:
        backend = backend_config.build()
        try:
            session = ontology_based_retrieval(graph, args.ask, backend, traversal_config)
            explanation = compose_answer(session, "none", backend, traversal_config.catalog)
        except TraversalBackendError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(explanation.answer)
        print()
        print(render_trace(session))
        return 0

    import uvicorn

    frontend_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(
        graph,
        backend_config,
        traversal_config,
        frontend_dir=frontend_dir if frontend_dir.is_dir() else None,
    )
    uvicorn.run(app, host="127.0.0.1", port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
