"""HTTP facade over the traverse-and-compose pipeline.

One question maps to one fresh retrieval session per request; the service
holds no conversation state. Responses always include the full traversal
trace so clients can show how an answer is grounded. Elapsed time travels in
the X-Elapsed-Ms header so identical requests produce byte-identical bodies.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .compose import ROLE_PROFILES, compose_answer
from .kg import KnowledgeGraph, class_schema_summary, get_node_structure
from .llm import BackendConfig
from .traversal import StopReason, TraversalBackendError, TraversalConfig, ontology_based_retrieval

logger = logging.getLogger(__name__)


class QueryRequest(BaseModel):
    question: str
    role_profile: Optional[str] = None
    backend: Optional[str] = None


class TraceRecord(BaseModel):
    iteration: int
    requested_ids: list[str]
    resolved_ids: list[str]


class QueryResponse(BaseModel):
    answer: str
    trace: list[TraceRecord]
    iterations: int
    stop_reason: str
    cited_node_ids: list[str]


def create_app(
    graph: KnowledgeGraph,
    backend_config: BackendConfig,
    traversal_config: TraversalConfig = TraversalConfig(),
    named_backends: Optional[dict[str, BackendConfig]] = None,
    frontend_dir: Optional[Path] = None,
) -> FastAPI:
    """Build the service around a frozen graph and a default backend config.

    Each request builds a fresh backend instance from the config, so ordered
    scripted backends replay identically on every request.
    """
    app = FastAPI(title="kgrag query service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    backends = {"default": backend_config, **(named_backends or {})}
    schema_text = class_schema_summary(graph)

    @app.get("/api/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/api/schema", response_class=PlainTextResponse)
    def schema() -> str:
        return schema_text

    @app.get("/api/node/{node_id}", response_class=PlainTextResponse)
    def node(node_id: str) -> str:
        if not graph.has_node(node_id):
            raise HTTPException(status_code=404, detail=f"unknown node id {node_id!r}")
        return get_node_structure(graph, node_id)

    @app.post("/api/query", response_model=QueryResponse)
    def query(request: QueryRequest, response: Response) -> QueryResponse:
        question = request.question.strip()
        if not question:
            raise HTTPException(status_code=400, detail="question must not be empty")
        role = request.role_profile or "none"
        if role not in ROLE_PROFILES:
            raise HTTPException(status_code=400, detail=f"unknown role profile {role!r}")
        config = backends.get(request.backend or "default")
        if config is None:
            raise HTTPException(
                status_code=400, detail=f"unknown backend {request.backend!r}"
            )
        backend = config.build()
        started = time.perf_counter()
        try:
            session = ontology_based_retrieval(graph, question, backend, traversal_config)
            explanation = compose_answer(
                session, role, backend, traversal_config.catalog
            )
        except TraversalBackendError as exc:
            logger.error("backend failure: %s", exc)
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        response.headers["X-Elapsed-Ms"] = f"{elapsed_ms:.3f}"
        return QueryResponse(
            answer=explanation.answer,
            trace=[
                TraceRecord(
                    iteration=step.iteration,
                    requested_ids=list(step.requested_ids),
                    resolved_ids=list(step.resolved_ids),
                )
                for step in session.trace
            ],
            iterations=session.iteration,
            stop_reason=session.stop_reason.value
            if session.stop_reason
            else StopReason.NO_RESULT.value,
            cited_node_ids=list(explanation.cited_node_ids),
        )

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
