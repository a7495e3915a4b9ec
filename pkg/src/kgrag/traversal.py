"""LLM-guided knowledge graph traversal.

A retrieval session runs a three-step dialog with the backend: identify the
relevant ontology classes, identify starting instances, then iteratively
expand through the graph until the backend answers with the stop token, a
turn yields no unseen node, or the iteration cap fires. Termination is
guaranteed for every backend, even an adversarial one: each continuing turn
must add at least one unseen node id and the graph is finite.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .kg import KnowledgeGraph, Node, class_schema_summary, execute_query, get_node_structure, normalize_id
from .llm import Backend, ChatHistory, LlmGatewayError, llm_response
from .prompts import DEFAULT_CATALOG, NO_INSTANCE_FOUND, STOP_TOKEN, PromptCatalog, fill

logger = logging.getLogger(__name__)


class LlmQueryParseError(Exception):
    """The assistant reply is not a recognizable graph query."""


class StopReason(str, Enum):
    LLM_STOP = "llm_stop"
    NO_NEW_INFO = "no_new_info"
    NO_RESULT = "no_result"
    ITERATION_CAP = "iteration_cap"


@dataclass(frozen=True)
class LlmQuery:
    """A parsed assistant reply: node request, class-instances request, or stop."""

    kind: str  # "node_request" | "class_instances_request" | "stop"
    ids: tuple[str, ...] = ()
    class_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind == "stop" and (self.ids or self.class_id):
            raise ValueError("stop query carries no ids")
        if self.kind == "node_request" and not self.ids:
            raise ValueError("node request needs at least one id")
        if self.kind == "class_instances_request" and not self.class_id:
            raise ValueError("class instances request needs a class id")


@dataclass(frozen=True)
class TraceStep:
    """One traversal turn: what was requested, what resolved, how much text."""

    iteration: int
    requested_ids: tuple[str, ...]
    resolved_ids: tuple[str, ...]
    info_length: int


@dataclass
class RetrievalSession:
    """Full state of one traversal run, kept for transcripts and the UI."""

    query: str
    graph: KnowledgeGraph | None = None
    history: ChatHistory = field(default_factory=ChatHistory)
    node_dict: dict[str, Node] = field(default_factory=dict)
    retrieved_ids: set[str] = field(default_factory=set)
    iteration: int = 0
    stop_reason: StopReason | None = None
    trace: list[TraceStep] = field(default_factory=list)
    classes: list[str] = field(default_factory=list)
    start_ids: list[str] = field(default_factory=list)


class TraversalBackendError(Exception):
    """Backend failure mid-session; carries the partial session for inspection."""

    def __init__(self, session: RetrievalSession, cause: Exception) -> None:
        super().__init__(f"backend failed during traversal: {cause}")
        self.session = session
        self.cause = cause


@dataclass(frozen=True)
class TraversalConfig:
    """Limits and templates for a retrieval run."""

    iteration_cap: int = 25
    catalog: PromptCatalog = DEFAULT_CATALOG

    def __post_init__(self) -> None:
        if self.iteration_cap < 1:
            raise ValueError("iteration_cap must be at least 1")


def _normalized_ids(values: Sequence[object]) -> tuple[str, ...]:
    """Normalize, stringify and deduplicate ids, preserving first occurrence."""
    seen: dict[str, None] = {}
    for value in values:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = str(value)
        if not isinstance(value, str):
            continue
        normalized = normalize_id(value)
        if normalized:
            seen.setdefault(normalized)
    return tuple(seen)


def _first_json_value(text: str) -> object:
    """Decode the first JSON array or object embedded in text.

    Scans bracket positions left to right and returns the first decodable
    value; markdown fences and surrounding prose are thereby ignored
    deterministically. Raises LlmQueryParseError when nothing decodes.
    """
    decoder = json.JSONDecoder()
    for index, char in enumerate(text):
        if char in "[{":
            try:
                value, _ = decoder.raw_decode(text, index)
            except json.JSONDecodeError:
                continue
            return value
    raise LlmQueryParseError(f"no JSON value found in reply: {text[:120]!r}")


def parse_llm_json(text: str) -> LlmQuery:
    """Parse an assistant reply into an LlmQuery.

    Any reply containing the literal stop token parses as a stop signal. A
    bare JSON list of id strings is a node request; an object of the form
    {"instances_of": classId} requests all instances of a class.
    """
    if STOP_TOKEN in text:
        return LlmQuery(kind="stop")
    value = _first_json_value(text)
    if isinstance(value, list):
        ids = _normalized_ids(value)
        if not ids:
            raise LlmQueryParseError("node request resolves to an empty id list")
        return LlmQuery(kind="node_request", ids=ids)
    if isinstance(value, dict):
        class_id = value.get("instances_of")
        if isinstance(class_id, str) and normalize_id(class_id):
            return LlmQuery(
                kind="class_instances_request", class_id=normalize_id(class_id)
            )
        raise LlmQueryParseError(f"unrecognized query object: {value!r}")
    raise LlmQueryParseError(f"unrecognized query value: {value!r}")


def parse_id_list(text: str) -> list[str] | None:
    """Lenient id-list parse for the class/start-node steps; None if malformed.

    Unlike parse_llm_json an empty list is a legal outcome here (it means
    "no candidates"), and a stop token is treated as malformed.
    """
    if STOP_TOKEN in text:
        return None
    try:
        value = _first_json_value(text)
    except LlmQueryParseError:
        return None
    if isinstance(value, list):
        return list(_normalized_ids(value))
    return None


def _validated(
    ids: Sequence[str], universe: Sequence[str], what: str
) -> list[str]:
    valid = []
    for node_id in ids:
        if node_id in universe:
            valid.append(node_id)
        else:
            logger.warning("dropping unknown %s id from reply: %r", what, node_id)
    return valid


def identify_classes(
    query: str,
    graph: KnowledgeGraph,
    backend: Backend,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> tuple[list[str], ChatHistory]:
    """Step 1: ask the backend which ontology classes are relevant.

    Unknown class ids are dropped with warnings. When the first attempt
    yields nothing, a simplified fallback prompt is issued once on the same
    history. Both attempts empty is a no-result outcome, not an error.
    """
    system = fill(catalog.step1_system, ontology_structure=class_schema_summary(graph))
    user = fill(catalog.step1_user, query=query)
    response, history = llm_response(user, system, None, backend)
    classes = _validated(parse_id_list(response) or (), graph.classes, "class")
    if not classes:
        fallback = fill(catalog.fallback_user, query=query)
        response, history = llm_response(fallback, "", history, backend)
        classes = _validated(parse_id_list(response) or (), graph.classes, "class")
    return classes, history


def identify_start_nodes(
    classes: Sequence[str],
    query: str,
    graph: KnowledgeGraph,
    backend: Backend,
    history: ChatHistory,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> list[str]:
    """Step 2: ask for instances of the identified classes as entry points.

    Continues the step-1 history. May legally return an empty list; the
    traversal loop then falls back to interpreting the raw reply as a query.
    """
    user = fill(
        catalog.step2_user,
        classes=json.dumps(list(classes), ensure_ascii=False),
        query=query,
    )
    response, _ = llm_response(user, "", history, backend)
    return _validated(parse_id_list(response) or (), graph.instances, "instance")


def ontology_based_retrieval(
    graph: KnowledgeGraph,
    query: str,
    backend: Backend,
    config: TraversalConfig = TraversalConfig(),
) -> RetrievalSession:
    """Run the full retrieval dialog and return the terminated session.

    Every turn resolves the pending node requests, renders each resolved
    node, accumulates the node dictionary, sends the feedback prompt and
    parses the reply. The turn's feedback carries the literal
    "No instance found" when nothing resolved. The session stops when the
    reply contains the stop token, when a turn contributes no unseen node id,
    when no classes were identified, or when the iteration cap fires.
    """
    catalog = config.catalog
    session = RetrievalSession(query=query, graph=graph)
    try:
        classes, history = identify_classes(query, graph, backend, catalog)
        session.history = history
        session.classes = classes
        if not classes:
            session.stop_reason = StopReason.NO_RESULT
            return session
        start_ids = identify_start_nodes(
            classes, query, graph, backend, history, catalog
        )
        session.start_ids = start_ids
        _run_search_loop(session, graph, backend, config)
    except LlmGatewayError as exc:
        raise TraversalBackendError(session, exc) from exc
    return session


def _run_search_loop(
    session: RetrievalSession,
    graph: KnowledgeGraph,
    backend: Backend,
    config: TraversalConfig,
) -> None:
    catalog = config.catalog
    history = session.history
    pending: LlmQuery | None = None
    if session.start_ids:
        pending = LlmQuery(kind="node_request", ids=tuple(session.start_ids))
    last_reply = history.last_assistant()
    first_turn = True

    while True:
        if pending is None:
            try:
                pending = parse_llm_json(last_reply)
            except LlmQueryParseError:
                logger.warning("treating unparseable reply as an empty query")
                pending = None

        if pending is None or pending.kind == "stop":
            requested: tuple[str, ...] = ()
            resolved: list[Node] = []
        else:
            requested = (
                pending.ids
                if pending.kind == "node_request"
                else (f"instances_of:{pending.class_id}",)
            )
            resolved = execute_query(graph, pending)
        resolved_ids = tuple(node.id for node in resolved)
        new_ids = [nid for nid in resolved_ids if nid not in session.retrieved_ids]

        if resolved:
            info = "\n\n".join(get_node_structure(graph, nid) for nid in resolved_ids)
        else:
            info = NO_INSTANCE_FOUND
        for node in resolved:
            session.node_dict[node.id] = node
            session.retrieved_ids.add(node.id)
        if not first_turn:
            session.iteration += 1
        session.trace.append(
            TraceStep(
                iteration=0 if first_turn else session.iteration,
                requested_ids=requested,
                resolved_ids=resolved_ids,
                info_length=len(info),
            )
        )

        # Defense-in-depth: bound the number of backend calls even though the
        # finite-graph argument already guarantees termination.
        if not first_turn and session.iteration >= config.iteration_cap:
            session.stop_reason = StopReason.ITERATION_CAP
            return

        user_message = fill(catalog.step3_feedback, retrieved_info=info)
        if first_turn:
            setup = fill(
                catalog.step3_setup,
                query=session.query,
                start_nodes=json.dumps(session.start_ids, ensure_ascii=False),
            )
            user_message = setup + "\n\n" + user_message
        reply, _ = llm_response(user_message, "", history, backend)

        if STOP_TOKEN in reply:
            session.stop_reason = StopReason.LLM_STOP
            return
        if not new_ids:
            session.stop_reason = StopReason.NO_NEW_INFO
            return
        last_reply = reply
        pending = None
        first_turn = False


def render_trace(session: RetrievalSession) -> str:
    """Deterministic human-readable rendering of a terminated session."""
    lines = [f"query: {session.query}"]
    lines.append(f"classes: {', '.join(session.classes) if session.classes else '(none)'}")
    if session.stop_reason is not StopReason.NO_RESULT:
        start = ", ".join(session.start_ids) if session.start_ids else "(none)"
        lines.append(f"start nodes: {start}")
    for step in session.trace:
        label = "iteration 0 (start)" if step.iteration == 0 else f"iteration {step.iteration}"
        lines.append(
            f"{label}: requested=[{', '.join(step.requested_ids)}] "
            f"resolved=[{', '.join(step.resolved_ids)}]"
        )
    reason = session.stop_reason.value if session.stop_reason else "(not terminated)"
    lines.append(f"stop_reason: {reason} ({session.iteration} expansion iterations)")
    return "\n".join(lines)
