"""Compose the final user-facing explanation from a terminated session.

One additional backend call turns the accumulated node structures into a
natural-language answer; the prompt's style segment adapts the tone to the
reader's role (worker, developer or none) without touching the retrieved
context.
"""

from __future__ import annotations

from dataclasses import dataclass

from .kg import ClassDef, Node, get_node_structure
from .llm import Backend, llm_response
from .prompts import DEFAULT_CATALOG, PromptCatalog
from .traversal import RetrievalSession, StopReason

NO_RESULT_ANSWER = "No result for query."

ROLE_PROFILES = ("none", "worker", "developer")


@dataclass(frozen=True)
class Explanation:
    """Final natural-language answer grounded in the retrieved nodes."""

    answer: str
    cited_node_ids: tuple[str, ...]
    role_profile: str
    session: RetrievalSession


def answer_prompt_parts(
    session: RetrievalSession,
    role_profile: str,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> tuple[str, str]:
    """Return (context segment, style segment) of the composer user prompt.

    The context segment is identical for every role profile: the query
    followed by the node structures in first-retrieval order. Only the style
    segment varies.
    """
    # node_dict preserves first-retrieval order; re-rendering against the
    # session's graph is byte-identical to what the dialog saw.
    structures = "\n\n".join(
        _render_node(session, node) for node in session.node_dict.values()
    )
    context = (
        f"User query: {session.query}\n\n"
        f"Retrieved knowledge graph context:\n{structures}"
    )
    return context, catalog.answer_style(role_profile)


def _render_node(session: RetrievalSession, node: Node) -> str:
    if session.graph is not None:
        return get_node_structure(session.graph, node.id)
    # Sessions detached from their graph still render a useful context.
    if isinstance(node, ClassDef):
        return f"Node: {node.id}\nKind: class"
    return f"Node: {node.id}\nTypes: {', '.join(sorted(node.types))}"


def compose_answer(
    session: RetrievalSession,
    role_profile: str,
    backend: Backend,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> Explanation:
    """Issue the final prompt and return the grounded explanation.

    A no-result session short-circuits to the fixed no-result answer without
    any backend call.
    """
    if role_profile not in ROLE_PROFILES:
        raise ValueError(f"unknown role profile {role_profile!r}")
    if session.stop_reason is StopReason.NO_RESULT:
        return Explanation(
            answer=NO_RESULT_ANSWER,
            cited_node_ids=(),
            role_profile=role_profile,
            session=session,
        )
    context, style = answer_prompt_parts(session, role_profile, catalog)
    answer, _ = llm_response(context + "\n\n" + style, catalog.answer_system, None, backend)
    return Explanation(
        answer=answer,
        cited_node_ids=tuple(extract_cited_nodes(answer, session.node_dict)),
        role_profile=role_profile,
        session=session,
    )


def extract_cited_nodes(answer: str, node_dict: dict[str, Node]) -> list[str]:
    """Ids of retrieved nodes whose id or label occurs in the answer text.

    Order follows the node dictionary (first-retrieval order); nodes outside
    it can never be cited.
    """
    cited = []
    for node_id, node in node_dict.items():
        label = node.label if isinstance(node, ClassDef) else ""
        if node_id in answer or (label and label in answer):
            cited.append(node_id)
    return cited
