"""kgrag: explain ML models by letting an LLM traverse a knowledge graph."""

from .compose import Explanation, compose_answer, extract_cited_nodes
from .demo import build_demo_kg, export_demo_kg
from .kg import (
    ClassDef,
    Edge,
    Instance,
    KnowledgeGraph,
    RelationDef,
    class_schema_summary,
    dump_graph,
    execute_query,
    get_node_structure,
    get_nodes,
    load_graph,
)
from .llm import BackendConfig, ChatHistory, ChatMessage, llm_response, scripted_backend
from .prompts import DEFAULT_CATALOG, PromptCatalog, load_catalog
from .traversal import (
    LlmQuery,
    RetrievalSession,
    StopReason,
    TraversalConfig,
    identify_classes,
    identify_start_nodes,
    ontology_based_retrieval,
    parse_llm_json,
    render_trace,
)

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "ChatHistory",
    "ChatMessage",
    "ClassDef",
    "DEFAULT_CATALOG",
    "Edge",
    "Explanation",
    "Instance",
    "KnowledgeGraph",
    "LlmQuery",
    "PromptCatalog",
    "RelationDef",
    "RetrievalSession",
    "StopReason",
    "TraversalConfig",
    "build_demo_kg",
    "class_schema_summary",
    "compose_answer",
    "dump_graph",
    "execute_query",
    "export_demo_kg",
    "extract_cited_nodes",
    "get_node_structure",
    "get_nodes",
    "identify_classes",
    "identify_start_nodes",
    "llm_response",
    "load_catalog",
    "load_graph",
    "ontology_based_retrieval",
    "parse_llm_json",
    "render_trace",
    "scripted_backend",
]
