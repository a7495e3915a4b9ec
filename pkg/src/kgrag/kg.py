"""In-memory knowledge graph: ontology classes, typed instances, labeled edges.

The graph is immutable after loading. All lookups and text renderings are
deterministic so that traversal sessions and prompts are reproducible byte
for byte.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence, Union

if TYPE_CHECKING:
    from .traversal import LlmQuery

logger = logging.getLogger(__name__)


class KnowledgeGraphError(Exception):
    """Base class for graph loading and lookup failures."""


class GraphFormatError(KnowledgeGraphError):
    """The serialized graph document is malformed."""


class GraphIntegrityError(KnowledgeGraphError):
    """The document violates referential integrity or uniqueness rules."""


@dataclass(frozen=True)
class ClassDef:
    """An ontology class (node category) with a human-readable description."""

    id: str
    label: str = ""
    description: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise GraphIntegrityError("class id must be non-empty")
        if not self.label:
            object.__setattr__(self, "label", self.id)


@dataclass(frozen=True, eq=True)
class Instance:
    """A typed individual with optional literal properties."""

    id: str
    types: tuple[str, ...]
    properties: tuple[tuple[str, Union[str, int, float]], ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise GraphIntegrityError("instance id must be non-empty")
        if not self.types:
            raise GraphIntegrityError(f"instance {self.id!r} has no types")

    @property
    def properties_map(self) -> dict[str, Union[str, int, float]]:
        return dict(self.properties)


@dataclass(frozen=True)
class Edge:
    """A directed (subject, predicate, object) triple between node ids."""

    subject: str
    predicate: str
    object: str

    def __str__(self) -> str:
        return f"({self.subject}, {self.predicate}, {self.object})"


@dataclass(frozen=True)
class RelationDef:
    """Class-level relation schema entry: domain -predicate-> range."""

    domain: str
    predicate: str
    range: str


Node = Union[ClassDef, Instance]


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Frozen knowledge graph with precomputed adjacency indexes.

    Construct via :func:`load_graph` or the fixture builders; direct
    construction skips validation.
    """

    classes: Mapping[str, ClassDef]
    instances: Mapping[str, Instance]
    edges: tuple[Edge, ...]
    relation_schema: tuple[RelationDef, ...]
    _outgoing: Mapping[str, tuple[Edge, ...]] = field(repr=False, default_factory=dict)
    _incoming: Mapping[str, tuple[Edge, ...]] = field(repr=False, default_factory=dict)

    def node(self, node_id: str) -> Node | None:
        found = self.instances.get(node_id)
        if found is None:
            return self.classes.get(node_id)
        return found

    def has_node(self, node_id: str) -> bool:
        return node_id in self.instances or node_id in self.classes

    @property
    def node_ids(self) -> set[str]:
        return set(self.classes) | set(self.instances)

    def instances_of(self, class_id: str) -> list[Instance]:
        """All instances carrying the given class among their types, in load order."""
        return [inst for inst in self.instances.values() if class_id in inst.types]

    def outgoing(self, node_id: str) -> tuple[Edge, ...]:
        return self._outgoing.get(node_id, ())

    def incoming(self, node_id: str) -> tuple[Edge, ...]:
        return self._incoming.get(node_id, ())


def normalize_id(raw: str) -> str:
    """Trim and collapse internal whitespace of an identifier.

    Applied to LLM-supplied ids before lookup; stored ids are never rewritten.
    """
    return " ".join(raw.split())


def assemble_graph(
    classes: Iterable[ClassDef],
    instances: Iterable[Instance],
    edges: Iterable[Edge],
    relation_schema: Iterable[RelationDef] = (),
) -> KnowledgeGraph:
    """Validate parts and freeze them into a KnowledgeGraph.

    Raises GraphIntegrityError on duplicate ids, dangling edge endpoints,
    unknown instance types, duplicate triples, or schema entries that do not
    reference declared classes.
    """
    class_map: dict[str, ClassDef] = {}
    for cls in classes:
        if cls.id in class_map:
            raise GraphIntegrityError(f"duplicate class id {cls.id!r}")
        class_map[cls.id] = cls

    instance_map: dict[str, Instance] = {}
    for inst in instances:
        if inst.id in instance_map:
            raise GraphIntegrityError(f"duplicate instance id {inst.id!r}")
        if inst.id in class_map:
            raise GraphIntegrityError(
                f"id {inst.id!r} is used both as a class and as an instance"
            )
        for type_id in inst.types:
            if type_id not in class_map:
                raise GraphIntegrityError(
                    f"instance {inst.id!r} has unknown type {type_id!r}"
                )
        instance_map[inst.id] = inst

    def known(node_id: str) -> bool:
        return node_id in class_map or node_id in instance_map

    edge_list: list[Edge] = []
    seen_triples: set[Edge] = set()
    outgoing: dict[str, list[Edge]] = {}
    incoming: dict[str, list[Edge]] = {}
    for edge in edges:
        if edge in seen_triples:
            raise GraphIntegrityError(f"duplicate edge {edge}")
        if not known(edge.subject):
            raise GraphIntegrityError(
                f"edge {edge} references unknown subject {edge.subject!r}"
            )
        if not known(edge.object):
            raise GraphIntegrityError(
                f"edge {edge} references unknown object {edge.object!r}"
            )
        seen_triples.add(edge)
        edge_list.append(edge)
        outgoing.setdefault(edge.subject, []).append(edge)
        incoming.setdefault(edge.object, []).append(edge)

    schema_list: list[RelationDef] = []
    for rel in relation_schema:
        if rel.domain not in class_map:
            raise GraphIntegrityError(
                f"relation schema domain {rel.domain!r} is not a declared class"
            )
        if rel.range not in class_map:
            raise GraphIntegrityError(
                f"relation schema range {rel.range!r} is not a declared class"
            )
        schema_list.append(rel)

    return KnowledgeGraph(
        classes=class_map,
        instances=instance_map,
        edges=tuple(edge_list),
        relation_schema=tuple(schema_list),
        _outgoing={k: tuple(v) for k, v in outgoing.items()},
        _incoming={k: tuple(v) for k, v in incoming.items()},
    )


_TOP_LEVEL_KEYS = {"classes", "instances", "edges", "relation_schema"}


def load_graph(document: str) -> KnowledgeGraph:
    """Parse a serialized KG document into a frozen KnowledgeGraph.

    The document is a UTF-8 JSON object with keys ``classes``, ``instances``,
    ``edges`` and ``relation_schema`` (each optional, defaulting to empty).
    Loading is deterministic: the same document yields the same iteration
    order everywhere ordering is observable.
    """
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"document is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise GraphFormatError("top level of a KG document must be an object")
    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise GraphFormatError(f"unknown top-level keys: {sorted(unknown)}")

    def require_str(record: dict, key: str, where: str) -> str:
        value = record.get(key)
        if not isinstance(value, str) or not value:
            raise GraphFormatError(f"{where}: {key!r} must be a non-empty string")
        return value

    classes = []
    for record in _list_section(data, "classes"):
        cid = require_str(record, "id", "class entry")
        label = record.get("label", cid)
        description = record.get("description", "")
        if not isinstance(label, str) or not isinstance(description, str):
            raise GraphFormatError(f"class {cid!r}: label/description must be strings")
        classes.append(ClassDef(id=cid, label=label, description=description))

    instances = []
    for record in _list_section(data, "instances"):
        iid = require_str(record, "id", "instance entry")
        types = record.get("types")
        if not isinstance(types, list) or not types or not all(
            isinstance(t, str) for t in types
        ):
            raise GraphFormatError(
                f"instance {iid!r}: 'types' must be a non-empty list of strings"
            )
        raw_props = record.get("properties", {})
        if not isinstance(raw_props, dict):
            raise GraphFormatError(f"instance {iid!r}: 'properties' must be an object")
        props = []
        for name, value in raw_props.items():
            if isinstance(value, bool) or not isinstance(value, (str, int, float)):
                raise GraphFormatError(
                    f"instance {iid!r}: property {name!r} must be text or a number"
                )
            props.append((name, value))
        instances.append(Instance(id=iid, types=tuple(types), properties=tuple(props)))

    edges = []
    for record in _list_section(data, "edges"):
        edges.append(
            Edge(
                subject=require_str(record, "subject", "edge entry"),
                predicate=require_str(record, "predicate", "edge entry"),
                object=require_str(record, "object", "edge entry"),
            )
        )

    schema = []
    for record in _list_section(data, "relation_schema"):
        schema.append(
            RelationDef(
                domain=require_str(record, "domain", "relation schema entry"),
                predicate=require_str(record, "predicate", "relation schema entry"),
                range=require_str(record, "range", "relation schema entry"),
            )
        )

    return assemble_graph(classes, instances, edges, schema)


def _list_section(data: dict, key: str) -> list[dict]:
    section = data.get(key, [])
    if not isinstance(section, list) or not all(isinstance(x, dict) for x in section):
        raise GraphFormatError(f"{key!r} must be a list of objects")
    return section


def dump_graph(graph: KnowledgeGraph) -> str:
    """Serialize a graph to the KG document format (inverse of load_graph).

    Output is deterministic: dumping the same graph twice yields identical
    bytes, and load_graph(dump_graph(g)) reproduces g.
    """
    payload = {
        "classes": [
            {"id": c.id, "label": c.label, "description": c.description}
            for c in graph.classes.values()
        ],
        "instances": [
            {"id": i.id, "types": list(i.types), "properties": i.properties_map}
            for i in graph.instances.values()
        ],
        "edges": [
            {"subject": e.subject, "predicate": e.predicate, "object": e.object}
            for e in graph.edges
        ],
        "relation_schema": [
            {"domain": r.domain, "predicate": r.predicate, "range": r.range}
            for r in graph.relation_schema
        ],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def get_nodes(graph: KnowledgeGraph, ids: Sequence[str]) -> dict[str, Node]:
    """Resolve ids to nodes; unknown ids are dropped with a warning.

    Total by design: the traversal loop must tolerate LLM-invented ids, so
    unknown ids never raise. Result preserves the order of first occurrence.
    """
    resolved: dict[str, Node] = {}
    for raw in ids:
        node_id = normalize_id(raw)
        node = graph.node(node_id)
        if node is None:
            logger.warning("unknown node id requested: %r", raw)
        elif node_id not in resolved:
            resolved[node_id] = node
    return resolved


def get_node_structure(graph: KnowledgeGraph, node_id: str) -> str:
    """Deterministic plain-text rendering of a node's neighborhood.

    Fixed order: id line, types (or class marker), literal properties sorted
    by name, outgoing edges sorted by (predicate, object), incoming edges
    sorted by (predicate, subject). Empty sections are omitted. Byte-stable
    across runs and across loads of the same document.
    """
    node = graph.node(node_id)
    if node is None:
        raise KnowledgeGraphError(f"unknown node id {node_id!r}")

    lines = [f"Node: {node.id}"]
    if isinstance(node, ClassDef):
        lines.append("Kind: class")
        if node.description:
            lines.append(f"Description: {node.description}")
    else:
        lines.append(f"Types: {', '.join(sorted(node.types))}")
        if node.properties:
            lines.append("Properties:")
            for name, value in sorted(node.properties):
                lines.append(f"  {name}: {value}")

    outgoing = sorted(graph.outgoing(node.id), key=lambda e: (e.predicate, e.object))
    if outgoing:
        lines.append("Outgoing edges:")
        lines.extend(f"  {e.predicate} -> {e.object}" for e in outgoing)
    incoming = sorted(graph.incoming(node.id), key=lambda e: (e.predicate, e.subject))
    if incoming:
        lines.append("Incoming edges:")
        lines.extend(f"  {e.predicate} <- {e.subject}" for e in incoming)
    return "\n".join(lines)


EMPTY_SCHEMA_TEXT = "(empty ontology: no classes defined)"


def class_schema_summary(graph: KnowledgeGraph) -> str:
    """Class-level summary used to fill the ontology-structure prompt slot.

    Lists every class (id plus description) and every relation schema triple;
    never mentions instance ids. Deterministic: classes sorted by id,
    relations by (domain, predicate, range).
    """
    if not graph.classes:
        return EMPTY_SCHEMA_TEXT
    lines = ["Classes:"]
    for cid in sorted(graph.classes):
        cls = graph.classes[cid]
        lines.append(f"  {cid}: {cls.description}" if cls.description else f"  {cid}")
    relations = sorted(
        graph.relation_schema, key=lambda r: (r.domain, r.predicate, r.range)
    )
    if relations:
        lines.append("Relations:")
        lines.extend(f"  {r.domain} -{r.predicate}-> {r.range}" for r in relations)
    return "\n".join(lines)


def execute_query(graph: KnowledgeGraph, query: "LlmQuery") -> list[Node]:
    """Resolve a parsed LLM query against the graph.

    Node requests resolve via get_nodes semantics; class-instance requests
    ({"instances_of": classId}) resolve to all instances typed by that class.
    A fully unresolvable query yields an empty list, never an error.
    """
    if query.kind == "node_request":
        return list(get_nodes(graph, query.ids).values())
    if query.kind == "class_instances_request":
        class_id = normalize_id(query.class_id or "")
        if class_id not in graph.classes:
            logger.warning("instances_of request for unknown class: %r", query.class_id)
            return []
        return list(graph.instances_of(class_id))
    return []
