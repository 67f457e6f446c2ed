"""The course knowledge graph: build, validate, persist, export.

Nodes carry canonical labels (case-folded, NFC, whitespace-collapsed) and
remember every merged surface form as an alias. Edges are deduplicated on
(src, dst, relation label, kind); parallel edges with different verbs are
distinct knowledge and survive. Graphs are append-only while building and
immutable afterwards, so analytics stay pure functions.

Persisted form is a single JSON document with id-sorted arrays, making
save/load round-trips byte-identical.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .diagnostics import Diagnostic, diag
from .errors import GraphValidationError, InputError
from .taxonomy import EdgeKind, NodeKind

SCHEMA_VERSION = 1

DEFAULT_NODE_COLOR = "#d62728"

_EDGE_STYLES = {
    EdgeKind.SEMANTIC: "solid",
    EdgeKind.CAUSAL: "bold",
    EdgeKind.SEQUENTIAL: "dashed",
}


def canonical_label(text: str) -> str:
    """Canonical form used for deduplication: NFC, collapsed spaces, casefold."""
    return " ".join(unicodedata.normalize("NFC", text).split()).casefold()


def _id_sort_key(identifier: str):
    # n1, n2, ..., n10 sort numerically; anything else falls back to text.
    prefix, suffix = identifier[:1], identifier[1:]
    if suffix.isdigit():
        return (prefix, 0, int(suffix), identifier)
    return (prefix, 1, 0, identifier)


@dataclass(frozen=True)
class KnowledgeNode:
    id: str
    label: str
    kind: NodeKind
    aliases: frozenset[str] = field(default_factory=frozenset)
    provenance: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class KnowledgeEdge:
    id: str
    src: str
    dst: str
    relation_label: str
    kind: EdgeKind
    provenance: frozenset[str] = field(default_factory=frozenset)

    def endpoints(self) -> tuple[str, str]:
        return (self.src, self.dst)


class KnowledgeGraph:
    """Immutable-after-build property graph with an incident-edge index."""

    def __init__(self, nodes: dict, edges: dict, schema_version: int = SCHEMA_VERSION):
        self.nodes: dict[str, KnowledgeNode] = dict(nodes)
        self.edges: dict[str, KnowledgeEdge] = dict(edges)
        self.schema_version = schema_version
        self.adjacency: dict[str, frozenset[str]] = self._build_adjacency()

    def _build_adjacency(self) -> dict[str, frozenset[str]]:
        incident: dict[str, set[str]] = {node_id: set() for node_id in self.nodes}
        for edge in self.edges.values():
            incident.setdefault(edge.src, set()).add(edge.id)
            incident.setdefault(edge.dst, set()).add(edge.id)
        return {node_id: frozenset(edge_ids) for node_id, edge_ids in incident.items()}

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, node_id: str) -> set[tuple[str, str]]:
        """Incident (edge_id, other_node_id) pairs for a node."""
        if node_id not in self.nodes:
            raise InputError(f"unknown node id {node_id!r}")
        pairs = set()
        for edge_id in self.adjacency.get(node_id, frozenset()):
            edge = self.edges[edge_id]
            other = edge.dst if edge.src == node_id else edge.src
            pairs.add((edge_id, other))
        return pairs

    def edge_endpoints(self, edge_ids) -> set[str]:
        """Union of endpoint node ids over the given edges."""
        covered = set()
        for edge_id in edge_ids:
            edge = self.edges[edge_id]
            covered.add(edge.src)
            covered.add(edge.dst)
        return covered

    def sorted_node_ids(self) -> list[str]:
        return sorted(self.nodes, key=_id_sort_key)

    def sorted_edge_ids(self) -> list[str]:
        return sorted(self.edges, key=_id_sort_key)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.schema_version == other.schema_version
            and self.nodes == other.nodes
            and self.edges == other.edges
        )

    def __repr__(self) -> str:
        return f"KnowledgeGraph(nodes={self.node_count}, edges={self.edge_count})"


def build_graph(raw_nodes: list, raw_relations: list) -> tuple[KnowledgeGraph, list[Diagnostic]]:
    """Assemble a graph from raw extraction records.

    Nodes merge on (canonical label, kind) with alias and provenance union.
    Relations resolve their endpoint labels against canonical labels and
    aliases; unresolvable endpoints, canonical self-loops, and taxonomy
    violations are dropped with diagnostics. Duplicate edges merge their
    provenance.
    """
    diagnostics: list[Diagnostic] = []

    nodes: dict[str, KnowledgeNode] = {}
    node_key_to_id: dict[tuple[str, NodeKind], str] = {}
    aliases: dict[str, set[str]] = {}
    node_prov: dict[str, set[str]] = {}
    by_canonical: dict[str, list[str]] = {}

    for raw in raw_nodes:
        canonical = canonical_label(raw.label)
        if not canonical:
            diagnostics.append(diag("empty-label", "node label empty after canonicalization"))
            continue
        key = (canonical, raw.kind)
        node_id = node_key_to_id.get(key)
        if node_id is None:
            node_id = f"n{len(node_key_to_id) + 1}"
            node_key_to_id[key] = node_id
            aliases[node_id] = {canonical}
            node_prov[node_id] = set()
            by_canonical.setdefault(canonical, []).append(node_id)
        aliases[node_id].add(raw.label)
        node_prov[node_id].update(raw.source_stmt_ids)

    for (canonical, kind), node_id in node_key_to_id.items():
        nodes[node_id] = KnowledgeNode(
            id=node_id,
            label=canonical,
            kind=kind,
            aliases=frozenset(aliases[node_id]),
            provenance=frozenset(node_prov[node_id]),
        )

    def resolve(label: str, prefer_event: bool) -> str | None:
        candidates = by_canonical.get(canonical_label(label), [])
        if not candidates:
            return None
        if prefer_event:
            events = [nid for nid in candidates if nodes[nid].kind.is_event]
            if events:
                return min(events, key=_id_sort_key)
        return min(candidates, key=_id_sort_key)

    edges: dict[str, KnowledgeEdge] = {}
    edge_key_to_id: dict[tuple[str, str, str, EdgeKind], str] = {}
    edge_prov: dict[str, set[str]] = {}

    for raw in raw_relations:
        prefer_event = raw.kind.needs_event_endpoint
        src_id = resolve(raw.src_label, prefer_event)
        dst_id = resolve(raw.dst_label, prefer_event)
        if src_id is None or dst_id is None:
            missing = raw.src_label if src_id is None else raw.dst_label
            diagnostics.append(
                diag("unresolved-endpoint", f"no node matches endpoint {missing!r}", missing)
            )
            continue
        if src_id == dst_id:
            diagnostics.append(
                diag("self-loop", f"relation collapses to a self-loop on {src_id}", src_id)
            )
            continue
        relation = canonical_label(raw.relation_label)
        if not relation:
            diagnostics.append(diag("empty-label", "relation label empty after canonicalization"))
            continue
        if prefer_event and not (nodes[src_id].kind.is_event or nodes[dst_id].kind.is_event):
            diagnostics.append(
                diag(
                    "taxonomy",
                    f"{raw.kind.value} edge {src_id} -> {dst_id} touches no event node",
                    src_id,
                    dst_id,
                )
            )
            continue
        key = (src_id, dst_id, relation, raw.kind)
        edge_id = edge_key_to_id.get(key)
        if edge_id is None:
            edge_id = f"e{len(edge_key_to_id) + 1}"
            edge_key_to_id[key] = edge_id
            edge_prov[edge_id] = set()
        edge_prov[edge_id].update(raw.source_stmt_ids)

    for (src_id, dst_id, relation, kind), edge_id in edge_key_to_id.items():
        edges[edge_id] = KnowledgeEdge(
            id=edge_id,
            src=src_id,
            dst=dst_id,
            relation_label=relation,
            kind=kind,
            provenance=frozenset(edge_prov[edge_id]),
        )

    return KnowledgeGraph(nodes, edges), diagnostics


def validate(graph: KnowledgeGraph) -> list[Diagnostic]:
    """Re-check every structural invariant; empty list iff well-formed."""
    diagnostics: list[Diagnostic] = []

    seen_keys: set[tuple[str, NodeKind]] = set()
    for node_id, node in graph.nodes.items():
        if node.id != node_id:
            diagnostics.append(diag("id-mismatch", f"node keyed {node_id} carries id {node.id}"))
        if canonical_label(node.label) != node.label:
            diagnostics.append(
                diag("non-canonical-label", f"node {node_id} label {node.label!r} is not canonical", node_id)
            )
        key = (node.label, node.kind)
        if key in seen_keys:
            diagnostics.append(
                diag("duplicate-node", f"label {node.label!r} duplicated for kind {node.kind.value}", node_id)
            )
        seen_keys.add(key)
        if node.label not in node.aliases:
            diagnostics.append(
                diag("alias-missing-canonical", f"node {node_id} aliases omit the canonical label", node_id)
            )

    seen_edge_keys: set[tuple] = set()
    for edge_id, edge in graph.edges.items():
        if edge.id != edge_id:
            diagnostics.append(diag("id-mismatch", f"edge keyed {edge_id} carries id {edge.id}"))
        dangling = [nid for nid in edge.endpoints() if nid not in graph.nodes]
        if dangling:
            diagnostics.append(
                diag("dangling-edge", f"edge {edge_id} references missing node(s) {dangling}", edge_id)
            )
            continue
        if edge.src == edge.dst:
            diagnostics.append(diag("self-loop", f"edge {edge_id} is a self-loop", edge_id))
        key = (edge.src, edge.dst, edge.relation_label, edge.kind)
        if key in seen_edge_keys:
            diagnostics.append(diag("duplicate-edge", f"edge {edge_id} duplicates {key}", edge_id))
        seen_edge_keys.add(key)
        if edge.kind.needs_event_endpoint:
            src_kind = graph.nodes[edge.src].kind
            dst_kind = graph.nodes[edge.dst].kind
            if not (src_kind.is_event or dst_kind.is_event):
                diagnostics.append(
                    diag("taxonomy", f"{edge.kind.value} edge {edge_id} touches no event node", edge_id)
                )

    rebuilt = KnowledgeGraph(graph.nodes, graph.edges).adjacency
    if graph.adjacency != rebuilt:
        diagnostics.append(diag("adjacency-mismatch", "adjacency index disagrees with edge set"))

    return diagnostics


# --- persistence ----------------------------------------------------------


def _node_to_json(node: KnowledgeNode) -> dict:
    payload = {"id": node.id, "label": node.label, "kind": node.kind.group}
    if node.kind.is_general:
        payload["subkind"] = node.kind.value
    payload["aliases"] = sorted(node.aliases)
    payload["provenance"] = sorted(node.provenance)
    return payload


def _edge_to_json(edge: KnowledgeEdge) -> dict:
    return {
        "id": edge.id,
        "src": edge.src,
        "dst": edge.dst,
        "relation_label": edge.relation_label,
        "kind": edge.kind.value,
        "provenance": sorted(edge.provenance),
    }


def graph_to_json(graph: KnowledgeGraph) -> str:
    document = {
        "schema_version": graph.schema_version,
        "nodes": [_node_to_json(graph.nodes[nid]) for nid in graph.sorted_node_ids()],
        "edges": [_edge_to_json(graph.edges[eid]) for eid in graph.sorted_edge_ids()],
    }
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def save(graph: KnowledgeGraph, path) -> None:
    Path(path).write_text(graph_to_json(graph), encoding="utf-8")


def _node_from_json(payload: dict) -> KnowledgeNode:
    try:
        group = payload["kind"]
        if group == "event":
            kind = NodeKind.EVENT
        elif group == "general":
            kind = NodeKind(payload["subkind"])
        else:
            raise InputError(f"unknown node kind {group!r}")
        return KnowledgeNode(
            id=payload["id"],
            label=payload["label"],
            kind=kind,
            aliases=frozenset(payload.get("aliases", [])),
            provenance=frozenset(payload.get("provenance", [])),
        )
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed node record: {exc}") from exc


def _edge_from_json(payload: dict) -> KnowledgeEdge:
    try:
        return KnowledgeEdge(
            id=payload["id"],
            src=payload["src"],
            dst=payload["dst"],
            relation_label=payload["relation_label"],
            kind=EdgeKind(payload["kind"]),
            provenance=frozenset(payload.get("provenance", [])),
        )
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed edge record: {exc}") from exc


def load(path) -> KnowledgeGraph:
    p = Path(path)
    try:
        document = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read graph file {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"graph file {p} is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise InputError(f"graph file {p} must hold a JSON object")

    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        raise GraphValidationError(
            f"graph file {p} has schema_version {version!r}, expected {SCHEMA_VERSION}",
            diagnostics=[diag("version", f"unsupported schema_version {version!r}")],
        )

    nodes = {}
    for payload in document.get("nodes", []):
        node = _node_from_json(payload)
        if node.id in nodes:
            raise InputError(f"graph file {p} repeats node id {node.id}")
        nodes[node.id] = node
    edges = {}
    for payload in document.get("edges", []):
        edge = _edge_from_json(payload)
        if edge.id in edges:
            raise InputError(f"graph file {p} repeats edge id {edge.id}")
        edges[edge.id] = edge

    graph = KnowledgeGraph(nodes, edges, schema_version=version)
    problems = validate(graph)
    if problems:
        raise GraphValidationError(
            f"graph file {p} failed validation: {problems[0].message}", diagnostics=problems
        )
    return graph


# --- DOT export -----------------------------------------------------------


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def export_dot(graph: KnowledgeGraph, overlay: dict | None = None) -> str:
    """Render the graph as a Graphviz digraph.

    With an overlay (node id to fill color), every overlay node is filled
    with its color and every other node falls back to the course-node red;
    without one, nodes are unfilled. Edge kinds map to line styles.
    """
    if overlay:
        unknown = sorted(set(overlay) - set(graph.nodes))
        if unknown:
            raise InputError(f"overlay names unknown node id(s): {', '.join(unknown)}")

    lines = ["digraph G {"]
    for node_id in graph.sorted_node_ids():
        node = graph.nodes[node_id]
        attrs = [f'label="{_dot_escape(node.label)}"', f'kind="{node.kind.value}"']
        if overlay is not None:
            color = overlay.get(node_id, DEFAULT_NODE_COLOR)
            attrs.append('style="filled"')
            attrs.append(f'fillcolor="{color}"')
        lines.append(f'  "{node_id}" [{", ".join(attrs)}];')
    for edge_id in graph.sorted_edge_ids():
        edge = graph.edges[edge_id]
        lines.append(
            '  "{}" -> "{}" [label="{}", style="{}"];'.format(
                edge.src, edge.dst, _dot_escape(edge.relation_label), _EDGE_STYLES[edge.kind]
            )
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
