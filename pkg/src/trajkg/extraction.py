"""Node and relation extraction over an extraction provider.

Statements go to the provider in batches; responses come back under the
strict NODES/RELATIONS grammars. Malformed lines, unknown endpoints, raw
self-loops, and taxonomy violations are dropped with diagnostics. Nothing
is deduplicated here: merging surface forms is the graph builder's job.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import normalize_text
from .diagnostics import Diagnostic, diag
from .errors import ExtractionError, InputError
from .grammar import parse_structured_output
from .taxonomy import EdgeKind, NodeKind


@dataclass(frozen=True)
class RawNode:
    label: str
    kind: NodeKind
    source_stmt_ids: tuple[str, ...]


@dataclass(frozen=True)
class RawRelation:
    src_label: str
    dst_label: str
    relation_label: str
    kind: EdgeKind
    source_stmt_ids: tuple[str, ...]


def _batches(statements: list, batch_size: int):
    step = max(1, int(batch_size))
    for start in range(0, len(statements), step):
        yield statements[start : start + step]


def _attribute(label_parts: list[str], batch: list) -> tuple[str, ...]:
    """Statement ids whose text mentions every given label; whole batch if none."""
    folded = [part.casefold() for part in label_parts]
    hits = tuple(
        s.stmt_id for s in batch if all(part in s.text.casefold() for part in folded)
    )
    return hits if hits else tuple(s.stmt_id for s in batch)


def extract_nodes(
    statements: list, provider, batch_size: int = 20
) -> tuple[list[RawNode], list[Diagnostic]]:
    """Extract entity nodes from refined statements."""
    if not statements:
        raise InputError("extract_nodes requires at least one statement")
    nodes: list[RawNode] = []
    diagnostics: list[Diagnostic] = []
    for batch in _batches(statements, batch_size):
        bindings = {"statements": "\n".join(s.text for s in batch)}
        response = provider.complete("EXTRACT_NODES", bindings)
        records, batch_diags = parse_structured_output("NODES", response)
        diagnostics.extend(batch_diags)
        if response.splitlines() and not records:
            raise ExtractionError(
                "every node line in a batch was malformed", diagnostics=batch_diags
            )
        for record in records:
            label = normalize_text(record.label)
            if not label:
                diagnostics.append(diag("empty-label", "node label empty after normalization"))
                continue
            nodes.append(
                RawNode(
                    label=label,
                    kind=record.kind,
                    source_stmt_ids=_attribute([label], batch),
                )
            )
    return nodes, diagnostics


def extract_relations(
    nodes: list, statements: list, provider, batch_size: int = 20
) -> tuple[list[RawRelation], list[Diagnostic]]:
    """Extract labeled relations between already-extracted nodes.

    Relations naming endpoints absent from the node list never survive;
    causal/sequential relations must touch at least one event node.
    """
    if not nodes:
        raise InputError("extract_relations requires at least one node")
    known_labels = {normalize_text(n.label) for n in nodes}
    event_labels = {normalize_text(n.label) for n in nodes if n.kind.is_event}
    node_catalog = "\n".join(f"{n.kind.value}\t{n.label}" for n in nodes)

    relations: list[RawRelation] = []
    diagnostics: list[Diagnostic] = []
    for batch in _batches(statements, batch_size):
        bindings = {
            "nodes": node_catalog,
            "statements": "\n".join(s.text for s in batch),
        }
        response = provider.complete("EXTRACT_RELATIONS", bindings)
        records, batch_diags = parse_structured_output("RELATIONS", response)
        diagnostics.extend(batch_diags)
        if response.splitlines() and not records:
            raise ExtractionError(
                "every relation line in a batch was malformed", diagnostics=batch_diags
            )
        for record in records:
            src = normalize_text(record.src_label)
            dst = normalize_text(record.dst_label)
            relation_label = normalize_text(record.relation_label)
            if src not in known_labels or dst not in known_labels:
                missing = src if src not in known_labels else dst
                diagnostics.append(
                    diag("unknown-endpoint", f"relation endpoint {missing!r} is not an extracted node", missing)
                )
                continue
            if src == dst:
                diagnostics.append(diag("self-loop", f"relation loops on {src!r}", src))
                continue
            if record.kind.needs_event_endpoint and not ({src, dst} & event_labels):
                diagnostics.append(
                    diag(
                        "taxonomy",
                        f"{record.kind.value} relation {src!r} -> {dst!r} touches no event node",
                        src,
                        dst,
                    )
                )
                continue
            relations.append(
                RawRelation(
                    src_label=src,
                    dst_label=dst,
                    relation_label=relation_label,
                    kind=record.kind,
                    source_stmt_ids=_attribute([src, dst], batch),
                )
            )
    return relations, diagnostics
