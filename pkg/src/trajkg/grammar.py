"""Strict line grammars for provider responses.

Every response is parsed line by line. A line either matches its grammar
exactly (fixed tag, fixed tab-separated arity, kind from a closed enum) or
becomes a Malformed diagnostic carrying the line number and a reason code.
Lines are never partially applied, and every input line lands in exactly
one of the two buckets.

Grammars:
    STATEMENTS   one refined statement per non-blank line
    NODES        NODE <TAB> kind[:subkind] <TAB> label
    RELATIONS    REL <TAB> kind <TAB> src <TAB> relation <TAB> dst
    EDGES        EDGE <TAB> edge_id
"""

from __future__ import annotations

from dataclasses import dataclass

from .diagnostics import Diagnostic, diag
from .taxonomy import EdgeKind, NodeKind, parse_edge_kind, parse_node_kind

GRAMMAR_IDS = ("STATEMENTS", "NODES", "RELATIONS", "EDGES")


@dataclass(frozen=True)
class StatementRecord:
    text: str


@dataclass(frozen=True)
class NodeRecord:
    kind: NodeKind
    label: str


@dataclass(frozen=True)
class RelationRecord:
    kind: EdgeKind
    src_label: str
    relation_label: str
    dst_label: str


@dataclass(frozen=True)
class EdgeRecord:
    edge_id: str


def _malformed(lineno: int, reason: str, line: str) -> Diagnostic:
    return diag("malformed-line", f"line {lineno}: {reason}", lineno, reason, line)


def _parse_statement(lineno: int, line: str):
    if not line.strip():
        return None, _malformed(lineno, "blank", line)
    return StatementRecord(text=line.strip()), None


def _parse_node(lineno: int, line: str):
    if not line.strip():
        return None, _malformed(lineno, "blank", line)
    fields = line.split("\t")
    if fields[0] != "NODE":
        return None, _malformed(lineno, "tag", line)
    if len(fields) != 3:
        return None, _malformed(lineno, "arity", line)
    kind = parse_node_kind(fields[1].strip().casefold())
    if kind is None:
        return None, _malformed(lineno, "kind", line)
    label = fields[2].strip()
    if not label:
        return None, _malformed(lineno, "empty-field", line)
    return NodeRecord(kind=kind, label=label), None


def _parse_relation(lineno: int, line: str):
    if not line.strip():
        return None, _malformed(lineno, "blank", line)
    fields = line.split("\t")
    if fields[0] != "REL":
        return None, _malformed(lineno, "tag", line)
    if len(fields) != 5:
        return None, _malformed(lineno, "arity", line)
    kind = parse_edge_kind(fields[1].strip().casefold())
    if kind is None:
        return None, _malformed(lineno, "kind", line)
    src, rel, dst = (f.strip() for f in fields[2:5])
    if not (src and rel and dst):
        return None, _malformed(lineno, "empty-field", line)
    return RelationRecord(kind=kind, src_label=src, relation_label=rel, dst_label=dst), None


def _parse_edge(lineno: int, line: str):
    if not line.strip():
        return None, _malformed(lineno, "blank", line)
    fields = line.split("\t")
    if fields[0] != "EDGE":
        return None, _malformed(lineno, "tag", line)
    if len(fields) != 2:
        return None, _malformed(lineno, "arity", line)
    edge_id = fields[1].strip()
    if not edge_id:
        return None, _malformed(lineno, "empty-field", line)
    return EdgeRecord(edge_id=edge_id), None


_PARSERS = {
    "STATEMENTS": _parse_statement,
    "NODES": _parse_node,
    "RELATIONS": _parse_relation,
    "EDGES": _parse_edge,
}


def parse_structured_output(grammar_id: str, response: str) -> tuple[list, list[Diagnostic]]:
    """Parse a provider response under the named grammar.

    Returns (records, diagnostics). The two lists partition the response's
    lines: len(records) + len(diagnostics) == len(response.splitlines()).
    Malformed content is data here, never an exception.
    """
    try:
        parser = _PARSERS[grammar_id]
    except KeyError:
        raise ValueError(f"unknown grammar id {grammar_id!r}") from None
    records: list = []
    diagnostics: list[Diagnostic] = []
    for lineno, line in enumerate(response.splitlines(), start=1):
        record, diagnostic = parser(lineno, line)
        if record is not None:
            records.append(record)
        else:
            diagnostics.append(diagnostic)
    return records, diagnostics
