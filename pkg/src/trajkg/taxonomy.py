"""Node and edge taxonomies for the course knowledge graph.

Nodes are either events or one of four general entity subkinds (person,
object, time, place). Edges are semantic verb/preposition links, or
causal/sequential links that must involve at least one event node.
"""

from __future__ import annotations

import enum


class NodeKind(enum.Enum):
    EVENT = "event"
    PERSON = "person"
    OBJECT = "object"
    TIME = "time"
    PLACE = "place"

    @property
    def is_event(self) -> bool:
        return self is NodeKind.EVENT

    @property
    def is_general(self) -> bool:
        return not self.is_event

    @property
    def group(self) -> str:
        """Coarse category: ``event`` or ``general``."""
        return "event" if self.is_event else "general"


class EdgeKind(enum.Enum):
    SEMANTIC = "semantic"
    CAUSAL = "causal"
    SEQUENTIAL = "sequential"

    @property
    def needs_event_endpoint(self) -> bool:
        return self is not EdgeKind.SEMANTIC


_GENERAL_SUBKINDS = {k.value: k for k in NodeKind if k.is_general}

# Tokens the line grammar accepts in a NODE record's kind field. Bare
# subkinds imply the general category; the explicit form is also legal.
NODE_KIND_TOKENS = (
    {"event": NodeKind.EVENT}
    | dict(_GENERAL_SUBKINDS)
    | {f"general:{name}": kind for name, kind in _GENERAL_SUBKINDS.items()}
)

EDGE_KIND_TOKENS = {k.value: k for k in EdgeKind}


def parse_node_kind(token: str) -> NodeKind | None:
    return NODE_KIND_TOKENS.get(token)


def parse_edge_kind(token: str) -> EdgeKind | None:
    return EDGE_KIND_TOKENS.get(token)
