import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trajkg.extraction import RawNode, RawRelation
from trajkg.graph import build_graph
from trajkg.providers import DeterministicProvider
from trajkg.taxonomy import EdgeKind, NodeKind


@pytest.fixture
def provider():
    return DeterministicProvider()


@pytest.fixture
def course_graph():
    """Small hand-checkable graph used across modules.

    Nodes: for loop, sequence, while loop, block (objects);
    condition, branch, merge (events). Edges:
      e1 for loop -iterates-> sequence        (semantic)
      e2 while loop -repeats-> block          (semantic)
      e3 condition -triggers-> branch         (causal)
      e4 branch -reaches-> merge              (sequential)
      e5 for loop -uses-> block               (semantic)
    """
    raw_nodes = [
        RawNode("for loop", NodeKind.OBJECT, ("st1",)),
        RawNode("sequence", NodeKind.OBJECT, ("st1",)),
        RawNode("while loop", NodeKind.OBJECT, ("st2",)),
        RawNode("block", NodeKind.OBJECT, ("st2",)),
        RawNode("condition", NodeKind.EVENT, ("st3",)),
        RawNode("branch", NodeKind.EVENT, ("st3",)),
        RawNode("merge", NodeKind.EVENT, ("st4",)),
    ]
    raw_relations = [
        RawRelation("for loop", "sequence", "iterates", EdgeKind.SEMANTIC, ("st1",)),
        RawRelation("while loop", "block", "repeats", EdgeKind.SEMANTIC, ("st2",)),
        RawRelation("condition", "branch", "triggers", EdgeKind.CAUSAL, ("st3",)),
        RawRelation("branch", "merge", "reaches", EdgeKind.SEQUENTIAL, ("st4",)),
        RawRelation("for loop", "block", "uses", EdgeKind.SEMANTIC, ("st5",)),
    ]
    graph, diagnostics = build_graph(raw_nodes, raw_relations)
    assert not diagnostics
    assert graph.node_count == 7 and graph.edge_count == 5
    return graph
