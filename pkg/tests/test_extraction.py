import pytest

from trajkg.corpus import RefinedStatement
from trajkg.errors import ExtractionError, InputError
from trajkg.extraction import RawNode, extract_nodes, extract_relations
from trajkg.providers import ExtractionProvider
from trajkg.taxonomy import EdgeKind, NodeKind


def _stmt(i, text):
    return RefinedStatement(
        stmt_id=f"d/s1#{i}", doc_id="d", section_id="s1", order_index=i, text=text
    )


class CannedProvider(ExtractionProvider):
    """Replays fixed responses per template id, for filter-path tests."""

    kind = "deterministic"

    def __init__(self, responses):
        super().__init__()
        self.responses = responses

    def _respond(self, template_id, rendered):
        response = self.responses[template_id]
        self._record(template_id, rendered, response, 0)
        return response


class TestExtractNodes:
    def test_triplet_statement_yields_subject_and_object(self, provider):
        statements = [_stmt(0, "for loop | iterates | sequence")]
        nodes, diagnostics = extract_nodes(statements, provider)
        # Hand-applied rule: both endpoints are object-kind, no markers.
        assert [(n.label, n.kind) for n in nodes] == [
            ("for loop", NodeKind.OBJECT),
            ("sequence", NodeKind.OBJECT),
        ]
        assert diagnostics == []

    def test_kind_markers(self, provider):
        statements = [_stmt(0, "lecture @event | held at | campus @place")]
        nodes, _ = extract_nodes(statements, provider)
        assert [(n.label, n.kind) for n in nodes] == [
            ("lecture", NodeKind.EVENT),
            ("campus", NodeKind.PLACE),
        ]

    def test_empty_statement_list_is_a_precondition_error(self, provider):
        with pytest.raises(InputError):
            extract_nodes([], provider)

    def test_duplicates_preserved(self, provider):
        statements = [
            _stmt(0, "loop | does | work"),
            _stmt(1, "loop | needs | work"),
        ]
        nodes, _ = extract_nodes(statements, provider)
        assert [n.label for n in nodes] == ["loop", "work", "loop", "work"]

    def test_source_attribution_points_at_mentioning_statement(self, provider):
        statements = [
            _stmt(0, "alpha | links | beta"),
            _stmt(1, "gamma | links | delta"),
        ]
        nodes, _ = extract_nodes(statements, provider, batch_size=20)
        by_label = {n.label: n.source_stmt_ids for n in nodes}
        assert by_label["alpha"] == ("d/s1#0",)
        assert by_label["delta"] == ("d/s1#1",)

    def test_non_triplet_statements_yield_nothing(self, provider):
        statements = [_stmt(0, "plain prose sentence")]
        nodes, diagnostics = extract_nodes(statements, provider)
        assert nodes == []
        assert diagnostics == []

    def test_all_malformed_batch_raises(self):
        canned = CannedProvider({"EXTRACT_NODES": "garbage\nmore garbage"})
        with pytest.raises(ExtractionError) as excinfo:
            extract_nodes([_stmt(0, "x | y | z")], canned)
        assert len(excinfo.value.diagnostics) == 2

    def test_malformed_lines_skipped_but_good_kept(self):
        canned = CannedProvider({"EXTRACT_NODES": "NODE\tobject\talpha\njunk line"})
        nodes, diagnostics = extract_nodes([_stmt(0, "alpha | is | beta")], canned)
        assert [n.label for n in nodes] == ["alpha"]
        assert len(diagnostics) == 1

    def test_batching_respects_batch_size(self, provider):
        statements = [_stmt(i, f"thing{i} | has | part{i}") for i in range(5)]
        extract_nodes(statements, provider, batch_size=2)
        assert len(provider.exchanges) == 3  # batches of 2, 2, 1


class TestExtractRelations:
    def test_triplet_relation(self, provider):
        statements = [_stmt(0, "for loop | iterates | sequence")]
        nodes, _ = extract_nodes(statements, provider)
        relations, diagnostics = extract_relations(nodes, statements, provider)
        assert len(relations) == 1
        r = relations[0]
        assert (r.src_label, r.relation_label, r.dst_label, r.kind) == (
            "for loop",
            "iterates",
            "sequence",
            EdgeKind.SEMANTIC,
        )
        assert diagnostics == []

    def test_causal_and_sequential_prefixes(self, provider):
        statements = [
            _stmt(0, "rain @event | causes: soaks | flood @event"),
            _stmt(1, "flood @event | then: prompts | cleanup @event"),
        ]
        nodes, _ = extract_nodes(statements, provider)
        relations, _ = extract_relations(nodes, statements, provider)
        assert [r.kind for r in relations] == [EdgeKind.CAUSAL, EdgeKind.SEQUENTIAL]
        assert [r.relation_label for r in relations] == ["soaks", "prompts"]

    def test_event_to_event_sequential_accepted(self, provider):
        statements = [_stmt(0, "start @event | then: leads to | finish @event")]
        nodes, _ = extract_nodes(statements, provider)
        relations, _ = extract_relations(nodes, statements, provider)
        assert relations[0].kind is EdgeKind.SEQUENTIAL

    def test_empty_node_list_is_a_precondition_error(self, provider):
        with pytest.raises(InputError):
            extract_relations([], [_stmt(0, "a | b | c")], provider)

    def test_unknown_endpoint_dropped_with_diagnostic(self):
        canned = CannedProvider(
            {"EXTRACT_RELATIONS": "REL\tsemantic\talpha\tlinks\tghost\nREL\tsemantic\talpha\tlinks\tbeta"}
        )
        nodes = [
            RawNode("alpha", NodeKind.OBJECT, ("st0",)),
            RawNode("beta", NodeKind.OBJECT, ("st0",)),
        ]
        relations, diagnostics = extract_relations(nodes, [_stmt(0, "alpha beta")], canned)
        assert [(r.src_label, r.dst_label) for r in relations] == [("alpha", "beta")]
        assert [d.code for d in diagnostics] == ["unknown-endpoint"]

    def test_raw_self_loop_dropped(self):
        canned = CannedProvider({"EXTRACT_RELATIONS": "REL\tsemantic\talpha\tlikes\talpha"})
        nodes = [RawNode("alpha", NodeKind.OBJECT, ("st0",))]
        relations, diagnostics = extract_relations(nodes, [_stmt(0, "alpha")], canned)
        assert relations == []
        assert [d.code for d in diagnostics] == ["self-loop"]

    def test_causal_between_plain_objects_dropped(self):
        canned = CannedProvider({"EXTRACT_RELATIONS": "REL\tcausal\talpha\tcauses\tbeta"})
        nodes = [
            RawNode("alpha", NodeKind.OBJECT, ("st0",)),
            RawNode("beta", NodeKind.OBJECT, ("st0",)),
        ]
        relations, diagnostics = extract_relations(nodes, [_stmt(0, "alpha beta")], canned)
        assert relations == []
        assert [d.code for d in diagnostics] == ["taxonomy"]

    def test_all_malformed_batch_raises(self):
        canned = CannedProvider({"EXTRACT_RELATIONS": "nonsense"})
        nodes = [RawNode("alpha", NodeKind.OBJECT, ("st0",))]
        with pytest.raises(ExtractionError):
            extract_relations(nodes, [_stmt(0, "alpha")], canned)
