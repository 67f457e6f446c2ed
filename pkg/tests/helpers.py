"""Shared test machinery: random instances and brute-force oracles.

The oracles re-derive every quantity with naive loops straight from the
primitive inputs (graph dicts, mappings, response records) so they stay
independent of the library code paths they check.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from trajkg.assessments import Assessment, EdgeMapping, Phase, Question
from trajkg.extraction import RawNode, RawRelation
from trajkg.graph import build_graph
from trajkg.taxonomy import EdgeKind, NodeKind
from trajkg.trajectory import ResponseRecord, build_snapshot, build_timeline


@dataclass
class Instance:
    graph: object
    assessments: list
    mappings: dict  # assessment_id -> [EdgeMapping]
    responses: list
    roster: list
    snapshots: dict  # student_id -> {assessment_id: TrajectorySnapshot}
    timelines: dict  # student_id -> TrajectoryTimeline


def make_path_graph(total_nodes: int, path_length: int):
    """total_nodes nodes n1..nN; edges e_i joining n_i -> n_(i+1), i <= path_length.

    Edge e_i touches exactly nodes {n_i, n_(i+1)}, so a mapping over edges
    e_a..e_b covers exactly nodes n_a..n_(b+1); nodes beyond the path stay
    isolated. Handy for building fixtures with exact coverage counts.
    """
    raw_nodes = [
        RawNode(label=f"topic {i:04d}", kind=NodeKind.OBJECT, source_stmt_ids=(f"st{i}",))
        for i in range(1, total_nodes + 1)
    ]
    raw_relations = [
        RawRelation(
            src_label=f"topic {i:04d}",
            dst_label=f"topic {i + 1:04d}",
            relation_label=f"leads to {i:04d}",
            kind=EdgeKind.SEMANTIC,
            source_stmt_ids=(f"st{i}",),
        )
        for i in range(1, path_length + 1)
    ]
    graph, diagnostics = build_graph(raw_nodes, raw_relations)
    assert not diagnostics
    return graph


def make_graph(rng: random.Random, max_nodes: int = 50):
    node_count = rng.randint(2, max_nodes)
    raw_nodes = []
    for i in range(node_count):
        kind = NodeKind.EVENT if rng.random() < 0.3 else NodeKind.OBJECT
        raw_nodes.append(
            RawNode(label=f"concept {i:03d}", kind=kind, source_stmt_ids=(f"st{i}",))
        )
    max_edges = min(120, node_count * (node_count - 1))
    edge_count = rng.randint(1, max(1, max_edges // 2))
    raw_relations = []
    for j in range(edge_count):
        src, dst = rng.sample(range(node_count), 2)
        raw_relations.append(
            RawRelation(
                src_label=f"concept {src:03d}",
                dst_label=f"concept {dst:03d}",
                relation_label=f"links {j:03d}",
                kind=EdgeKind.SEMANTIC,
                source_stmt_ids=(f"st{j}",),
            )
        )
    graph, diagnostics = build_graph(raw_nodes, raw_relations)
    assert not diagnostics
    return graph


def make_instance(seed: int, max_nodes: int = 50, max_students: int = 20, max_assessments: int = 5):
    rng = random.Random(seed)
    graph = make_graph(rng, max_nodes=max_nodes)
    edge_ids = sorted(graph.edges)

    assessments = []
    mappings: dict = {}
    for a in range(rng.randint(1, max_assessments)):
        assessment_id = f"a{a + 1}"
        questions = []
        assessment_mappings = []
        for q in range(rng.randint(1, 6)):
            question_id = f"{assessment_id}q{q + 1}"
            questions.append(
                Question(
                    question_id=question_id,
                    stem=f"question {question_id}",
                    options=("alpha", "beta", "gamma", "delta"),
                    correct_index=rng.randint(0, 3),
                )
            )
            if rng.random() < 0.15:
                assessment_mappings.append(
                    EdgeMapping(
                        question_id=question_id,
                        edge_ids=frozenset(),
                        method="lexical",
                        confidence=0.0,
                        unmapped=True,
                    )
                )
            else:
                chosen = rng.sample(edge_ids, min(len(edge_ids), rng.randint(1, 3)))
                assessment_mappings.append(
                    EdgeMapping(
                        question_id=question_id,
                        edge_ids=frozenset(chosen),
                        method="lexical",
                        confidence=1.0,
                    )
                )
        assessments.append(
            Assessment(
                assessment_id=assessment_id,
                phase=Phase(kind="quiz", number=a + 1),
                order_index=a + 1,
                questions=tuple(questions),
            )
        )
        mappings[assessment_id] = assessment_mappings

    roster = [f"s{i + 1:02d}" for i in range(rng.randint(1, max_students))]
    responses = []
    for student_id in roster:
        for assessment in assessments:
            if rng.random() < 0.15:
                continue  # absent from this assessment
            for question in assessment.questions:
                responses.append(
                    ResponseRecord(
                        student_id=student_id,
                        assessment_id=assessment.assessment_id,
                        question_id=question.question_id,
                        chosen_index=(chosen := rng.randint(0, 3)),
                        is_correct=chosen == question.correct_index,
                    )
                )

    snapshots = {}
    timelines = {}
    for student_id in roster:
        per_assessment = {}
        ordered_snapshots = []
        for assessment in assessments:
            snapshot, _ = build_snapshot(
                student_id, assessment, mappings[assessment.assessment_id], responses, graph
            )
            per_assessment[assessment.assessment_id] = snapshot
            ordered_snapshots.append(snapshot)
        snapshots[student_id] = per_assessment
        timelines[student_id] = build_timeline(student_id, ordered_snapshots, assessments)

    return Instance(
        graph=graph,
        assessments=assessments,
        mappings=mappings,
        responses=responses,
        roster=roster,
        snapshots=snapshots,
        timelines=timelines,
    )


# --- brute-force oracles -------------------------------------------------


def oracle_edge_endpoints(graph, edge_ids):
    nodes = set()
    for edge in graph.edges.values():
        if edge.id in set(edge_ids):
            nodes.add(edge.src)
            nodes.add(edge.dst)
    return nodes


def oracle_coverage_nodes(graph, mappings):
    edge_ids = set()
    for mapping in mappings:
        for edge_id in mapping.edge_ids:
            edge_ids.add(edge_id)
    return oracle_edge_endpoints(graph, edge_ids)


def oracle_overlap(nodes_a, nodes_b):
    intersection = 0
    for node in nodes_a:
        if node in nodes_b:
            intersection += 1
    union = len(set(list(nodes_a) + list(nodes_b)))
    return {
        "intersection": intersection,
        "jaccard": intersection / union if union else 0.0,
        "containment_a_in_b": intersection / len(nodes_a) if nodes_a else 0.0,
        "containment_b_in_a": intersection / len(nodes_b) if nodes_b else 0.0,
    }


def oracle_mastered_edges(mappings, responses, student_id, assessment_id):
    by_question = {m.question_id: m for m in mappings}
    edges = set()
    for record in responses:
        if record.student_id != student_id or record.assessment_id != assessment_id:
            continue
        if not record.is_correct:
            continue
        mapping = by_question.get(record.question_id)
        if mapping is None:
            continue
        for edge_id in mapping.edge_ids:
            edges.add(edge_id)
    return edges


def oracle_cumulative_nodes(instance, student_id):
    """Cumulative mastered node sets per assessment, re-derived from scratch."""
    ordered = sorted(instance.assessments, key=lambda a: a.order_index)
    cumulative = []
    running: set = set()
    for assessment in ordered:
        edges = oracle_mastered_edges(
            instance.mappings[assessment.assessment_id],
            instance.responses,
            student_id,
            assessment.assessment_id,
        )
        running = running | oracle_edge_endpoints(instance.graph, edges)
        cumulative.append(set(running))
    return cumulative


def oracle_class_profile(instance, assessment_id):
    """Per-node mastery fractions over the full roster."""
    fractions = {}
    for node_id in instance.graph.nodes:
        count = 0
        for student_id in instance.roster:
            edges = oracle_mastered_edges(
                instance.mappings[assessment_id], instance.responses, student_id, assessment_id
            )
            if node_id in oracle_edge_endpoints(instance.graph, edges):
                count += 1
        fractions[node_id] = count / len(instance.roster)
    return fractions


def oracle_bottlenecks(instance, min_support):
    """Naive recomputation of per-node wrong-rate gaps."""
    ordered = sorted(instance.assessments, key=lambda a: a.order_index)
    results = {}
    for node_id in instance.graph.nodes:
        wrong_un = total_un = wrong_ma = total_ma = 0
        for record in instance.responses:
            assessment = next(
                (a for a in ordered if a.assessment_id == record.assessment_id), None
            )
            if assessment is None:
                continue
            mapping = next(
                (
                    m
                    for m in instance.mappings[assessment.assessment_id]
                    if m.question_id == record.question_id
                ),
                None,
            )
            if mapping is None:
                continue
            touched = oracle_edge_endpoints(instance.graph, mapping.edge_ids)
            if node_id not in touched:
                continue
            mastered_before: set = set()
            for earlier in ordered:
                if earlier.order_index >= assessment.order_index:
                    break
                edges = oracle_mastered_edges(
                    instance.mappings[earlier.assessment_id],
                    instance.responses,
                    record.student_id,
                    earlier.assessment_id,
                )
                mastered_before |= oracle_edge_endpoints(instance.graph, edges)
            if node_id in mastered_before:
                total_ma += 1
                if not record.is_correct:
                    wrong_ma += 1
            else:
                total_un += 1
                if not record.is_correct:
                    wrong_un += 1
        if total_un < min_support or total_ma < min_support:
            results[node_id] = None
        else:
            results[node_id] = wrong_un / total_un - wrong_ma / total_ma
    return results


def oracle_class_coverage(instance, theta_class):
    """Cumulative class coverage fractions per assessment."""
    import math

    ordered = sorted(instance.assessments, key=lambda a: a.order_index)
    threshold = math.ceil(theta_class * len(instance.roster))
    node_count = instance.graph.node_count
    entries = []
    for position, _assessment in enumerate(ordered):
        majority = 0
        any_student = 0
        for node_id in instance.graph.nodes:
            masters = 0
            for student_id in instance.roster:
                if node_id in oracle_cumulative_nodes(instance, student_id)[position]:
                    masters += 1
            if masters >= threshold:
                majority += 1
            if masters >= 1:
                any_student += 1
        entries.append((majority / node_count, any_student / node_count))
    return entries
