"""Per-student mastery snapshots and cumulative trajectory timelines.

A correct answer marks every edge its question maps to; a node is mastered
once it touches at least one mastered edge. Per-assessment snapshots stay
non-cumulative (they feed per-exam statistics); timelines accumulate them
in assessment order, so mastery once demonstrated persists.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .diagnostics import Diagnostic, diag
from .errors import InputError

RESPONSES_HEADER = ("student_id", "assessment_id", "question_id", "chosen_index")


@dataclass(frozen=True)
class ResponseRecord:
    student_id: str
    assessment_id: str
    question_id: str
    chosen_index: int
    is_correct: bool


@dataclass(frozen=True)
class TrajectorySnapshot:
    student_id: str
    assessment_id: str
    mastered_edges: frozenset[str]
    mastered_nodes: frozenset[str]


@dataclass(frozen=True)
class TrajectoryTimeline:
    student_id: str
    assessment_ids: tuple[str, ...]
    order_indexes: tuple[int, ...]
    per_assessment: tuple[TrajectorySnapshot, ...]
    cumulative_edges: tuple[frozenset, ...]
    cumulative_nodes: tuple[frozenset, ...]
    growth: tuple[int, ...]


def record_responses(path, assessments: list) -> list[ResponseRecord]:
    """Load and validate the responses CSV against the question banks."""
    question_index = {}
    for assessment in assessments:
        for question in assessment.questions:
            question_index[(assessment.assessment_id, question.question_id)] = question

    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read responses file {p}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"responses file {p} is not valid UTF-8: {exc}") from exc

    reader = csv.reader(text.splitlines())
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise InputError(f"responses file {p} is empty") from None
    if header != RESPONSES_HEADER:
        raise InputError(
            f"responses file {p} must start with header {','.join(RESPONSES_HEADER)!r}, "
            f"got {','.join(header)!r}"
        )

    records: list[ResponseRecord] = []
    seen: set[tuple[str, str, str]] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 4:
            raise InputError(f"{p}:{lineno}: expected 4 fields, got {len(row)}")
        student_id, assessment_id, question_id, chosen_text = (cell.strip() for cell in row)
        triple = (student_id, assessment_id, question_id)
        if triple in seen:
            raise InputError(f"{p}:{lineno}: duplicate response for {triple}")
        seen.add(triple)
        question = question_index.get((assessment_id, question_id))
        if question is None:
            raise InputError(
                f"{p}:{lineno}: question {question_id!r} not found in assessment {assessment_id!r}"
            )
        try:
            chosen = int(chosen_text)
        except ValueError:
            raise InputError(f"{p}:{lineno}: chosen_index {chosen_text!r} is not an integer") from None
        if not 0 <= chosen < len(question.options):
            raise InputError(
                f"{p}:{lineno}: chosen_index {chosen} out of range for "
                f"{question_id!r} ({len(question.options)} options)"
            )
        records.append(
            ResponseRecord(
                student_id=student_id,
                assessment_id=assessment_id,
                question_id=question_id,
                chosen_index=chosen,
                is_correct=chosen == question.correct_index,
            )
        )
    return records


def build_snapshot(
    student_id: str, assessment, mappings: list, responses: list, graph
) -> tuple[TrajectorySnapshot, list[Diagnostic]]:
    """Snapshot of what one student demonstrated on one assessment.

    Mastered edges are the union of edge sets over correctly answered
    questions; mastered nodes are exactly their endpoints. A student with
    no responses yields an empty snapshot plus a diagnostic, not an error,
    so class denominators stay explicit.
    """
    mapping_by_question = {m.question_id: m for m in mappings}
    diagnostics: list[Diagnostic] = []
    relevant = [
        r
        for r in responses
        if r.student_id == student_id and r.assessment_id == assessment.assessment_id
    ]
    if not relevant:
        diagnostics.append(
            diag(
                "absent-student",
                f"student {student_id!r} has no responses for {assessment.assessment_id!r}",
                student_id,
                assessment.assessment_id,
            )
        )
    mastered_edges: set[str] = set()
    for record in relevant:
        if not record.is_correct:
            continue
        mapping = mapping_by_question.get(record.question_id)
        if mapping is None or mapping.unmapped:
            continue
        mastered_edges.update(mapping.edge_ids)
    mastered_nodes = graph.edge_endpoints(mastered_edges)
    snapshot = TrajectorySnapshot(
        student_id=student_id,
        assessment_id=assessment.assessment_id,
        mastered_edges=frozenset(mastered_edges),
        mastered_nodes=frozenset(mastered_nodes),
    )
    return snapshot, diagnostics


def build_timeline(student_id: str, snapshots: list, assessments: list) -> TrajectoryTimeline:
    """Accumulate ordered per-assessment snapshots into a timeline.

    Snapshots must all belong to the student and follow strictly
    increasing assessment order. Growth entries are node-count deltas
    between consecutive cumulative sets (the first entry counts from zero).
    """
    order_by_id = {a.assessment_id: a.order_index for a in assessments}
    previous_order = None
    for snapshot in snapshots:
        if snapshot.student_id != student_id:
            raise InputError(
                f"snapshot for {snapshot.student_id!r} mixed into timeline of {student_id!r}"
            )
        if snapshot.assessment_id not in order_by_id:
            raise InputError(f"snapshot references unknown assessment {snapshot.assessment_id!r}")
        order = order_by_id[snapshot.assessment_id]
        if previous_order is not None and order <= previous_order:
            raise InputError(
                f"snapshots out of order: {snapshot.assessment_id!r} (order {order}) "
                f"does not follow order {previous_order}"
            )
        previous_order = order

    cumulative_edges: list[frozenset] = []
    cumulative_nodes: list[frozenset] = []
    growth: list[int] = []
    edges: frozenset = frozenset()
    nodes: frozenset = frozenset()
    for snapshot in snapshots:
        edges = edges | snapshot.mastered_edges
        nodes = nodes | snapshot.mastered_nodes
        previous_size = len(cumulative_nodes[-1]) if cumulative_nodes else 0
        cumulative_edges.append(edges)
        cumulative_nodes.append(nodes)
        growth.append(len(nodes) - previous_size)

    return TrajectoryTimeline(
        student_id=student_id,
        assessment_ids=tuple(s.assessment_id for s in snapshots),
        order_indexes=tuple(order_by_id[s.assessment_id] for s in snapshots),
        per_assessment=tuple(snapshots),
        cumulative_edges=tuple(cumulative_edges),
        cumulative_nodes=tuple(cumulative_nodes),
        growth=tuple(growth),
    )


def timeline_to_json(timeline: TrajectoryTimeline, graph) -> str:
    """Per-student timeline document, reporting growth both as node-count
    delta and as coverage-fraction delta (the two readings are labeled)."""
    node_count = graph.node_count
    entries = []
    for i, assessment_id in enumerate(timeline.assessment_ids):
        snapshot = timeline.per_assessment[i]
        fraction = len(timeline.cumulative_nodes[i]) / node_count if node_count else 0.0
        previous = (
            len(timeline.cumulative_nodes[i - 1]) / node_count if i and node_count else 0.0
        )
        entries.append(
            {
                "assessment_id": assessment_id,
                "order_index": timeline.order_indexes[i],
                "mastered_edges": sorted(snapshot.mastered_edges),
                "mastered_nodes": sorted(snapshot.mastered_nodes),
                "cumulative_mastered_edges": sorted(timeline.cumulative_edges[i]),
                "cumulative_mastered_nodes": sorted(timeline.cumulative_nodes[i]),
                "growth_node_count": timeline.growth[i],
                "cumulative_coverage_fraction": fraction,
                "growth_coverage_fraction": fraction - previous,
            }
        )
    document = {"student_id": timeline.student_id, "timeline": entries}
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


# --- response store ---------------------------------------------------------


def responses_to_json(records: list) -> str:
    document = {
        "records": [
            {
                "student_id": r.student_id,
                "assessment_id": r.assessment_id,
                "question_id": r.question_id,
                "chosen_index": r.chosen_index,
                "is_correct": r.is_correct,
            }
            for r in records
        ]
    }
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def write_response_store(records: list, path) -> None:
    Path(path).write_text(responses_to_json(records), encoding="utf-8")


def read_response_store(path) -> list[ResponseRecord]:
    p = Path(path)
    try:
        document = json.loads(p.read_text(encoding="utf-8"))
        return [
            ResponseRecord(
                student_id=entry["student_id"],
                assessment_id=entry["assessment_id"],
                question_id=entry["question_id"],
                chosen_index=int(entry["chosen_index"]),
                is_correct=bool(entry["is_correct"]),
            )
            for entry in document["records"]
        ]
    except OSError as exc:
        raise InputError(f"cannot read response store {p}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"response store {p} is malformed: {exc}") from exc


def roster_from_responses(records: list) -> list[str]:
    """Roster as every student id appearing anywhere in the responses."""
    return sorted({r.student_id for r in records})
