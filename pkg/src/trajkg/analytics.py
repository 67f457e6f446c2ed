"""Instructor-facing analytics over the graph, mappings, and trajectories.

Two coverage notions are deliberately distinct and labeled everywhere:

* ExamCoverage: fraction of graph nodes touched by an assessment's mapped
  edges, independent of student answers (what the exam tests).
* MasteryCoverage: fraction of an assessment's covered nodes a student has
  mastered (what the student knows).

All functions are pure over immutable inputs. Internal arithmetic stays in
double precision; rounding happens only in ``percent_display``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .errors import InputError


def percent_display(fraction: float) -> float:
    """fraction*100 rounded half-up to one decimal, for human-facing output."""
    percent = Decimal(repr(float(fraction))) * Decimal(100)
    return float(percent.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


# --- exam coverage ----------------------------------------------------------


@dataclass(frozen=True)
class CoverageReport:
    assessment_id: str
    covered_nodes: frozenset[str]
    graph_node_count: int

    @property
    def coverage_fraction(self) -> float:
        return len(self.covered_nodes) / self.graph_node_count

    @property
    def percent(self) -> float:
        return percent_display(self.coverage_fraction)


def assessment_coverage(graph, mappings: list, assessment_id: str) -> CoverageReport:
    """ExamCoverage: endpoints of every edge any question maps to.

    Correctness-independent by design; this measures what the assessment
    tests, not what students know. Unmapped questions contribute nothing.
    """
    if graph.node_count == 0:
        raise InputError("coverage is undefined on an empty graph")
    edge_ids: set[str] = set()
    for mapping in mappings:
        edge_ids.update(mapping.edge_ids)
    missing = sorted(eid for eid in edge_ids if eid not in graph.edges)
    if missing:
        raise InputError(f"mappings reference edges absent from the graph: {missing}")
    return CoverageReport(
        assessment_id=assessment_id,
        covered_nodes=frozenset(graph.edge_endpoints(edge_ids)),
        graph_node_count=graph.node_count,
    )


@dataclass(frozen=True)
class OverlapReport:
    assessment_a: str
    assessment_b: str
    intersection_size: int
    jaccard: float
    containment_a_in_b: float
    containment_b_in_a: float


def coverage_overlap(report_a: CoverageReport, report_b: CoverageReport) -> OverlapReport:
    if report_a.graph_node_count != report_b.graph_node_count:
        raise InputError("overlap requires coverage reports from the same graph")
    a, b = report_a.covered_nodes, report_b.covered_nodes
    intersection = len(a & b)
    union = len(a | b)
    return OverlapReport(
        assessment_a=report_a.assessment_id,
        assessment_b=report_b.assessment_id,
        intersection_size=intersection,
        jaccard=intersection / union if union else 0.0,
        containment_a_in_b=intersection / len(a) if a else 0.0,
        containment_b_in_a=intersection / len(b) if b else 0.0,
    )


@dataclass(frozen=True)
class BiasWarning:
    """Selective-attention alert: assessments that keep re-testing the same
    narrow region while most of the course graph stays untested."""

    triggered: bool
    evidence: tuple  # ((assessment_a, assessment_b), containment_a_in_b) pairs
    union_coverage_fraction: float
    theta_overlap: float
    theta_floor: float


def bias_warning(
    coverage_reports: list,
    overlap_reports: list,
    theta_overlap: float = 0.6,
    theta_floor: float = 0.2,
) -> BiasWarning:
    if len(coverage_reports) < 2:
        raise InputError("bias warning needs at least two assessments")
    node_count = coverage_reports[0].graph_node_count
    if any(r.graph_node_count != node_count for r in coverage_reports):
        raise InputError("bias warning requires coverage reports from the same graph")

    union_nodes: set[str] = set()
    for report in coverage_reports:
        union_nodes.update(report.covered_nodes)
    union_fraction = len(union_nodes) / node_count

    evidence = []
    for overlap in overlap_reports:
        if overlap.containment_a_in_b >= theta_overlap:
            evidence.append(
                ((overlap.assessment_a, overlap.assessment_b), overlap.containment_a_in_b)
            )
        if overlap.containment_b_in_a >= theta_overlap:
            evidence.append(
                ((overlap.assessment_b, overlap.assessment_a), overlap.containment_b_in_a)
            )
    triggered = bool(evidence) and union_fraction < theta_floor
    return BiasWarning(
        triggered=triggered,
        evidence=tuple(evidence),
        union_coverage_fraction=union_fraction,
        theta_overlap=theta_overlap,
        theta_floor=theta_floor,
    )


# --- class profile and student comparison -----------------------------------


@dataclass(frozen=True)
class ClassProfile:
    """Per-node mastery fractions plus class-average coverage.

    The class average is computed under both readings: mean of per-student
    MasteryCoverage over the assessment's covered nodes, and mean of
    per-student graph-wide coverage. Denominators always use the full
    roster, absentees included.
    """

    assessment_id: str
    roster_size: int
    mastery_fraction: dict
    mean_mastery_coverage: float | None
    mean_graph_coverage: float


def class_profile(graph, snapshots: dict, roster: list, coverage: CoverageReport | None = None) -> ClassProfile:
    if not roster:
        raise InputError("class profile requires a non-empty roster")
    roster_set = set(roster)
    foreign = sorted(set(snapshots) - roster_set)
    if foreign:
        raise InputError(f"snapshots include students missing from the roster: {foreign}")
    assessment_ids = {s.assessment_id for s in snapshots.values()}
    if len(assessment_ids) > 1:
        raise InputError(f"snapshots span multiple assessments: {sorted(assessment_ids)}")
    assessment_id = next(iter(assessment_ids)) if assessment_ids else (
        coverage.assessment_id if coverage else ""
    )
    if coverage is not None and assessment_ids and coverage.assessment_id not in assessment_ids:
        raise InputError(
            f"coverage report is for {coverage.assessment_id!r}, snapshots for {assessment_id!r}"
        )

    counts = {node_id: 0 for node_id in graph.nodes}
    for snapshot in snapshots.values():
        for node_id in snapshot.mastered_nodes:
            counts[node_id] += 1
    roster_size = len(roster_set)
    mastery_fraction = {node_id: count / roster_size for node_id, count in counts.items()}

    def student_nodes(student_id: str) -> frozenset:
        snapshot = snapshots.get(student_id)
        return snapshot.mastered_nodes if snapshot else frozenset()

    mean_mastery = None
    if coverage is not None:
        if not coverage.covered_nodes:
            raise InputError("class mean MasteryCoverage is undefined: assessment covers no nodes")
        covered = coverage.covered_nodes
        mean_mastery = sum(
            len(student_nodes(s) & covered) / len(covered) for s in roster_set
        ) / roster_size
    mean_graph = sum(len(student_nodes(s)) for s in roster_set) / (roster_size * graph.node_count)

    return ClassProfile(
        assessment_id=assessment_id,
        roster_size=roster_size,
        mastery_fraction=mastery_fraction,
        mean_mastery_coverage=mean_mastery,
        mean_graph_coverage=mean_graph,
    )


@dataclass(frozen=True)
class StudentComparison:
    """Student-vs-class partition of the whole node set.

    mastered: nodes the student demonstrated; lagging: nodes most of the
    class mastered but the student did not; remaining: the rest of the
    course. The three sets always partition the graph's nodes.
    """

    student_id: str
    assessment_id: str
    mastered: frozenset[str]
    lagging: frozenset[str]
    remaining: frozenset[str]
    student_coverage_fraction: float
    class_mean_coverage_fraction: float | None

    @property
    def student_coverage_percent(self) -> float:
        return percent_display(self.student_coverage_fraction)


def student_comparison(
    graph,
    snapshot,
    profile: ClassProfile,
    coverage: CoverageReport,
    theta_lag: float = 0.5,
) -> StudentComparison:
    """MasteryCoverage and the mastered/lagging/remaining node partition."""
    if snapshot.assessment_id != coverage.assessment_id:
        raise InputError(
            f"snapshot is for {snapshot.assessment_id!r}, coverage for {coverage.assessment_id!r}"
        )
    if profile.assessment_id and profile.assessment_id != coverage.assessment_id:
        raise InputError(
            f"class profile is for {profile.assessment_id!r}, coverage for {coverage.assessment_id!r}"
        )
    if not coverage.covered_nodes:
        raise InputError(
            f"MasteryCoverage is undefined: assessment {coverage.assessment_id!r} covers no nodes"
        )

    mastered = frozenset(snapshot.mastered_nodes)
    lagging = frozenset(
        node_id
        for node_id, fraction in profile.mastery_fraction.items()
        if fraction >= theta_lag and node_id not in mastered
    )
    remaining = frozenset(graph.nodes) - mastered - lagging
    covered = coverage.covered_nodes
    return StudentComparison(
        student_id=snapshot.student_id,
        assessment_id=snapshot.assessment_id,
        mastered=mastered,
        lagging=lagging,
        remaining=remaining,
        student_coverage_fraction=len(mastered & covered) / len(covered),
        class_mean_coverage_fraction=profile.mean_mastery_coverage,
    )


# --- score groups ------------------------------------------------------------


@dataclass(frozen=True)
class GroupCoverageStats:
    group_index: int
    student_ids: tuple[str, ...]
    min_score: int
    max_score: int
    per_assessment: tuple  # (assessment_id, mean, minimum, maximum) fractions


def total_scores(responses: list) -> dict:
    """One point per correct answer, totalled across every assessment."""
    scores: dict[str, int] = {}
    for record in responses:
        scores.setdefault(record.student_id, 0)
        if record.is_correct:
            scores[record.student_id] += 1
    return scores


def score_groups(scores: dict, k: int, timelines: dict, graph) -> list[GroupCoverageStats]:
    """Quantile groups by total score with per-group cumulative coverage.

    Students are ordered by (score, student_id) so tie handling is
    deterministic; group sizes differ by at most one, lower scores first.
    """
    if k < 2:
        raise InputError(f"group count must be at least 2, got {k}")
    students = sorted(scores, key=lambda s: (scores[s], s))
    if len(students) < k:
        raise InputError(f"cannot split {len(students)} students into {k} groups")
    missing = sorted(s for s in students if s not in timelines)
    if missing:
        raise InputError(f"students missing a timeline: {missing}")

    sequences = {tuple(t.assessment_ids) for t in timelines.values()}
    if len(sequences) != 1:
        raise InputError("timelines disagree on the assessment sequence")
    assessment_ids = next(iter(sequences))

    base, extra = divmod(len(students), k)
    groups: list[list[str]] = []
    start = 0
    for index in range(k):
        size = base + (1 if index < extra else 0)
        groups.append(students[start : start + size])
        start += size

    node_count = graph.node_count
    stats = []
    for index, members in enumerate(groups):
        per_assessment = []
        for position, assessment_id in enumerate(assessment_ids):
            fractions = [
                len(timelines[s].cumulative_nodes[position]) / node_count for s in members
            ]
            per_assessment.append(
                (
                    assessment_id,
                    sum(fractions) / len(fractions),
                    min(fractions),
                    max(fractions),
                )
            )
        stats.append(
            GroupCoverageStats(
                group_index=index,
                student_ids=tuple(members),
                min_score=min(scores[s] for s in members),
                max_score=max(scores[s] for s in members),
                per_assessment=tuple(per_assessment),
            )
        )
    return stats


# --- bottlenecks --------------------------------------------------------------


@dataclass(frozen=True)
class NodeBottleneck:
    node_id: str
    score: float
    wrong_rate_unmastered: float
    wrong_rate_mastered: float
    support_unmastered: int
    support_mastered: int


@dataclass(frozen=True)
class BottleneckReport:
    """Per-node gap between wrong-rates of students who had not yet mastered
    the node and those who had; high scores mark learning bottlenecks."""

    scored: tuple  # NodeBottleneck, ranked by descending score
    insufficient: tuple  # (node_id, support_unmastered, support_mastered)
    min_support: int


def bottlenecks(
    graph,
    mappings_by_assessment: dict,
    assessments: list,
    snapshots: dict,
    responses: list,
    min_support: int = 5,
) -> BottleneckReport:
    """Rank nodes by how much not having mastered them raises wrong-rates.

    For every response to a question whose mapping touches a node, the
    response counts on the mastered side if the student's cumulative
    mastery from strictly earlier assessments already contained the node,
    else on the unmastered side. Nodes lacking min_support on either side
    are reported as insufficient data instead of scored.
    """
    ordered = sorted(assessments, key=lambda a: a.order_index)
    order_position = {a.assessment_id: i for i, a in enumerate(ordered)}

    question_nodes: dict[tuple[str, str], frozenset] = {}
    for assessment in ordered:
        for mapping in mappings_by_assessment.get(assessment.assessment_id, []):
            touched = graph.edge_endpoints(mapping.edge_ids)
            question_nodes[(assessment.assessment_id, mapping.question_id)] = frozenset(touched)

    # Cumulative mastery per student from strictly earlier assessments.
    mastered_before: dict[tuple[str, str], frozenset] = {}
    for student_id, per_assessment in snapshots.items():
        running: frozenset = frozenset()
        for assessment in ordered:
            mastered_before[(student_id, assessment.assessment_id)] = running
            snapshot = per_assessment.get(assessment.assessment_id)
            if snapshot is not None:
                running = running | snapshot.mastered_nodes

    tallies: dict[str, list[int]] = {
        node_id: [0, 0, 0, 0] for node_id in graph.nodes
    }  # wrong_un, total_un, wrong_ma, total_ma
    for record in responses:
        if record.assessment_id not in order_position:
            continue
        touched = question_nodes.get((record.assessment_id, record.question_id))
        if not touched:
            continue
        before = mastered_before.get((record.student_id, record.assessment_id), frozenset())
        for node_id in touched:
            tally = tallies[node_id]
            if node_id in before:
                tally[3] += 1
                if not record.is_correct:
                    tally[2] += 1
            else:
                tally[1] += 1
                if not record.is_correct:
                    tally[0] += 1

    scored = []
    insufficient = []
    for node_id in graph.sorted_node_ids():
        wrong_un, total_un, wrong_ma, total_ma = tallies[node_id]
        if total_un < min_support or total_ma < min_support:
            insufficient.append((node_id, total_un, total_ma))
            continue
        rate_un = wrong_un / total_un
        rate_ma = wrong_ma / total_ma
        scored.append(
            NodeBottleneck(
                node_id=node_id,
                score=rate_un - rate_ma,
                wrong_rate_unmastered=rate_un,
                wrong_rate_mastered=rate_ma,
                support_unmastered=total_un,
                support_mastered=total_ma,
            )
        )
    scored.sort(key=lambda nb: (-nb.score, nb.node_id))
    return BottleneckReport(
        scored=tuple(scored), insufficient=tuple(insufficient), min_support=min_support
    )


# --- class coverage timeline and comprehensiveness ----------------------------


@dataclass(frozen=True)
class ClassCoverageEntry:
    assessment_id: str
    majority_fraction: float
    any_student_fraction: float
    majority_threshold: int


def class_coverage_timeline(
    graph, snapshots: dict, assessments: list, roster: list, theta_class: float = 0.5
) -> list[ClassCoverageEntry]:
    """Cumulative class-level coverage per assessment.

    A node counts at an assessment when at least ceil(theta_class * roster)
    students have it in their cumulative mastery by then; the any-student
    variant (threshold one) is emitted alongside.
    """
    if not roster:
        raise InputError("class coverage requires a non-empty roster")
    ordered = sorted(assessments, key=lambda a: a.order_index)
    threshold = math.ceil(theta_class * len(roster))
    node_count = graph.node_count

    cumulative: dict[str, set[str]] = {student_id: set() for student_id in roster}
    entries = []
    for assessment in ordered:
        counts: dict[str, int] = {}
        for student_id in roster:
            snapshot = snapshots.get(student_id, {}).get(assessment.assessment_id)
            if snapshot is not None:
                cumulative[student_id].update(snapshot.mastered_nodes)
            for node_id in cumulative[student_id]:
                counts[node_id] = counts.get(node_id, 0) + 1
        majority = sum(1 for count in counts.values() if count >= threshold)
        any_student = len(counts)
        entries.append(
            ClassCoverageEntry(
                assessment_id=assessment.assessment_id,
                majority_fraction=majority / node_count if node_count else 0.0,
                any_student_fraction=any_student / node_count if node_count else 0.0,
                majority_threshold=threshold,
            )
        )
    return entries


@dataclass(frozen=True)
class ComprehensivenessReport:
    union_covered: frozenset[str]
    graph_node_count: int
    uncovered_node_ids: tuple[str, ...]

    @property
    def union_coverage_fraction(self) -> float:
        return len(self.union_covered) / self.graph_node_count

    @property
    def percent(self) -> float:
        return percent_display(self.union_coverage_fraction)


def comprehensiveness(graph, coverage_reports: list) -> ComprehensivenessReport:
    """Union ExamCoverage across all assessments plus the untested nodes."""
    if not coverage_reports:
        raise InputError("comprehensiveness needs at least one coverage report")
    union: set[str] = set()
    for report in coverage_reports:
        union.update(report.covered_nodes)
    uncovered = [nid for nid in graph.sorted_node_ids() if nid not in union]
    return ComprehensivenessReport(
        union_covered=frozenset(union),
        graph_node_count=graph.node_count,
        uncovered_node_ids=tuple(uncovered),
    )
