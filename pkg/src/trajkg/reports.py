"""Report rendering: machine JSON and human Markdown with identical numbers.

Every renderer returns (payload, markdown). The Markdown embeds numbers via
the JSON encoder so both formats carry byte-identical values. Student
comparison also renders a DOT overlay: yellow for mastered nodes, green for
nodes the student lags the class on, red for the remaining course.
"""

from __future__ import annotations

import json

from .analytics import percent_display
from .graph import export_dot

MASTERED_COLOR = "#ffd700"
LAGGING_COLOR = "#2ca02c"
REMAINING_COLOR = "#d62728"


def _fmt(value) -> str:
    return json.dumps(value)


def _table(headers: list, rows: list) -> list:
    lines = ["| " + " | ".join(headers) + " |", "|" + "|".join(" --- " for _ in headers) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(str(cell) for cell in row) + " |")
    return lines


def render_coverage(coverage_reports: list, assessments_by_id: dict) -> tuple[dict, str]:
    entries = []
    for report in coverage_reports:
        assessment = assessments_by_id[report.assessment_id]
        entries.append(
            {
                "assessment_id": report.assessment_id,
                "phase": str(assessment.phase),
                "order_index": assessment.order_index,
                "covered_node_count": len(report.covered_nodes),
                "exam_coverage_fraction": report.coverage_fraction,
                "exam_coverage_percent": report.percent,
            }
        )
    payload = {
        "report": "coverage",
        "graph_node_count": coverage_reports[0].graph_node_count if coverage_reports else 0,
        "assessments": entries,
    }

    lines = ["# ExamCoverage by assessment", ""]
    lines += _table(
        ["assessment", "phase", "covered nodes", "graph nodes", "ExamCoverage %"],
        [
            [
                e["assessment_id"],
                e["phase"],
                _fmt(e["covered_node_count"]),
                _fmt(payload["graph_node_count"]),
                _fmt(e["exam_coverage_percent"]),
            ]
            for e in entries
        ],
    )
    lines.append("")
    lines.append(
        "ExamCoverage counts the nodes touched by each assessment's mapped edges, "
        "independent of student answers."
    )
    return payload, "\n".join(lines) + "\n"


def render_bias(overlaps: list, warning) -> tuple[dict, str]:
    payload = {
        "report": "bias",
        "overlaps": [
            {
                "assessment_a": o.assessment_a,
                "assessment_b": o.assessment_b,
                "intersection_size": o.intersection_size,
                "jaccard": o.jaccard,
                "containment_a_in_b": o.containment_a_in_b,
                "containment_b_in_a": o.containment_b_in_a,
            }
            for o in overlaps
        ],
        "warning": {
            "triggered": warning.triggered,
            "evidence": [
                {"pair": list(pair), "containment": containment}
                for pair, containment in warning.evidence
            ],
            "union_exam_coverage_fraction": warning.union_coverage_fraction,
            "union_exam_coverage_percent": percent_display(warning.union_coverage_fraction),
            "theta_overlap": warning.theta_overlap,
            "theta_floor": warning.theta_floor,
        },
    }

    lines = ["# Selective-attention bias check", ""]
    lines += _table(
        ["pair", "intersection", "jaccard", "containment a in b", "containment b in a"],
        [
            [
                f"{o.assessment_a} / {o.assessment_b}",
                _fmt(o.intersection_size),
                _fmt(o.jaccard),
                _fmt(o.containment_a_in_b),
                _fmt(o.containment_b_in_a),
            ]
            for o in overlaps
        ],
    )
    lines.append("")
    verdict = "TRIGGERED" if warning.triggered else "not triggered"
    lines.append(
        f"Warning {verdict}: union ExamCoverage {_fmt(payload['warning']['union_exam_coverage_percent'])}% "
        f"with {len(warning.evidence)} containment pair(s) at or above "
        f"{_fmt(warning.theta_overlap)} (floor {_fmt(warning.theta_floor)})."
    )
    return payload, "\n".join(lines) + "\n"


def render_student(comparisons: list) -> tuple[dict, str]:
    entries = []
    for comparison in comparisons:
        class_mean = comparison.class_mean_coverage_fraction
        entries.append(
            {
                "assessment_id": comparison.assessment_id,
                "mastery_coverage_fraction": comparison.student_coverage_fraction,
                "mastery_coverage_percent": comparison.student_coverage_percent,
                "class_mean_mastery_coverage_fraction": class_mean,
                "class_mean_mastery_coverage_percent": (
                    percent_display(class_mean) if class_mean is not None else None
                ),
                "mastered": sorted(comparison.mastered),
                "lagging": sorted(comparison.lagging),
                "remaining": sorted(comparison.remaining),
            }
        )
    student_id = comparisons[0].student_id if comparisons else ""
    payload = {"report": "student", "student_id": student_id, "assessments": entries}

    lines = [f"# Student {student_id}: MasteryCoverage vs class", ""]
    lines += _table(
        ["assessment", "MasteryCoverage %", "class mean %", "mastered", "lagging", "remaining"],
        [
            [
                e["assessment_id"],
                _fmt(e["mastery_coverage_percent"]),
                _fmt(e["class_mean_mastery_coverage_percent"]),
                _fmt(len(e["mastered"])),
                _fmt(len(e["lagging"])),
                _fmt(len(e["remaining"])),
            ]
            for e in entries
        ],
    )
    lines.append("")
    lines.append(
        "MasteryCoverage is the share of the assessment's covered nodes the student "
        "mastered. Lagging nodes are mastered by most of the class but not by the student."
    )
    return payload, "\n".join(lines) + "\n"


def student_overlay_dot(graph, comparison) -> str:
    overlay = {}
    for node_id in comparison.mastered:
        overlay[node_id] = MASTERED_COLOR
    for node_id in comparison.lagging:
        overlay[node_id] = LAGGING_COLOR
    for node_id in comparison.remaining:
        overlay[node_id] = REMAINING_COLOR
    return export_dot(graph, overlay=overlay)


def render_class(profiles: list, timeline_entries: list, theta_class: float) -> tuple[dict, str]:
    payload = {
        "report": "class",
        "roster_size": profiles[0].roster_size if profiles else 0,
        "assessments": [
            {
                "assessment_id": p.assessment_id,
                "mean_mastery_coverage_fraction": p.mean_mastery_coverage,
                "mean_graph_coverage_fraction": p.mean_graph_coverage,
                "node_mastery_fraction": {
                    node_id: p.mastery_fraction[node_id] for node_id in sorted(p.mastery_fraction)
                },
            }
            for p in profiles
        ],
        "coverage_timeline": [
            {
                "assessment_id": e.assessment_id,
                "majority_fraction": e.majority_fraction,
                "any_student_fraction": e.any_student_fraction,
                "majority_threshold": e.majority_threshold,
                "theta_class": theta_class,
            }
            for e in timeline_entries
        ],
    }

    lines = ["# Class profile", ""]
    lines += _table(
        ["assessment", "class mean MasteryCoverage", "class mean graph coverage"],
        [
            [
                p.assessment_id,
                _fmt(p.mean_mastery_coverage),
                _fmt(p.mean_graph_coverage),
            ]
            for p in profiles
        ],
    )
    lines.append("")
    lines.append("## Cumulative class coverage")
    lines.append("")
    lines += _table(
        ["assessment", "majority coverage", "any-student coverage", "majority threshold"],
        [
            [
                e.assessment_id,
                _fmt(e.majority_fraction),
                _fmt(e.any_student_fraction),
                _fmt(e.majority_threshold),
            ]
            for e in timeline_entries
        ],
    )
    return payload, "\n".join(lines) + "\n"


def render_groups(stats: list) -> tuple[dict, str]:
    payload = {
        "report": "groups",
        "k": len(stats),
        "groups": [
            {
                "group_index": g.group_index,
                "student_ids": list(g.student_ids),
                "min_score": g.min_score,
                "max_score": g.max_score,
                "per_assessment": [
                    {
                        "assessment_id": assessment_id,
                        "mean_coverage_fraction": mean,
                        "min_coverage_fraction": minimum,
                        "max_coverage_fraction": maximum,
                    }
                    for assessment_id, mean, minimum, maximum in g.per_assessment
                ],
            }
            for g in stats
        ],
    }

    lines = ["# Score groups: cumulative coverage", ""]
    rows = []
    for g in stats:
        for assessment_id, mean, minimum, maximum in g.per_assessment:
            rows.append(
                [
                    _fmt(g.group_index),
                    f"{g.min_score}..{g.max_score}",
                    assessment_id,
                    _fmt(mean),
                    _fmt(minimum),
                    _fmt(maximum),
                ]
            )
    lines += _table(["group", "score range", "assessment", "mean", "min", "max"], rows)
    return payload, "\n".join(lines) + "\n"


def render_bottlenecks(report, graph) -> tuple[dict, str]:
    payload = {
        "report": "bottlenecks",
        "min_support": report.min_support,
        "scored": [
            {
                "node_id": nb.node_id,
                "label": graph.nodes[nb.node_id].label,
                "score": nb.score,
                "wrong_rate_unmastered": nb.wrong_rate_unmastered,
                "wrong_rate_mastered": nb.wrong_rate_mastered,
                "support_unmastered": nb.support_unmastered,
                "support_mastered": nb.support_mastered,
            }
            for nb in report.scored
        ],
        "insufficient_data": [
            {"node_id": node_id, "support_unmastered": su, "support_mastered": sm}
            for node_id, su, sm in report.insufficient
        ],
    }

    lines = ["# Learning bottlenecks", ""]
    lines += _table(
        ["node", "label", "score", "wrong rate (unmastered)", "wrong rate (mastered)", "support"],
        [
            [
                nb.node_id,
                graph.nodes[nb.node_id].label,
                _fmt(nb.score),
                _fmt(nb.wrong_rate_unmastered),
                _fmt(nb.wrong_rate_mastered),
                f"{nb.support_unmastered}/{nb.support_mastered}",
            ]
            for nb in report.scored
        ],
    )
    lines.append("")
    lines.append(
        f"{len(report.insufficient)} node(s) lacked {_fmt(report.min_support)} responses "
        "on one side and were not scored."
    )
    return payload, "\n".join(lines) + "\n"


def render_comprehensiveness(report) -> tuple[dict, str]:
    payload = {
        "report": "comprehensiveness",
        "graph_node_count": report.graph_node_count,
        "union_covered_count": len(report.union_covered),
        "union_exam_coverage_fraction": report.union_coverage_fraction,
        "union_exam_coverage_percent": report.percent,
        "uncovered_node_ids": list(report.uncovered_node_ids),
    }
    lines = ["# Test comprehensiveness", ""]
    lines.append(
        f"All assessments together touch {_fmt(payload['union_covered_count'])} of "
        f"{_fmt(report.graph_node_count)} nodes "
        f"({_fmt(report.percent)}% union ExamCoverage)."
    )
    lines.append("")
    lines.append(f"{len(report.uncovered_node_ids)} node(s) are never tested:")
    lines.append("")
    for node_id in report.uncovered_node_ids:
        lines.append(f"- {node_id}")
    return payload, "\n".join(lines) + "\n"
