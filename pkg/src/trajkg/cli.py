"""Command-line pipeline: ingest, build-graph, map, record, report, export-dot.

Each stage reads the previous stage's artifact from disk, so analytics can
be re-run without re-invoking the provider. Exit codes: 0 success, 2 input
error, 3 provider error, 4 validation failure.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import analytics, reports
from .assessments import (
    load_question_bank,
    map_assessment,
    read_mappings,
    validate_mappings,
    write_mappings,
)
from .config import build_provider, load_config
from .corpus import load_materials, read_refined_list, refine_corpus, write_refined_list
from .errors import (
    ExtractionError,
    GraphValidationError,
    InputError,
    ProviderError,
    TrajkgError,
)
from .extraction import extract_nodes, extract_relations
from .graph import build_graph, export_dot, load, save, validate
from .trajectory import (
    build_snapshot,
    build_timeline,
    read_response_store,
    record_responses,
    roster_from_responses,
    write_response_store,
)

EXIT_INPUT = 2
EXIT_PROVIDER = 3
EXIT_VALIDATION = 4

REPORT_KINDS = (
    "coverage",
    "bias",
    "student",
    "class",
    "groups",
    "bottlenecks",
    "comprehensiveness",
)


def _stage(func):
    """Map package exceptions onto the documented exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ProviderError, ExtractionError) as exc:
            click.echo(f"provider error: {exc}", err=True)
            sys.exit(EXIT_PROVIDER)
        except GraphValidationError as exc:
            click.echo(f"validation failure: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except InputError as exc:
            click.echo(f"input error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        except TrajkgError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)

    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="TOML config file.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory override.")
@click.option(
    "--format",
    "report_format",
    type=click.Choice(["json", "md", "both"]),
    default=None,
    help="Report format override.",
)
@click.option(
    "--provider",
    "provider_kind",
    type=click.Choice(["remote", "deterministic"]),
    default=None,
    help="Provider override.",
)
@click.pass_context
@_stage
def main(ctx, config_path, out_dir, report_format, provider_kind):
    """Build course knowledge graphs and learning-trajectory analytics."""
    config = load_config(config_path)
    if out_dir is not None:
        config.paths.output_dir = out_dir
    if provider_kind is not None:
        config.provider.kind = provider_kind
    if report_format == "json":
        config.report_formats = ("json",)
    elif report_format == "md":
        config.report_formats = ("md",)
    elif report_format == "both":
        config.report_formats = ("json", "md")
    ctx.obj = config


def _ensure_out(config) -> Path:
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_diagnostics(diagnostics):
    for diagnostic in diagnostics:
        click.echo(f"warning [{diagnostic.code}]: {diagnostic.message}", err=True)


def _write_diagnostics_sidecar(diagnostics, path: Path):
    payload = [d.to_dict() for d in diagnostics]
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


@main.command()
@click.pass_obj
@_stage
def ingest(config):
    """Refine the corpus into the statement list file."""
    corpus_dir = Path(config.paths.corpus_dir)
    if not corpus_dir.is_dir():
        raise InputError(f"corpus directory {corpus_dir} does not exist")
    paths = sorted(corpus_dir.glob("*.txt"))
    if not paths:
        raise InputError(f"corpus directory {corpus_dir} contains no .txt files")
    provider = build_provider(config)
    documents = load_materials(paths)
    statements, diagnostics = refine_corpus(documents, provider, workers=config.provider.workers)
    _ensure_out(config)
    write_refined_list(statements, config.refined_file)
    _echo_diagnostics(diagnostics)
    click.echo(f"wrote {len(statements)} statements to {config.refined_file}")


@main.command("build-graph")
@click.pass_obj
@_stage
def build_graph_cmd(config):
    """Extract nodes and relations, then build and save the graph."""
    statements = read_refined_list(config.refined_file)
    if not statements:
        raise InputError(f"refined list {config.refined_file} is empty; run ingest first")
    provider = build_provider(config)
    batch = config.provider.batch_size
    raw_nodes, node_diags = extract_nodes(statements, provider, batch_size=batch)
    if not raw_nodes:
        raise GraphValidationError("extraction produced zero nodes; nothing to build")
    raw_relations, relation_diags = extract_relations(
        raw_nodes, statements, provider, batch_size=batch
    )
    graph, build_diags = build_graph(raw_nodes, raw_relations)
    problems = validate(graph)
    if problems:
        raise GraphValidationError(
            f"built graph failed validation: {problems[0].message}", diagnostics=problems
        )
    if graph.node_count == 0:
        raise GraphValidationError("built graph has zero nodes")
    out = _ensure_out(config)
    save(graph, config.graph_file)
    diagnostics = node_diags + relation_diags + build_diags
    _write_diagnostics_sidecar(diagnostics, out / "build_diagnostics.json")
    _echo_diagnostics(diagnostics)
    click.echo(
        f"wrote graph with {graph.node_count} nodes / {graph.edge_count} edges to {config.graph_file}"
    )


def _config_banks(config) -> list:
    banks = [Path(p) for p in config.paths.question_banks]
    if not banks:
        raise InputError("no question banks configured (paths.question_banks)")
    return banks


def _load_assessments(config) -> list:
    assessments = [load_question_bank(p) for p in _config_banks(config)]
    orders = [a.order_index for a in assessments]
    if len(set(orders)) != len(orders):
        raise InputError("question banks repeat an order_index")
    return sorted(assessments, key=lambda a: a.order_index)


@main.command("map")
@click.argument("bank", type=click.Path(), required=False)
@click.pass_obj
@_stage
def map_cmd(config, bank):
    """Map question bank(s) onto graph edges; writes one JSONL per assessment."""
    graph = load(config.graph_file)
    bank_paths = [Path(bank)] if bank else _config_banks(config)
    provider = build_provider(config)
    out = _ensure_out(config)
    for bank_path in bank_paths:
        assessment = load_question_bank(bank_path)
        result = map_assessment(
            assessment,
            graph,
            provider,
            tau=config.thresholds.tau,
            workers=config.provider.workers,
        )
        diagnostics, rate = validate_mappings(
            result.mappings, graph, assessment, unmapped_ceiling=config.thresholds.unmapped_ceiling
        )
        _echo_diagnostics(result.diagnostics + diagnostics)
        target = config.mappings_file(assessment.assessment_id)
        write_mappings(result.mappings, target)
        click.echo(
            f"mapped {assessment.assessment_id}: {len(result.mappings)} questions, "
            f"{len(result.unmapped)} unmapped (rate {rate:.3f}) -> {target}"
        )
    del out


@main.command()
@click.argument("responses", type=click.Path(), required=False)
@click.pass_obj
@_stage
def record(config, responses):
    """Validate the responses CSV against the banks and store it."""
    assessments = _load_assessments(config)
    source = Path(responses) if responses else Path(config.paths.responses_file)
    records = record_responses(source, assessments)
    _ensure_out(config)
    write_response_store(records, config.response_store)
    click.echo(f"recorded {len(records)} responses to {config.response_store}")


# --- report assembly ---------------------------------------------------------


def _load_mappings_by_assessment(config, assessments) -> dict:
    mappings = {}
    for assessment in assessments:
        path = config.mappings_file(assessment.assessment_id)
        if not path.exists():
            raise InputError(f"no mappings file {path}; run map first")
        mappings[assessment.assessment_id] = read_mappings(path)
    return mappings


def _load_roster(config, records) -> list:
    roster = set(roster_from_responses(records))
    roster_file = config.paths.roster_file
    if roster_file:
        path = Path(roster_file)
        try:
            listed = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
        except OSError as exc:
            raise InputError(f"cannot read roster file {path}: {exc}") from exc
        roster.update(s for s in listed if s)
    if not roster:
        raise InputError("roster is empty: no responses recorded and no roster file")
    return sorted(roster)


def _build_snapshots(graph, assessments, mappings_by_assessment, records, roster):
    """Per-student, per-assessment snapshots (non-cumulative)."""
    snapshots: dict[str, dict] = {}
    for student_id in roster:
        per_assessment = {}
        for assessment in assessments:
            snapshot, _diags = build_snapshot(
                student_id,
                assessment,
                mappings_by_assessment[assessment.assessment_id],
                records,
                graph,
            )
            per_assessment[assessment.assessment_id] = snapshot
        snapshots[student_id] = per_assessment
    return snapshots


def _coverage_reports(graph, assessments, mappings_by_assessment) -> list:
    return [
        analytics.assessment_coverage(
            graph, mappings_by_assessment[a.assessment_id], a.assessment_id
        )
        for a in assessments
    ]


def _write_report(config, name: str, payload: dict, markdown: str) -> list:
    out = _ensure_out(config)
    written = []
    if "json" in config.report_formats:
        path = out / f"report_{name}.json"
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        written.append(path)
    if "md" in config.report_formats:
        path = out / f"report_{name}.md"
        path.write_text(markdown, encoding="utf-8")
        written.append(path)
    for path in written:
        click.echo(f"wrote {path}")
    return written


@main.command()
@click.argument("kind")
@click.argument("arg", required=False)
@click.pass_obj
@_stage
def report(config, kind, arg):
    """Emit an analytics report: coverage, bias, student <id>, class,
    groups <k>, bottlenecks, or comprehensiveness."""
    if kind not in REPORT_KINDS:
        raise InputError(f"unknown report kind {kind!r} (expected one of {', '.join(REPORT_KINDS)})")

    graph = load(config.graph_file)
    assessments = _load_assessments(config)
    assessments_by_id = {a.assessment_id: a for a in assessments}
    mappings_by_assessment = _load_mappings_by_assessment(config, assessments)

    if kind == "coverage":
        coverage = _coverage_reports(graph, assessments, mappings_by_assessment)
        payload, markdown = reports.render_coverage(coverage, assessments_by_id)
        _write_report(config, "coverage", payload, markdown)
        return

    if kind == "bias":
        coverage = _coverage_reports(graph, assessments, mappings_by_assessment)
        overlaps = [
            analytics.coverage_overlap(coverage[i], coverage[j])
            for i in range(len(coverage))
            for j in range(i + 1, len(coverage))
        ]
        warning = analytics.bias_warning(
            coverage,
            overlaps,
            theta_overlap=config.thresholds.theta_overlap,
            theta_floor=config.thresholds.theta_floor,
        )
        payload, markdown = reports.render_bias(overlaps, warning)
        _write_report(config, "bias", payload, markdown)
        return

    if kind == "comprehensiveness":
        coverage = _coverage_reports(graph, assessments, mappings_by_assessment)
        summary = analytics.comprehensiveness(graph, coverage)
        payload, markdown = reports.render_comprehensiveness(summary)
        _write_report(config, "comprehensiveness", payload, markdown)
        return

    # Remaining kinds need student responses.
    records = read_response_store(config.response_store)
    roster = _load_roster(config, records)
    snapshots = _build_snapshots(graph, assessments, mappings_by_assessment, records, roster)

    if kind == "class":
        coverage = _coverage_reports(graph, assessments, mappings_by_assessment)
        profiles = []
        for assessment, cov in zip(assessments, coverage):
            per_student = {
                s: snapshots[s][assessment.assessment_id]
                for s in roster
            }
            profiles.append(analytics.class_profile(graph, per_student, roster, coverage=cov))
        timeline_entries = analytics.class_coverage_timeline(
            graph, snapshots, assessments, roster, theta_class=config.thresholds.theta_class
        )
        payload, markdown = reports.render_class(
            profiles, timeline_entries, config.thresholds.theta_class
        )
        _write_report(config, "class", payload, markdown)
        return

    if kind == "student":
        if not arg:
            raise InputError("report student requires a student id")
        if arg not in roster:
            raise InputError(f"unknown student id {arg!r}")
        coverage = _coverage_reports(graph, assessments, mappings_by_assessment)
        comparisons = []
        out = _ensure_out(config)
        for assessment, cov in zip(assessments, coverage):
            per_student = {s: snapshots[s][assessment.assessment_id] for s in roster}
            profile = analytics.class_profile(graph, per_student, roster, coverage=cov)
            comparison = analytics.student_comparison(
                graph,
                snapshots[arg][assessment.assessment_id],
                profile,
                cov,
                theta_lag=config.thresholds.theta_lag,
            )
            comparisons.append(comparison)
            dot_path = out / f"student_{arg}_{assessment.assessment_id}.dot"
            dot_path.write_text(reports.student_overlay_dot(graph, comparison), encoding="utf-8")
            click.echo(f"wrote {dot_path}")
        payload, markdown = reports.render_student(comparisons)
        _write_report(config, f"student_{arg}", payload, markdown)
        return

    if kind == "groups":
        if not arg:
            raise InputError("report groups requires a group count")
        try:
            k = int(arg)
        except ValueError:
            raise InputError(f"group count must be an integer, got {arg!r}") from None
        scores = analytics.total_scores(records)
        for student_id in roster:
            scores.setdefault(student_id, 0)
        timelines = {
            s: build_timeline(
                s, [snapshots[s][a.assessment_id] for a in assessments], assessments
            )
            for s in roster
        }
        stats = analytics.score_groups(scores, k, timelines, graph)
        payload, markdown = reports.render_groups(stats)
        _write_report(config, f"groups_{k}", payload, markdown)
        return

    if kind == "bottlenecks":
        bottleneck_report = analytics.bottlenecks(
            graph,
            mappings_by_assessment,
            assessments,
            snapshots,
            records,
            min_support=config.thresholds.min_support,
        )
        payload, markdown = reports.render_bottlenecks(bottleneck_report, graph)
        _write_report(config, "bottlenecks", payload, markdown)
        return


@main.command("export-dot")
@click.pass_obj
@_stage
def export_dot_cmd(config):
    """Export the saved graph as a Graphviz DOT file."""
    graph = load(config.graph_file)
    out = _ensure_out(config)
    path = out / "graph.dot"
    path.write_text(export_dot(graph), encoding="utf-8")
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
