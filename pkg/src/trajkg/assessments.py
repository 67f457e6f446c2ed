"""Assessments and question-to-edge mapping.

Each multiple-choice question is matched to the knowledge-graph edges it
exercises. The provider path renders a chain-of-thought prompt with the
question and the full edge catalog and trusts only the final EDGE lines;
when that yields nothing, a deterministic lexical matcher (token Jaccard
between the question and each edge's labels) takes over. Questions that
neither path can place are flagged unmapped rather than dropped.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .diagnostics import Diagnostic, diag
from .errors import InputError
from .grammar import parse_structured_output

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_TAU = 0.3
DEFAULT_UNMAPPED_CEILING = 0.25

_PHASE_WORDS = {"pretest": "pretest", "midterm": "midterm", "posttest": "posttest"}


@dataclass(frozen=True)
class Phase:
    """Assessment phase: pretest, quiz(n), midterm, or posttest."""

    kind: str
    number: int | None = None

    @classmethod
    def parse(cls, text: str) -> "Phase":
        token = text.strip().casefold().replace("-", "").replace("_", "")
        if token in _PHASE_WORDS:
            return cls(kind=_PHASE_WORDS[token])
        match = re.fullmatch(r"quiz(\d+)", token)
        if match:
            return cls(kind="quiz", number=int(match.group(1)))
        raise InputError(
            f"unknown assessment phase {text!r} (expected pretest, quiz<N>, midterm, posttest)"
        )

    def __str__(self) -> str:
        return f"quiz{self.number}" if self.kind == "quiz" else self.kind


@dataclass(frozen=True)
class Question:
    question_id: str
    stem: str
    options: tuple[str, ...]
    correct_index: int

    def __post_init__(self):
        if len(self.options) < 2:
            raise InputError(f"question {self.question_id!r} needs at least 2 options")
        if len(set(self.options)) != len(self.options):
            raise InputError(f"question {self.question_id!r} has duplicate options")
        if not 0 <= self.correct_index < len(self.options):
            raise InputError(
                f"question {self.question_id!r} correct_index {self.correct_index} out of range"
            )

    @property
    def correct_option(self) -> str:
        return self.options[self.correct_index]


@dataclass(frozen=True)
class Assessment:
    assessment_id: str
    phase: Phase
    order_index: int
    questions: tuple[Question, ...]

    def __post_init__(self):
        ids = [q.question_id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise InputError(f"assessment {self.assessment_id!r} repeats question ids")

    def question(self, question_id: str) -> Question:
        for q in self.questions:
            if q.question_id == question_id:
                return q
        raise InputError(f"assessment {self.assessment_id!r} has no question {question_id!r}")


@dataclass(frozen=True)
class EdgeMapping:
    question_id: str
    edge_ids: frozenset[str]
    method: str  # "provider" | "lexical"
    confidence: float
    rationale: str = ""
    unmapped: bool = False

    def __post_init__(self):
        if not self.edge_ids and not self.unmapped:
            raise InputError(
                f"mapping for {self.question_id!r} has no edges but is not flagged unmapped"
            )


@dataclass
class MappingResult:
    mappings: list = field(default_factory=list)
    unmapped: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


# --- question bank files ----------------------------------------------------


def load_question_bank(path) -> Assessment:
    p = Path(path)
    try:
        payload = json.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read question bank {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"question bank {p} is not valid JSON: {exc}") from exc
    try:
        questions = tuple(
            Question(
                question_id=q["question_id"],
                stem=q["stem"],
                options=tuple(q["options"]),
                correct_index=int(q["correct_index"]),
            )
            for q in payload["questions"]
        )
        return Assessment(
            assessment_id=payload["assessment_id"],
            phase=Phase.parse(payload["phase"]),
            order_index=int(payload["order_index"]),
            questions=questions,
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"question bank {p} is missing field {exc}") from exc


# --- lexical matching -------------------------------------------------------


def tokenize(text: str) -> frozenset[str]:
    """Case-folded alphanumeric runs."""
    return frozenset(_TOKEN_RE.findall(text.casefold()))


def jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


def edge_tokens(graph, edge_id: str) -> frozenset[str]:
    edge = graph.edges[edge_id]
    return (
        tokenize(graph.nodes[edge.src].label)
        | tokenize(edge.relation_label)
        | tokenize(graph.nodes[edge.dst].label)
    )


def lexical_match(question: Question, graph, tau: float = DEFAULT_TAU) -> tuple[frozenset, float]:
    """All edges whose label tokens meet the Jaccard threshold.

    Question tokens come from the stem plus the correct option only;
    distractors intentionally mention wrong concepts and stay out.
    Returns (edge ids, confidence) with confidence the best matched score.
    """
    if not 0 < tau <= 1:
        raise InputError(f"lexical threshold must be in (0, 1], got {tau}")
    question_tokens = tokenize(question.stem) | tokenize(question.correct_option)
    matched: set[str] = set()
    best = 0.0
    for edge_id in graph.sorted_edge_ids():
        score = jaccard(question_tokens, edge_tokens(graph, edge_id))
        if score >= tau:
            matched.add(edge_id)
            best = max(best, score)
    return frozenset(matched), best


# --- provider mapping -------------------------------------------------------


def serialize_edge_catalog(graph) -> str:
    lines = []
    for edge_id in graph.sorted_edge_ids():
        edge = graph.edges[edge_id]
        lines.append(
            f"{edge_id}\t{graph.nodes[edge.src].label}\t{edge.relation_label}\t{graph.nodes[edge.dst].label}"
        )
    return "\n".join(lines)


def _map_question(question: Question, graph, provider, catalog: str, tau: float):
    bindings = {
        "stem": question.stem,
        "options": "\n".join(f"{i}. {text}" for i, text in enumerate(question.options)),
        "correct_option": question.correct_option,
        "edges": catalog,
    }
    response = provider.complete("MAP_QUESTION", bindings)
    records, _parse_diags = parse_structured_output("EDGES", response)

    diagnostics: list[Diagnostic] = []
    surviving: set[str] = set()
    for record in records:
        if record.edge_id in graph.edges:
            surviving.add(record.edge_id)
        else:
            diagnostics.append(
                diag(
                    "unknown-edge",
                    f"question {question.question_id}: provider named unknown edge {record.edge_id!r}",
                    question.question_id,
                    record.edge_id,
                )
            )
    if surviving:
        mapping = EdgeMapping(
            question_id=question.question_id,
            edge_ids=frozenset(surviving),
            method="provider",
            confidence=1.0,
            rationale=response,
        )
        return mapping, diagnostics

    edge_ids, confidence = lexical_match(question, graph, tau)
    if edge_ids:
        mapping = EdgeMapping(
            question_id=question.question_id,
            edge_ids=edge_ids,
            method="lexical",
            confidence=confidence,
            rationale=response,
        )
        return mapping, diagnostics

    mapping = EdgeMapping(
        question_id=question.question_id,
        edge_ids=frozenset(),
        method="lexical",
        confidence=0.0,
        rationale=response,
        unmapped=True,
    )
    diagnostics.append(
        diag("unmapped", f"question {question.question_id} maps to no edge", question.question_id)
    )
    return mapping, diagnostics


def map_assessment(
    assessment: Assessment, graph, provider, tau: float = DEFAULT_TAU, workers: int = 1
) -> MappingResult:
    """Map every question of an assessment onto graph edges.

    Questions may be mapped concurrently; results keep question order. A
    terminal provider failure propagates and nothing is persisted.
    """
    catalog = serialize_edge_catalog(graph)
    if workers <= 1 or len(assessment.questions) <= 1:
        outcomes = [
            _map_question(q, graph, provider, catalog, tau) for q in assessment.questions
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(
                pool.map(lambda q: _map_question(q, graph, provider, catalog, tau), assessment.questions)
            )

    result = MappingResult()
    for mapping, diagnostics in outcomes:
        result.mappings.append(mapping)
        result.diagnostics.extend(diagnostics)
        if mapping.unmapped:
            result.unmapped.append(mapping.question_id)
    return result


def validate_mappings(
    mappings: list, graph, assessment: Assessment, unmapped_ceiling: float = DEFAULT_UNMAPPED_CEILING
) -> tuple[list[Diagnostic], float]:
    """Check mapping invariants; returns (diagnostics, unmapped rate)."""
    diagnostics: list[Diagnostic] = []
    question_ids = {q.question_id for q in assessment.questions}
    seen: set[str] = set()
    unmapped_count = 0
    for mapping in mappings:
        if mapping.question_id not in question_ids:
            diagnostics.append(
                diag("foreign-question", f"mapping names unknown question {mapping.question_id!r}")
            )
        if mapping.question_id in seen:
            diagnostics.append(
                diag("duplicate-mapping", f"question {mapping.question_id!r} mapped twice")
            )
        seen.add(mapping.question_id)
        missing = sorted(eid for eid in mapping.edge_ids if eid not in graph.edges)
        for edge_id in missing:
            diagnostics.append(
                diag(
                    "edge-missing",
                    f"mapping for {mapping.question_id!r} names absent edge {edge_id}",
                    mapping.question_id,
                    edge_id,
                )
            )
        if mapping.unmapped:
            unmapped_count += 1

    total = len(assessment.questions)
    rate = unmapped_count / total if total else 0.0
    if total and rate > unmapped_ceiling:
        diagnostics.append(
            diag(
                "unmapped-ceiling",
                f"unmapped rate {rate:.3f} exceeds ceiling {unmapped_ceiling:.3f} "
                f"for assessment {assessment.assessment_id}",
                assessment.assessment_id,
            )
        )
    return diagnostics, rate


# --- mapping files ----------------------------------------------------------


def _edge_sort_key(edge_id: str):
    suffix = edge_id[1:]
    return (0, int(suffix)) if suffix.isdigit() else (1, edge_id)


def mappings_to_jsonl(mappings: list) -> str:
    lines = []
    for m in mappings:
        lines.append(
            json.dumps(
                {
                    "question_id": m.question_id,
                    "edge_ids": sorted(m.edge_ids, key=_edge_sort_key),
                    "method": m.method,
                    "confidence": m.confidence,
                    "rationale": m.rationale,
                    "unmapped": m.unmapped,
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def write_mappings(mappings: list, path) -> None:
    Path(path).write_text(mappings_to_jsonl(mappings), encoding="utf-8")


def read_mappings(path) -> list[EdgeMapping]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read mappings file {p}: {exc}") from exc
    mappings = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
            mappings.append(
                EdgeMapping(
                    question_id=payload["question_id"],
                    edge_ids=frozenset(payload["edge_ids"]),
                    method=payload["method"],
                    confidence=float(payload["confidence"]),
                    rationale=payload.get("rationale", ""),
                    unmapped=bool(payload.get("unmapped", False)),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{p}:{lineno}: malformed mapping record: {exc}") from exc
    return mappings
