"""Course-material ingestion: load text files, refine them into statements.

Materials are plain UTF-8 text with optional "#"-prefixed heading lines.
Each heading starts a section; a file with no headings becomes a single
synthetic "body" section. Refinement (turning section prose into short
declarative statements) is delegated entirely to the extraction provider,
so linguistic policy lives in one swappable place.
"""

from __future__ import annotations

import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .diagnostics import Diagnostic, diag
from .errors import InputError, ProviderError


@dataclass(frozen=True)
class Section:
    section_id: str
    heading: str
    body: str


@dataclass(frozen=True)
class MaterialDocument:
    doc_id: str
    title: str
    sections: tuple[Section, ...]
    source_path: str

    def __post_init__(self):
        if not self.sections:
            raise InputError(f"document {self.doc_id!r} has no sections")
        ids = [s.section_id for s in self.sections]
        if len(set(ids)) != len(ids):
            raise InputError(f"document {self.doc_id!r} has duplicate section ids")


@dataclass(frozen=True)
class RefinedStatement:
    stmt_id: str
    doc_id: str
    section_id: str
    order_index: int
    text: str

    def __post_init__(self):
        if not self.text:
            raise InputError(f"statement {self.stmt_id!r} is empty")
        if self.order_index < 0:
            raise InputError(f"statement {self.stmt_id!r} has negative order_index")


def normalize_text(raw: str) -> str:
    """NFC-normalize, collapse runs of whitespace to single spaces, strip.

    Case is preserved; case-folding happens only when the graph
    deduplicates labels.
    """
    return " ".join(unicodedata.normalize("NFC", raw).split())


def _split_sections(text: str) -> list[Section]:
    lines = text.split("\n")
    sections: list[Section] = []
    heading = None
    body: list[str] = []
    saw_heading = False

    def flush():
        if heading is None and not any(ln.strip() for ln in body):
            body.clear()
            return
        sections.append(
            Section(
                section_id=f"s{len(sections) + 1}",
                heading=heading or "",
                body="\n".join(body).strip("\n"),
            )
        )
        body.clear()

    for line in lines:
        if line.lstrip().startswith("#"):
            flush()
            heading = line.lstrip().lstrip("#").strip()
            saw_heading = True
        else:
            body.append(line)
    flush()

    if not saw_heading:
        return [Section(section_id="body", heading="", body=text.strip("\n"))]
    return sections


def load_materials(paths: list) -> list[MaterialDocument]:
    """Load one MaterialDocument per path, splitting sections on headings."""
    docs: list[MaterialDocument] = []
    seen_ids: set[str] = set()
    for path in paths:
        p = Path(path)
        try:
            raw = p.read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read material file {p}: {exc}") from exc
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InputError(f"material file {p} is not valid UTF-8: {exc}") from exc
        if not text.strip():
            raise InputError(f"material file {p} is empty")

        doc_id = p.stem
        k = 2
        while doc_id in seen_ids:
            doc_id = f"{p.stem}-{k}"
            k += 1
        seen_ids.add(doc_id)

        sections = _split_sections(text)
        if not sections:
            raise InputError(f"material file {p} has no content sections")
        docs.append(
            MaterialDocument(
                doc_id=doc_id, title=p.stem, sections=tuple(sections), source_path=str(p)
            )
        )
    return docs


def refine(doc: MaterialDocument, provider) -> tuple[list[RefinedStatement], list[Diagnostic]]:
    """Refine each section of a document into cleaned statements.

    Sends one REFINE prompt per section; the provider answers one statement
    per line. Statements are normalized, numbered within their section, and
    given ids of the form ``doc/section#index``.
    """
    statements: list[RefinedStatement] = []
    diagnostics: list[Diagnostic] = []
    for section in doc.sections:
        try:
            response = provider.complete("REFINE", {"section_body": section.body})
        except ProviderError as exc:
            raise ProviderError(
                f"refine failed for {doc.doc_id}/{section.section_id}: {exc}",
                retryable=exc.retryable,
            ) from exc
        order = 0
        for line in response.splitlines():
            text = normalize_text(line)
            if not text:
                continue
            statements.append(
                RefinedStatement(
                    stmt_id=f"{doc.doc_id}/{section.section_id}#{order}",
                    doc_id=doc.doc_id,
                    section_id=section.section_id,
                    order_index=order,
                    text=text,
                )
            )
            order += 1
        if order == 0 and section.body.strip():
            diagnostics.append(
                diag(
                    "empty-refinement",
                    f"section {doc.doc_id}/{section.section_id} produced no statements",
                    doc.doc_id,
                    section.section_id,
                )
            )
    return statements, diagnostics


def refine_corpus(
    docs: list, provider, workers: int = 1
) -> tuple[list[RefinedStatement], list[Diagnostic]]:
    """Refine many documents, optionally in parallel; output keeps input order."""
    if workers <= 1 or len(docs) <= 1:
        results = [refine(doc, provider) for doc in docs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda d: refine(d, provider), docs))
    statements: list[RefinedStatement] = []
    diagnostics: list[Diagnostic] = []
    for stmts, diags in results:
        statements.extend(stmts)
        diagnostics.extend(diags)
    return statements, diagnostics


def write_refined_list(statements: list, path) -> None:
    """Write the line-oriented refined-list file (tab-separated fields)."""
    lines = [
        f"{s.stmt_id}\t{s.doc_id}\t{s.section_id}\t{s.order_index}\t{s.text}"
        for s in statements
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_refined_list(path) -> list[RefinedStatement]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read refined list {p}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"refined list {p} is not valid UTF-8: {exc}") from exc
    statements = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise InputError(f"{p}:{lineno}: expected 5 tab-separated fields, got {len(fields)}")
        stmt_id, doc_id, section_id, order_index, stmt_text = fields
        try:
            order = int(order_index)
        except ValueError as exc:
            raise InputError(f"{p}:{lineno}: order_index {order_index!r} is not an integer") from exc
        statements.append(
            RefinedStatement(
                stmt_id=stmt_id,
                doc_id=doc_id,
                section_id=section_id,
                order_index=order,
                text=stmt_text,
            )
        )
    return statements
