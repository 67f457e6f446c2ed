"""Extraction providers: the single boundary for model-assisted steps.

Two implementations share one contract:

* RemoteProvider posts rendered prompts to an HTTP completion endpoint.
* DeterministicProvider answers from fixed rules, as a pure function of the
  rendered prompt, so every downstream computation is exactly checkable
  offline.

Every transport attempt is recorded verbatim as a ProviderExchange.
Prompt templates live one file per template id; payload sections inside a
template are fenced as ``<<<NAME`` ... ``NAME>>>`` so the deterministic
provider can recover its inputs from the rendered prompt alone.
"""

from __future__ import annotations

import json
import os
import re
import string
import threading
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import httpx

from .errors import ProviderError, TemplateError
from .taxonomy import EdgeKind, NodeKind

TEMPLATE_IDS = ("REFINE", "EXTRACT_NODES", "EXTRACT_RELATIONS", "MAP_QUESTION")

TEMPLATE_GRAMMARS = {
    "REFINE": "STATEMENTS",
    "EXTRACT_NODES": "NODES",
    "EXTRACT_RELATIONS": "RELATIONS",
    "MAP_QUESTION": "EDGES",
}


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    output_grammar_id: str

    def render(self, bindings: dict) -> str:
        try:
            return string.Template(self.body).substitute(bindings)
        except KeyError as exc:
            raise TemplateError(
                f"template {self.template_id}: unbound placeholder {exc.args[0]!r}"
            ) from exc
        except ValueError as exc:
            raise TemplateError(f"template {self.template_id}: {exc}") from exc


@dataclass(frozen=True)
class ProviderExchange:
    template_id: str
    rendered_prompt: str
    raw_response: str
    latency_ms: int
    provider_kind: str


def load_templates(directory) -> dict[str, PromptTemplate]:
    """Load all four templates from a directory (one ``<ID>.txt`` per id)."""
    templates = {}
    base = Path(directory)
    for template_id in TEMPLATE_IDS:
        path = base / f"{template_id}.txt"
        try:
            body = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise TemplateError(f"cannot read template {path}: {exc}") from exc
        templates[template_id] = PromptTemplate(
            template_id=template_id, body=body, output_grammar_id=TEMPLATE_GRAMMARS[template_id]
        )
    return templates


def default_templates() -> dict[str, PromptTemplate]:
    """Templates bundled with the package."""
    templates = {}
    root = resources.files("trajkg") / "templates"
    for template_id in TEMPLATE_IDS:
        body = (root / f"{template_id}.txt").read_text(encoding="utf-8")
        templates[template_id] = PromptTemplate(
            template_id=template_id, body=body, output_grammar_id=TEMPLATE_GRAMMARS[template_id]
        )
    return templates


class ExtractionProvider:
    """Base contract: render a template, produce a response, keep an audit log."""

    kind = "abstract"

    def __init__(self, templates: dict | None = None):
        self._templates = dict(templates) if templates is not None else default_templates()
        self._exchanges: list[ProviderExchange] = []
        self._log_lock = threading.Lock()

    @property
    def exchanges(self) -> tuple[ProviderExchange, ...]:
        with self._log_lock:
            return tuple(self._exchanges)

    def template(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise TemplateError(f"no template loaded for id {template_id!r}") from None

    def complete(self, template_id: str, bindings: dict) -> str:
        rendered = self.template(template_id).render(bindings)
        return self._respond(template_id, rendered)

    def _respond(self, template_id: str, rendered: str) -> str:
        raise NotImplementedError

    def _record(self, template_id: str, rendered: str, raw_response: str, latency_ms: int):
        exchange = ProviderExchange(
            template_id=template_id,
            rendered_prompt=rendered,
            raw_response=raw_response,
            latency_ms=max(0, int(latency_ms)),
            provider_kind=self.kind,
        )
        with self._log_lock:
            self._exchanges.append(exchange)


# --- deterministic rule-based provider -----------------------------------

_PAYLOAD_RE = re.compile(r"<<<(?P<name>[A-Z_]+)\n(?P<body>.*?)\n?(?P=name)>>>", re.DOTALL)

# Filler tokens dropped when they open a sentence during rule-based refinement.
_SENTENCE_FILLERS = frozenset({"and", "also", "well", "um", "so", "then"})

_KIND_MARKERS = {
    "@event": NodeKind.EVENT,
    "@person": NodeKind.PERSON,
    "@time": NodeKind.TIME,
    "@place": NodeKind.PLACE,
}


def extract_payloads(rendered: str) -> dict[str, str]:
    return {m.group("name"): m.group("body") for m in _PAYLOAD_RE.finditer(rendered)}


def split_into_statements(body: str) -> list[str]:
    """Rule-based refinement: sentence-split, drop sentence-initial fillers."""
    statements = []
    for sentence in re.split(r"[.!?]", body):
        tokens = sentence.split()
        while tokens and tokens[0].strip(",;:").casefold() in _SENTENCE_FILLERS:
            tokens.pop(0)
        if tokens:
            statements.append(" ".join(tokens))
    return statements


@dataclass(frozen=True)
class Triplet:
    subject: str
    subject_kind: NodeKind
    relation: str
    relation_kind: EdgeKind
    obj: str
    obj_kind: NodeKind


def _strip_kind_marker(text: str) -> tuple[str, NodeKind]:
    for marker, kind in _KIND_MARKERS.items():
        if text.endswith(marker):
            return text[: -len(marker)].strip(), kind
    return text, NodeKind.OBJECT


def parse_triplet(statement: str) -> Triplet | None:
    """Parse the controlled ``subject | relation | object`` statement form.

    Statements not in triplet form yield None: only controlled statements
    produce extraction output. Subjects/objects default to object kind
    unless suffixed with a kind marker; ``causes:`` and ``then:`` prefixes
    on the relation select causal/sequential kinds.
    """
    parts = [p.strip() for p in statement.split("|")]
    if len(parts) != 3 or not all(parts):
        return None
    subject, subject_kind = _strip_kind_marker(parts[0])
    obj, obj_kind = _strip_kind_marker(parts[2])
    relation, relation_kind = parts[1], EdgeKind.SEMANTIC
    if relation.startswith("causes:"):
        relation, relation_kind = relation[len("causes:"):].strip(), EdgeKind.CAUSAL
    elif relation.startswith("then:"):
        relation, relation_kind = relation[len("then:"):].strip(), EdgeKind.SEQUENTIAL
    if not (subject and relation and obj):
        return None
    return Triplet(subject, subject_kind, relation, relation_kind, obj, obj_kind)


class DeterministicProvider(ExtractionProvider):
    """Offline provider: responses are a pure function of the rendered prompt.

    Rendered prompts must keep the fenced payload blocks of the default
    templates; the provider re-reads its inputs from those blocks rather
    than trusting any side channel.
    """

    kind = "deterministic"

    def _respond(self, template_id: str, rendered: str) -> str:
        start = time.perf_counter()
        payloads = extract_payloads(rendered)
        if template_id == "REFINE":
            response = self._refine(payloads)
        elif template_id == "EXTRACT_NODES":
            response = self._extract_nodes(payloads)
        elif template_id == "EXTRACT_RELATIONS":
            response = self._extract_relations(payloads)
        elif template_id == "MAP_QUESTION":
            # Question mapping is deferred to the caller's lexical matcher.
            response = ""
        else:
            raise ProviderError(f"deterministic provider has no rule for {template_id!r}")
        latency_ms = int((time.perf_counter() - start) * 1000)
        self._record(template_id, rendered, response, latency_ms)
        return response

    def _payload(self, payloads: dict, name: str) -> str:
        if name not in payloads:
            raise ProviderError(
                f"rendered prompt lost its <<<{name} payload block; "
                "deterministic templates must keep payload fences"
            )
        return payloads[name]

    def _refine(self, payloads: dict) -> str:
        return "\n".join(split_into_statements(self._payload(payloads, "SECTION")))

    def _extract_nodes(self, payloads: dict) -> str:
        lines = []
        for statement in self._payload(payloads, "STATEMENTS").splitlines():
            triplet = parse_triplet(statement)
            if triplet is None:
                continue
            lines.append(f"NODE\t{triplet.subject_kind.value}\t{triplet.subject}")
            lines.append(f"NODE\t{triplet.obj_kind.value}\t{triplet.obj}")
        return "\n".join(lines)

    def _extract_relations(self, payloads: dict) -> str:
        lines = []
        for statement in self._payload(payloads, "STATEMENTS").splitlines():
            triplet = parse_triplet(statement)
            if triplet is None:
                continue
            lines.append(
                "REL\t{}\t{}\t{}\t{}".format(
                    triplet.relation_kind.value, triplet.subject, triplet.relation, triplet.obj
                )
            )
        return "\n".join(lines)


# --- remote HTTP provider -------------------------------------------------

API_KEY_ENV = "TRAJKG_API_KEY"


def resolve_json_pointer(document, pointer: str):
    """Resolve an RFC 6901 JSON pointer against a parsed JSON document."""
    if pointer == "":
        return document
    if not pointer.startswith("/"):
        raise ValueError(f"JSON pointer must start with '/': {pointer!r}")
    current = document
    for raw_token in pointer.split("/")[1:]:
        token = raw_token.replace("~1", "/").replace("~0", "~")
        if isinstance(current, list):
            current = current[int(token)]
        elif isinstance(current, dict):
            current = current[token]
        else:
            raise KeyError(token)
    return current


class RemoteProvider(ExtractionProvider):
    """HTTP completion provider with bounded retries and an in-flight cap.

    Only transport-class failures (connection errors, timeouts, 5xx) are
    retried, with exponential backoff; content-level problems are terminal.
    The API credential is read from the TRAJKG_API_KEY environment variable
    at call time and never appears in configuration files.
    """

    kind = "remote"

    def __init__(
        self,
        endpoint: str,
        templates: dict | None = None,
        *,
        model: str = "default",
        response_pointer: str = "/choices/0/message/content",
        retry_budget: int = 2,
        in_flight_cap: int = 4,
        timeout: float = 30.0,
        backoff_base: float = 0.5,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        super().__init__(templates)
        if not endpoint:
            raise ProviderError("remote provider requires a non-empty endpoint URL")
        self.endpoint = endpoint
        self.model = model
        self.response_pointer = response_pointer
        self.retry_budget = max(0, int(retry_budget))
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._semaphore = threading.Semaphore(max(1, int(in_flight_cap)))
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self):
        self._client.close()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def _respond(self, template_id: str, rendered: str) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": rendered}],
            "temperature": 0,
        }
        attempts = self.retry_budget + 1
        last_failure = None
        for attempt in range(attempts):
            if attempt:
                self._sleep(self.backoff_base * (2 ** (attempt - 1)))
            start = time.perf_counter()
            try:
                with self._semaphore:
                    response = self._client.post(
                        self.endpoint, json=body, headers=self._headers()
                    )
            except httpx.HTTPError as exc:
                latency_ms = int((time.perf_counter() - start) * 1000)
                self._record(template_id, rendered, f"<transport-error: {exc}>", latency_ms)
                last_failure = f"transport error: {exc}"
                continue
            latency_ms = int((time.perf_counter() - start) * 1000)
            self._record(template_id, rendered, response.text, latency_ms)
            if response.status_code >= 500:
                last_failure = f"HTTP {response.status_code}"
                continue
            if response.status_code >= 400:
                raise ProviderError(
                    f"{template_id}: endpoint rejected request with HTTP {response.status_code}"
                )
            return self._extract_completion(template_id, response)
        raise ProviderError(
            f"{template_id}: retry budget of {self.retry_budget} exhausted ({last_failure})"
        )

    def _extract_completion(self, template_id: str, response: httpx.Response) -> str:
        try:
            document = response.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise ProviderError(f"{template_id}: response body is not JSON: {exc}") from exc
        try:
            completion = resolve_json_pointer(document, self.response_pointer)
        except (KeyError, IndexError, ValueError, TypeError) as exc:
            raise ProviderError(
                f"{template_id}: no completion at pointer {self.response_pointer!r}: {exc}"
            ) from exc
        if not isinstance(completion, str):
            raise ProviderError(
                f"{template_id}: completion at {self.response_pointer!r} is not text"
            )
        return completion
