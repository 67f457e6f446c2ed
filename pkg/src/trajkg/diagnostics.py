"""Diagnostic records: structured, non-fatal findings.

A Diagnostic is data, not an exception. Parsers, graph builders, and
validators emit them for every line, relation, or record they reject so a
run can finish while still accounting for every input.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    context: tuple = field(default=())

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "context": list(self.context)}


def diag(code: str, message: str, *context) -> Diagnostic:
    """Shorthand constructor; context values are stringified for stability."""
    return Diagnostic(code=code, message=message, context=tuple(str(c) for c in context))
