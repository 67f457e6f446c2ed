"""Exception hierarchy shared by every pipeline stage.

Only genuinely terminal conditions raise. Recoverable oddities (malformed
provider lines, dropped relations, absent students) travel as Diagnostic
records instead, so callers decide what is fatal.
"""

from __future__ import annotations


class TrajkgError(Exception):
    """Base class for all errors raised by this package."""


class InputError(TrajkgError):
    """Unusable user input: missing files, bad encodings, malformed records."""


class ConfigError(InputError):
    """Run configuration is missing, unreadable, or out of range."""


class TemplateError(InputError):
    """A prompt template is missing or a placeholder was left unbound."""


class ProviderError(TrajkgError):
    """Extraction provider failed terminally (transport budget exhausted, etc.)."""

    def __init__(self, message: str, *, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class ExtractionError(TrajkgError):
    """A whole extraction batch was unusable; carries the parse diagnostics."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class GraphValidationError(TrajkgError):
    """A knowledge graph violated a structural invariant."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])
