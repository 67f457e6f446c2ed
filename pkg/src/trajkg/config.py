"""Run configuration: TOML file plus command-line overrides.

Paths in a config file resolve against the file's own directory, and all
thresholds are range-checked up front so a bad run dies before any work.
The provider credential is never configured here; it comes only from the
TRAJKG_API_KEY environment variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError
from .providers import DeterministicProvider, RemoteProvider, default_templates, load_templates


@dataclass
class ProviderSettings:
    kind: str = "deterministic"
    endpoint: str = ""
    model: str = "default"
    templates_dir: str | None = None
    response_pointer: str = "/choices/0/message/content"
    retry_budget: int = 2
    in_flight_cap: int = 4
    batch_size: int = 20
    timeout: float = 30.0
    workers: int = 1


@dataclass
class Thresholds:
    tau: float = 0.3
    theta_overlap: float = 0.6
    theta_floor: float = 0.2
    theta_lag: float = 0.5
    theta_class: float = 0.5
    unmapped_ceiling: float = 0.25
    min_support: int = 5


@dataclass
class PathSettings:
    corpus_dir: str = "corpus"
    refined_file: str = ""
    graph_file: str = ""
    question_banks: list = field(default_factory=list)
    responses_file: str = "responses.csv"
    response_store: str = ""
    roster_file: str = ""
    output_dir: str = "out"


@dataclass
class RunConfig:
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    thresholds: Thresholds = field(default_factory=Thresholds)
    paths: PathSettings = field(default_factory=PathSettings)
    report_formats: tuple = ("json", "md")

    @property
    def output_dir(self) -> Path:
        return Path(self.paths.output_dir)

    @property
    def refined_file(self) -> Path:
        return Path(self.paths.refined_file) if self.paths.refined_file else self.output_dir / "refined.tsv"

    @property
    def graph_file(self) -> Path:
        return Path(self.paths.graph_file) if self.paths.graph_file else self.output_dir / "graph.json"

    @property
    def response_store(self) -> Path:
        return (
            Path(self.paths.response_store)
            if self.paths.response_store
            else self.output_dir / "responses.json"
        )

    def mappings_file(self, assessment_id: str) -> Path:
        return self.output_dir / f"mappings_{assessment_id}.jsonl"


def _check_fraction(name: str, value, low_exclusive: bool = False):
    if not isinstance(value, (int, float)):
        raise ConfigError(f"threshold {name} must be a number, got {value!r}")
    if low_exclusive and not 0 < value <= 1:
        raise ConfigError(f"threshold {name} must be in (0, 1], got {value}")
    if not low_exclusive and not 0 <= value <= 1:
        raise ConfigError(f"threshold {name} must be in [0, 1], got {value}")


def validate_config(config: RunConfig) -> RunConfig:
    t = config.thresholds
    _check_fraction("tau", t.tau, low_exclusive=True)
    _check_fraction("theta_overlap", t.theta_overlap)
    _check_fraction("theta_floor", t.theta_floor)
    _check_fraction("theta_lag", t.theta_lag)
    _check_fraction("theta_class", t.theta_class)
    _check_fraction("unmapped_ceiling", t.unmapped_ceiling)
    if t.min_support < 1:
        raise ConfigError(f"min_support must be at least 1, got {t.min_support}")
    p = config.provider
    if p.kind not in ("deterministic", "remote"):
        raise ConfigError(f"provider.kind must be deterministic or remote, got {p.kind!r}")
    if p.retry_budget < 0:
        raise ConfigError(f"retry_budget must be non-negative, got {p.retry_budget}")
    if p.in_flight_cap < 1:
        raise ConfigError(f"in_flight_cap must be at least 1, got {p.in_flight_cap}")
    if p.batch_size < 1:
        raise ConfigError(f"batch_size must be at least 1, got {p.batch_size}")
    if p.workers < 1:
        raise ConfigError(f"workers must be at least 1, got {p.workers}")
    for fmt in config.report_formats:
        if fmt not in ("json", "md"):
            raise ConfigError(f"unknown report format {fmt!r}")
    return config


def _apply_section(target, section: dict, section_name: str):
    for key, value in section.items():
        if not hasattr(target, key):
            raise ConfigError(f"unknown config key {section_name}.{key}")
        setattr(target, key, value)


def _resolve(base: Path, value: str) -> str:
    if not value:
        return value
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def load_config(path=None) -> RunConfig:
    """Load a TOML config; with no path, return validated defaults."""
    config = RunConfig()
    if path is None:
        return validate_config(config)
    p = Path(path)
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {p} is not valid TOML: {exc}") from exc

    known = {"provider", "thresholds", "paths", "report"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")

    _apply_section(config.provider, data.get("provider", {}), "provider")
    _apply_section(config.thresholds, data.get("thresholds", {}), "thresholds")
    _apply_section(config.paths, data.get("paths", {}), "paths")
    report = data.get("report", {})
    if "formats" in report:
        config.report_formats = tuple(report["formats"])
    extra_report = set(report) - {"formats"}
    if extra_report:
        raise ConfigError(f"unknown config key(s) report.{sorted(extra_report)}")

    base = p.resolve().parent
    paths = config.paths
    paths.corpus_dir = _resolve(base, paths.corpus_dir)
    paths.refined_file = _resolve(base, paths.refined_file)
    paths.graph_file = _resolve(base, paths.graph_file)
    paths.question_banks = [_resolve(base, bank) for bank in paths.question_banks]
    paths.responses_file = _resolve(base, paths.responses_file)
    paths.response_store = _resolve(base, paths.response_store)
    paths.roster_file = _resolve(base, paths.roster_file)
    paths.output_dir = _resolve(base, paths.output_dir)
    if config.provider.templates_dir:
        config.provider.templates_dir = _resolve(base, config.provider.templates_dir)
    return validate_config(config)


def build_provider(config: RunConfig):
    """Instantiate the configured extraction provider."""
    settings = config.provider
    templates = (
        load_templates(settings.templates_dir) if settings.templates_dir else default_templates()
    )
    if settings.kind == "deterministic":
        return DeterministicProvider(templates)
    return RemoteProvider(
        settings.endpoint,
        templates,
        model=settings.model,
        response_pointer=settings.response_pointer,
        retry_budget=settings.retry_budget,
        in_flight_cap=settings.in_flight_cap,
        timeout=settings.timeout,
    )
