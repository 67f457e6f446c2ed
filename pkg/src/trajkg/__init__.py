"""trajkg: course knowledge graphs and learning-trajectory analytics.

Pipeline: ingest course materials into refined statements, extract nodes
and relations through a pluggable provider, build a validated property
graph, map assessment questions onto its edges, fold student responses
into mastery trajectories, and report coverage, bias, and bottleneck
analytics for instructors.
"""

from .analytics import (
    BiasWarning,
    BottleneckReport,
    ClassProfile,
    ComprehensivenessReport,
    CoverageReport,
    OverlapReport,
    StudentComparison,
    assessment_coverage,
    bias_warning,
    bottlenecks,
    class_coverage_timeline,
    class_profile,
    comprehensiveness,
    coverage_overlap,
    percent_display,
    score_groups,
    student_comparison,
    total_scores,
)
from .assessments import (
    Assessment,
    EdgeMapping,
    Phase,
    Question,
    jaccard,
    lexical_match,
    load_question_bank,
    map_assessment,
    tokenize,
    validate_mappings,
)
from .corpus import (
    MaterialDocument,
    RefinedStatement,
    Section,
    load_materials,
    normalize_text,
    refine,
    refine_corpus,
)
from .diagnostics import Diagnostic
from .errors import (
    ConfigError,
    ExtractionError,
    GraphValidationError,
    InputError,
    ProviderError,
    TemplateError,
    TrajkgError,
)
from .extraction import RawNode, RawRelation, extract_nodes, extract_relations
from .grammar import parse_structured_output
from .graph import (
    KnowledgeEdge,
    KnowledgeGraph,
    KnowledgeNode,
    build_graph,
    canonical_label,
    export_dot,
    load,
    save,
    validate,
)
from .providers import (
    DeterministicProvider,
    ExtractionProvider,
    PromptTemplate,
    ProviderExchange,
    RemoteProvider,
    default_templates,
    load_templates,
)
from .taxonomy import EdgeKind, NodeKind
from .trajectory import (
    ResponseRecord,
    TrajectorySnapshot,
    TrajectoryTimeline,
    build_snapshot,
    build_timeline,
    record_responses,
)

__version__ = "0.1.0"
