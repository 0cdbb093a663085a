"""Drug-name reference counting and surveillance over AERS quarterly data."""

from .ingest import (
    EMPTY_NAME,
    QuarterFiles,
    RejectLog,
    SubjectReport,
    TableSchema,
    discover_quarters,
    load_quarter,
    load_schema_config,
    normalize_drug_name,
    parse_table,
)
from .model import (
    CountStore,
    build_counts,
    export_snapshot,
    import_snapshot,
    merge_stores,
    slice_store,
    subject_weight,
)
from .quarters import Quarter, quarter_range
from .stats import (
    CorpusSummary,
    QuarterlyMeasures,
    corpus_summary,
    drug_quarter_measures,
    moments,
    percentile,
    standard_errors,
    top_n,
)
from .surveil import (
    Alert,
    BoxplotSummary,
    DetectionConfig,
    QuarterTrend,
    boxplot_summary,
    departure_scores,
    detect_outbreaks,
    population_trend,
)
from .synth import (
    GeneratedCorpus,
    GroundTruth,
    SynthConfig,
    generate_corpus,
    inject_spike,
    oracle_counts,
)

__version__ = "0.1.0"

__all__ = [
    "Alert",
    "BoxplotSummary",
    "CorpusSummary",
    "CountStore",
    "DetectionConfig",
    "EMPTY_NAME",
    "GeneratedCorpus",
    "GroundTruth",
    "Quarter",
    "QuarterFiles",
    "QuarterTrend",
    "QuarterlyMeasures",
    "RejectLog",
    "SubjectReport",
    "SynthConfig",
    "TableSchema",
    "boxplot_summary",
    "build_counts",
    "corpus_summary",
    "departure_scores",
    "detect_outbreaks",
    "discover_quarters",
    "drug_quarter_measures",
    "export_snapshot",
    "generate_corpus",
    "import_snapshot",
    "inject_spike",
    "load_quarter",
    "load_schema_config",
    "merge_stores",
    "moments",
    "normalize_drug_name",
    "oracle_counts",
    "parse_table",
    "percentile",
    "population_trend",
    "quarter_range",
    "slice_store",
    "standard_errors",
    "subject_weight",
    "top_n",
]
