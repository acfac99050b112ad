"""Acceptability probing for German verb argument structure.

Generates template-based sentence sets that contrast grammatical case
assignments with minimally different violations, scores them with n-gram
models or externally supplied scores, evaluates scorers by AUC over
minimal variation sets, and collects human ratings for comparison.
"""

__version__ = "0.1.0"

from .genset import (
    ACCEPTABLE_SEQUENCES,
    ARRANGEMENTS,
    VIOLATION_SEQUENCES,
    VIOLATION_TYPES,
    Dataset,
    MinimalVariationSet,
    SentenceRecord,
    Template,
    build_dataset,
    load_templates,
    minimal_variation_set,
    read_dataset,
)
from .lexicon import CASES, Case, Lexeme, Lexicon, inflect, load_lexicon
from .metrics import (
    AggregateTable,
    AnnotationRecord,
    ConstraintRanking,
    SetAuc,
    aggregate,
    auc,
    constraint_check,
    evaluate_sets,
    normalize_annotations,
    pearson,
    qc_filter,
)
from .scoring import (
    NgramModel,
    ScoreTable,
    export_requests,
    import_scores,
    score_records,
    train_ngram,
)
from .service import (
    AnnotationStore,
    Assignment,
    AssignmentConfig,
    create_assignment,
    derive_filler_pool,
    make_server,
)

__all__ = [
    "ACCEPTABLE_SEQUENCES",
    "ARRANGEMENTS",
    "VIOLATION_SEQUENCES",
    "VIOLATION_TYPES",
    "AggregateTable",
    "AnnotationRecord",
    "AnnotationStore",
    "Assignment",
    "AssignmentConfig",
    "CASES",
    "Case",
    "ConstraintRanking",
    "Dataset",
    "Lexeme",
    "Lexicon",
    "MinimalVariationSet",
    "NgramModel",
    "ScoreTable",
    "SentenceRecord",
    "SetAuc",
    "Template",
    "aggregate",
    "auc",
    "build_dataset",
    "constraint_check",
    "create_assignment",
    "derive_filler_pool",
    "evaluate_sets",
    "export_requests",
    "import_scores",
    "inflect",
    "load_lexicon",
    "load_templates",
    "make_server",
    "minimal_variation_set",
    "normalize_annotations",
    "pearson",
    "qc_filter",
    "read_dataset",
    "score_records",
    "train_ngram",
    "__version__",
]
