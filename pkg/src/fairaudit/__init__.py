"""fairaudit: individual-fairness consistency auditing for decision processes.

The library compares how consistently different decision sources (human
funnel stages and built-in classifiers) treat similar profiles, where
similarity comes from nearest-neighbor search over per-field text embeddings.
See the README for the pipeline walkthrough and the CLI surface.
"""

__version__ = "0.1.0"

from .audit import (
    AuditConfig,
    AuditReport,
    ReportRow,
    compare_sources,
    render_report,
    run_audit,
)
from .classifiers import (
    BiRnnClassifier,
    BoostedStumps,
    KnnClassifier,
    SearchResult,
    Stump,
    TrainConfig,
    TrainHistory,
    birnn_forward,
    birnn_train,
    gradient_check,
    knn_predict,
    load_model,
    random_search,
    save_model,
    train_stumps,
)
from .dataset import (
    FIELD_ORDER,
    STAGES,
    DecisionVector,
    LatentRecord,
    Profile,
    RaterConfig,
    SplitAssignment,
    attach_stage_labels,
    binarize_labels,
    generate_synthetic_corpus,
    load_corpus,
    load_decisions,
    load_latents,
    load_split,
    save_corpus,
    save_decisions,
    save_latents,
    save_split,
    simulate_raters,
    split_corpus,
)
from .embed import (
    EmbeddingMatrix,
    embed_corpus,
    hash_embed_field,
    ingest_embeddings,
    normalize_field_blocks,
    save_embeddings,
)
from .fairness import (
    ClassificationMetrics,
    ConsistencyResult,
    classification_metrics,
    consistency,
    consistency_gap,
)
from .simindex import (
    NeighborList,
    knn_batched,
    knn_exact,
    knn_feature_reranked,
    load_neighbors,
    pairwise_similarity,
    save_neighbors,
)

__all__ = [
    "AuditConfig",
    "AuditReport",
    "BiRnnClassifier",
    "BoostedStumps",
    "ClassificationMetrics",
    "ConsistencyResult",
    "DecisionVector",
    "EmbeddingMatrix",
    "FIELD_ORDER",
    "KnnClassifier",
    "LatentRecord",
    "NeighborList",
    "Profile",
    "RaterConfig",
    "ReportRow",
    "STAGES",
    "SearchResult",
    "SplitAssignment",
    "Stump",
    "TrainConfig",
    "TrainHistory",
    "attach_stage_labels",
    "binarize_labels",
    "birnn_forward",
    "birnn_train",
    "classification_metrics",
    "compare_sources",
    "consistency",
    "consistency_gap",
    "embed_corpus",
    "generate_synthetic_corpus",
    "gradient_check",
    "hash_embed_field",
    "ingest_embeddings",
    "knn_batched",
    "knn_exact",
    "knn_feature_reranked",
    "knn_predict",
    "load_corpus",
    "load_decisions",
    "load_latents",
    "load_model",
    "load_neighbors",
    "load_split",
    "normalize_field_blocks",
    "pairwise_similarity",
    "random_search",
    "render_report",
    "run_audit",
    "save_corpus",
    "save_decisions",
    "save_embeddings",
    "save_latents",
    "save_model",
    "save_neighbors",
    "save_split",
    "simulate_raters",
    "split_corpus",
    "train_stumps",
]
