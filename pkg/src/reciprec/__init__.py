"""Collaborative filtering recommenders for reciprocal bipartite networks.

Three models share one pipeline: a baseline that looks only at who
initiated contact, a reciprocity-only model that keeps answered contacts,
and a hybrid model that tracks taste (who a user writes to) and
attractiveness (who writes back) separately.
"""
from .contact_log import (
    ContactEvent, DyadRecord, Gender, ServiceUserSet, UserRecord, UserTable,
    aggregate_dyads, parse_contacts, parse_users, select_service_users, split_by_day,
)
from .matrices import (
    BASELINE, HYBRID, MODEL_KINDS, RECIPROCITY_ONLY, BinaryContactMatrix, DyadCell, DyadContactMatrix,
    build_baseline, build_hybrid, build_reciprocity_only, compute_degrees,
)
from .similarity import SimilarityMatrix, cosine_similarity, f_agreement, hybrid_similarity
from .recommender import (
    RecommendationList, RecommenderConfig, candidate_set, g_penalty, recommend_all, score_candidates, top_k,
)
from .evaluation import (
    GroundTruth, UserMetrics, aggregate_city, aggregate_individual, ground_truth, precision_recall_at_k,
)
from .cohort import attribute_distance, sr_ur_split, welch_t_test
from .synthgen import DatasetStats, SynthConfig, generate, generate_log, summarize

__version__ = "0.1.0"

__all__ = [
    "ContactEvent",
    "DyadRecord",
    "Gender",
    "ServiceUserSet",
    "UserRecord",
    "UserTable",
    "aggregate_dyads",
    "parse_contacts",
    "parse_users",
    "select_service_users",
    "split_by_day",
    "BASELINE",
    "HYBRID",
    "MODEL_KINDS",
    "RECIPROCITY_ONLY",
    "BinaryContactMatrix",
    "DyadCell",
    "DyadContactMatrix",
    "build_baseline",
    "build_hybrid",
    "build_reciprocity_only",
    "compute_degrees",
    "SimilarityMatrix",
    "cosine_similarity",
    "f_agreement",
    "hybrid_similarity",
    "RecommendationList",
    "RecommenderConfig",
    "candidate_set",
    "g_penalty",
    "recommend_all",
    "score_candidates",
    "top_k",
    "GroundTruth",
    "UserMetrics",
    "aggregate_city",
    "aggregate_individual",
    "ground_truth",
    "precision_recall_at_k",
    "attribute_distance",
    "sr_ur_split",
    "welch_t_test",
    "DatasetStats",
    "SynthConfig",
    "generate",
    "generate_log",
    "summarize",
]
