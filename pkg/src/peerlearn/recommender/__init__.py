"""Discussion recommendation: relevance model, constrained assignment, metrics."""

from .assign import (
    AssignmentProblem,
    baseline_filter,
    constraint_filter,
    evaluate_ob,
    mode_flags,
)
from .centrality import hits_centrality
from .relevance import (
    DiscussionFeatures,
    MapResult,
    RelevanceModel,
    UserFeatures,
    average_precision,
    evaluate_map,
    load_discussions_jsonl,
    load_participation_csv,
    loss_and_gradients,
    split_per_user,
    train_relevance,
)

__all__ = [
    "AssignmentProblem",
    "DiscussionFeatures",
    "MapResult",
    "RelevanceModel",
    "UserFeatures",
    "average_precision",
    "baseline_filter",
    "constraint_filter",
    "evaluate_map",
    "evaluate_ob",
    "hits_centrality",
    "load_discussions_jsonl",
    "load_participation_csv",
    "loss_and_gradients",
    "mode_flags",
    "split_per_user",
    "train_relevance",
]
