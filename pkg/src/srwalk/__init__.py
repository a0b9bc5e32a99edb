"""Supervised random walks: learn edge strengths so a restarting walk ranks future links first."""

from .evalkit import auc, baseline_scores, prec_at_k, run_experiment
from .graph_model import (
    FeatureTransform,
    Graph,
    TrainingInstance,
    UntrainableInstance,
    add_common_friends_feature,
    edge_type,
    explicit_instance,
    standardize_features,
    two_hop_instance,
)
from .loss import LossSpec, h, h_prime, pairwise_loss, pairwise_loss_fast
from .strength import Model, strength, strength_grad
from .trainer import TrainConfig, TrainReport, objective, predict, train
from .walker import (
    TransitionView,
    WalkNotConverged,
    WalkState,
    build_transition,
    normalize_candidates,
    pagerank,
    pagerank_derivative,
    transition_grad_entry,
)

__all__ = [
    "FeatureTransform", "Graph", "LossSpec", "Model", "TrainConfig", "TrainReport", "TrainingInstance",
    "TransitionView", "UntrainableInstance", "WalkNotConverged", "WalkState", "add_common_friends_feature",
    "auc", "baseline_scores", "build_transition", "edge_type", "explicit_instance", "h", "h_prime",
    "normalize_candidates", "objective", "pagerank", "pagerank_derivative", "pairwise_loss",
    "pairwise_loss_fast", "prec_at_k", "predict", "run_experiment", "standardize_features", "strength",
    "strength_grad", "train", "transition_grad_entry", "two_hop_instance",
]
