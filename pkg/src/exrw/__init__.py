"""Controllable extract-rewrite-reward engine for multi-document summarization."""

from .config import ControlConfig
from .coherence import (
    CoherenceModel,
    CoherenceReport,
    CoherenceThresholds,
    Triplet,
    build_triplets,
    calibrate_thresholds,
    coherence_score,
    train_coherence,
    triplet_loss,
)
from .corpus import (
    ClusterRecord,
    Document,
    Sentence,
    build_cluster,
    content_hash,
    load_cluster_dataset,
    normalize_text,
    split_sentences,
)
from .coverage import CoverageModel, coverage_gain, pair_coverage
from .embedding import (
    CacheEmbeddingProvider,
    EmbeddingProviderConfig,
    FallbackEmbeddingProvider,
    RemoteEmbeddingProvider,
    cosine,
    embed_text,
    make_provider,
    mean_pool,
    write_cache_file,
)
from .estimators import CoherencePairScorer, ExtractRewriteSummarizer
from .metrics import (
    RewardBreakdown,
    RougeScore,
    rouge_l,
    rouge_n,
    step_reward,
    summary_reward,
    tokenize,
)
from .neural import (
    GradRecord,
    MlpParams,
    init_params,
    load_checkpoint,
    mlp_backward,
    mlp_forward,
    pair_features,
    save_checkpoint,
)
from .policy import (
    PolicyModels,
    SummaryState,
    Trajectory,
    TrajectoryStep,
    action_distribution,
    extract_trajectory,
    init_policy_models,
    num_sentences,
    selection_logit,
)
from .rewrite import (
    IdentityRewriter,
    RemoteRewriter,
    RewriteRequest,
    RewriteResult,
    RewriterConfig,
    make_rewriter,
    rewrite_identity,
    rewrite_remote,
)
from .trainer import TrainReport, grid_search, pretrain_policy, train_rl, trajectory_loss

__version__ = "0.1.0"

__all__ = [
    "CacheEmbeddingProvider",
    "ClusterRecord",
    "CoherenceModel",
    "CoherencePairScorer",
    "CoherenceReport",
    "CoherenceThresholds",
    "ControlConfig",
    "CoverageModel",
    "Document",
    "EmbeddingProviderConfig",
    "ExtractRewriteSummarizer",
    "FallbackEmbeddingProvider",
    "GradRecord",
    "IdentityRewriter",
    "MlpParams",
    "PolicyModels",
    "RemoteEmbeddingProvider",
    "RemoteRewriter",
    "RewardBreakdown",
    "RewriteRequest",
    "RewriteResult",
    "RewriterConfig",
    "RougeScore",
    "Sentence",
    "SummaryState",
    "TrainReport",
    "Trajectory",
    "TrajectoryStep",
    "Triplet",
    "action_distribution",
    "build_cluster",
    "build_triplets",
    "calibrate_thresholds",
    "coherence_score",
    "content_hash",
    "cosine",
    "coverage_gain",
    "embed_text",
    "extract_trajectory",
    "grid_search",
    "init_params",
    "init_policy_models",
    "load_checkpoint",
    "load_cluster_dataset",
    "make_provider",
    "make_rewriter",
    "mean_pool",
    "mlp_backward",
    "mlp_forward",
    "normalize_text",
    "num_sentences",
    "pair_coverage",
    "pair_features",
    "pretrain_policy",
    "rewrite_identity",
    "rewrite_remote",
    "rouge_l",
    "rouge_n",
    "save_checkpoint",
    "selection_logit",
    "split_sentences",
    "step_reward",
    "summary_reward",
    "tokenize",
    "train_coherence",
    "train_rl",
    "trajectory_loss",
    "triplet_loss",
    "write_cache_file",
]
