"""Two-phase optimization of the extraction policy.

Pretraining fits the coverage networks as a regression of action
probabilities onto per-sentence rewards (coherence and embeddings stay
frozen); the joint phase adds the REINFORCE term and also updates the
coherence network. Updates are plain gradient descent applied once per
sampled trajectory, so a (seed, config, dataset, identity-rewriter) tuple
fully determines every checkpoint byte.

The regression term's sign follows the printed loss by default
(subtracted); `regression_sign="penalty"` flips it to a conventional
penalty. Both variants are exercised by the training sanity tests.
"""
from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ControlConfig
from .corpus import ClusterRecord
from .embedding import EmbeddingProvider
from .metrics import step_reward, summary_reward, tokenize, rouge_l, rouge_n
from .neural import GradRecord, accumulate_backward_batch, save_checkpoint, zero_grad
from .policy import (
    PolicyModels,
    SummaryState,
    Trajectory,
    extract_from_vectors,
    step_forward,
)
from .rewrite import IdentityRewriter, RewriteError, RewriteRequest

logger = logging.getLogger(__name__)

_PHASE_PRETRAIN = 1
_PHASE_RL = 2


@dataclass
class TrainReport:
    phase: str  # {pretrain, rl}
    epochs: int
    mean_loss: list[float] = field(default_factory=list)
    mean_reward: list[float] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)
    checkpoint_path: str = ""


def _derive_seed(base_seed: int, phase: int, epoch: int, item: int) -> int:
    """Stable per-trajectory sampling seed."""
    ss = np.random.SeedSequence([base_seed, phase, epoch, item])
    return int(ss.generate_state(1)[0])


def loss_from_probs(
    probs: Sequence[float],
    step_rewards: Sequence[float],
    final_reward: float,
    lambda_: float,
    regression_sign: str = "paper",
) -> tuple[float, list[float]]:
    """Trajectory loss and dLoss/dprob per step, rewards held constant.

    loss = -R * sum(log p_t) -/+ lambda * (1/TN) * sum((p_t - r_t)^2)
    with '-' for regression_sign="paper" (as printed) and '+' for
    "penalty".
    """
    if len(probs) != len(step_rewards) or not probs:
        raise ValueError("probs and step_rewards must be nonempty and equal length")
    if any(p <= 0.0 for p in probs):
        raise ValueError("zero or negative action probability recorded: corrupt trajectory")
    sign = -1.0 if regression_sign == "paper" else 1.0
    tn = len(probs)
    reinforce = -final_reward * sum(np.log(p) for p in probs)
    mse = sum((p - r) ** 2 for p, r in zip(probs, step_rewards)) / tn
    loss = reinforce + sign * lambda_ * mse
    upstreams = [
        -final_reward / p + sign * 2.0 * lambda_ * (p - r) / tn
        for p, r in zip(probs, step_rewards)
    ]
    return float(loss), upstreams


def regression_loss_from_probs(
    probs: Sequence[float],
    step_rewards: Sequence[float],
    lambda_: float,
) -> tuple[float, list[float]]:
    """Pretraining objective: the lambda-weighted regression term alone, minimized."""
    if len(probs) != len(step_rewards) or not probs:
        raise ValueError("probs and step_rewards must be nonempty and equal length")
    tn = len(probs)
    mse = sum((p - r) ** 2 for p, r in zip(probs, step_rewards)) / tn
    upstreams = [2.0 * lambda_ * (p - r) / tn for p, r in zip(probs, step_rewards)]
    return float(lambda_ * mse), upstreams


def trajectory_loss(
    traj: Trajectory, lambda_: float, regression_sign: str = "paper"
) -> tuple[float, list[float]]:
    """Loss of a recorded trajectory whose rewards are populated."""
    if traj.final_reward is None or any(s.step_reward is None for s in traj.steps):
        raise ValueError("trajectory is missing final_reward or step rewards")
    return loss_from_probs(
        [s.prob for s in traj.steps],
        [s.step_reward for s in traj.steps],
        traj.final_reward,
        lambda_,
        regression_sign,
    )


def _new_grads(models: PolicyModels) -> dict[str, GradRecord]:
    return {
        "coverage_fwd": zero_grad(models.coverage.forward),
        "coverage_bwd": zero_grad(models.coverage.backward),
        "coherence": zero_grad(models.coherence.params),
    }


def replay_trajectory(
    models: PolicyModels,
    cfg: ControlConfig,
    vectors: Sequence[np.ndarray],
    indices: Sequence[int],
    step_rewards: Sequence[float],
    final_reward: float,
    objective: str = "rl",
) -> tuple[float, list[float], dict[str, GradRecord]]:
    """Recompute a fixed trajectory's loss and its parameter gradients.

    objective="rl" uses the full loss (REINFORCE + signed regression);
    objective="pretrain" uses the regression term alone. Gradients flow
    loss -> softmax -> logits -> MLP parameters; rewards are constants.
    """
    state = SummaryState()
    forwards = []
    probs: list[float] = []
    for idx in indices:
        fwd = step_forward(models, cfg, vectors, state, keep_caches=True)
        probs.append(fwd.prob_of(idx))
        forwards.append(fwd)
        state.add(idx)

    if objective == "rl":
        loss, upstreams = loss_from_probs(
            probs, step_rewards, final_reward, cfg.lambda_, cfg.regression_sign
        )
    elif objective == "pretrain":
        loss, upstreams = regression_loss_from_probs(probs, step_rewards, cfg.lambda_)
    else:
        raise ValueError(f"unknown objective {objective!r}")

    grads = _new_grads(models)
    for fwd, chosen, upstream in zip(forwards, indices, upstreams):
        a_pos = fwd.candidates.index(chosen)
        p = fwd.probs
        # d p_chosen / d z_j = p_chosen * (delta_j,chosen - p_j)
        dz = upstream * p[a_pos] * ((np.arange(len(p)) == a_pos).astype(float) - p)
        for pos, cache in enumerate(fwd.caches):
            dz_j = float(dz[pos])
            if dz_j == 0.0:
                continue
            if cfg.cl1 != 0.0 and cache.cov_scores_fwd is not None:
                n_others = len(cache.cov_scores_fwd)
                pair_up = np.full(n_others, dz_j * cfg.cl1 * 0.5 / n_others)
                accumulate_backward_batch(
                    models.coverage.forward,
                    cache.cov_feats_fwd,
                    cache.cov_scores_fwd,
                    pair_up,
                    grads["coverage_fwd"],
                )
                accumulate_backward_batch(
                    models.coverage.backward,
                    cache.cov_feats_bwd,
                    cache.cov_scores_bwd,
                    pair_up,
                    grads["coverage_bwd"],
                )
            if cfg.cl2 != 0.0 and cache.coh_feat is not None:
                accumulate_backward_batch(
                    models.coherence.params,
                    cache.coh_feat[None, :],
                    np.array([cache.coh_score]),
                    np.array([dz_j * cfg.cl2]),
                    grads["coherence"],
                )
    return loss, probs, grads


def _apply(grads: dict[str, GradRecord], models: PolicyModels, lr: float, coverage_only: bool) -> None:
    models.coverage.forward.weights -= lr * grads["coverage_fwd"].d_weights
    models.coverage.forward.bias -= lr * grads["coverage_fwd"].d_bias
    models.coverage.backward.weights -= lr * grads["coverage_bwd"].d_weights
    models.coverage.backward.bias -= lr * grads["coverage_bwd"].d_bias
    if not coverage_only:
        models.coherence.params.weights -= lr * grads["coherence"].d_weights
        models.coherence.params.bias -= lr * grads["coherence"].d_bias


def _require_references(clusters: Sequence[ClusterRecord]) -> None:
    for cluster in clusters:
        if not cluster.reference_summary or not cluster.reference_summary.strip():
            raise ValueError(f"cluster {cluster.id!r} has no reference summary")


def _write_log_line(log_path, phase: str, epoch: int, mean_loss: float, mean_reward: float, skipped: int) -> None:
    if log_path is None:
        return
    with open(log_path, "a", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {
                    "phase": phase,
                    "epoch": epoch,
                    "mean_loss": mean_loss,
                    "mean_reward": mean_reward,
                    "skipped": skipped,
                }
            )
            + "\n"
        )


def _run_phase(
    phase: str,
    clusters: Sequence[ClusterRecord],
    models: PolicyModels,
    cfg: ControlConfig,
    provider: EmbeddingProvider,
    rewriter,
    epochs: int,
    lr: float,
    coverage_only: bool,
    checkpoint_path: str | Path | None,
    log_path: str | Path | None,
) -> TrainReport:
    _require_references(clusters)
    phase_id = _PHASE_PRETRAIN if phase == "pretrain" else _PHASE_RL
    objective = "pretrain" if phase == "pretrain" else "rl"
    # Embeddings are computed once up front and never touched again.
    cluster_vectors = [provider.embed([s.text for s in c.sentences]) for c in clusters]
    report = TrainReport(phase=phase, epochs=epochs)

    for epoch in range(epochs):
        losses: list[float] = []
        rewards: list[float] = []
        skipped = 0
        for ci, cluster in enumerate(clusters):
            vectors = cluster_vectors[ci]
            seed = _derive_seed(cfg.seed, phase_id, epoch, ci)
            traj = extract_from_vectors(models, cfg, cluster.id, vectors, mode="sample", seed=seed)
            texts = [cluster.sentences[i].text for i in traj.indices]
            try:
                rewritten = rewriter.rewrite(RewriteRequest(sentences=texts)).text
            except RewriteError as exc:
                logger.warning("rewrite failed for cluster %s: %s", cluster.id, exc)
                skipped += 1
                continue
            ref = cluster.reference_summary
            r_ts = [step_reward(t, ref, provider).total for t in texts]
            final = summary_reward(rewritten, ref, provider).total
            loss, _, grads = replay_trajectory(
                models, cfg, vectors, traj.indices, r_ts, final, objective=objective
            )
            _apply(grads, models, lr, coverage_only)
            losses.append(loss)
            rewards.append(final)
        if skipped > len(clusters) / 2:
            raise RuntimeError(
                f"{phase}: rewriter failed for {skipped}/{len(clusters)} clusters in epoch "
                f"{epoch}; aborting (transport noise must not masquerade as policy signal)"
            )
        mean_loss = float(np.mean(losses)) if losses else 0.0
        mean_reward = float(np.mean(rewards)) if rewards else 0.0
        report.mean_loss.append(mean_loss)
        report.mean_reward.append(mean_reward)
        report.skipped.append(skipped)
        _write_log_line(log_path, phase, epoch, mean_loss, mean_reward, skipped)

    if checkpoint_path is not None:
        dim = len(cluster_vectors[0][0]) if cluster_vectors and cluster_vectors[0] else 0
        save_checkpoint(checkpoint_path, models.to_dict(), cfg, dim)
        report.checkpoint_path = str(checkpoint_path)
    return report


def pretrain_policy(
    clusters: Sequence[ClusterRecord],
    models: PolicyModels,
    cfg: ControlConfig,
    provider: EmbeddingProvider,
    rewriter=None,
    checkpoint_path: str | Path | None = None,
    log_path: str | Path | None = None,
) -> TrainReport:
    """Phase one: regression-only updates of the coverage networks.

    The coherence parameters and the sentence embeddings are left
    bit-identical; the reward column of the report is informational.
    """
    rewriter = rewriter or IdentityRewriter()
    return _run_phase(
        "pretrain",
        clusters,
        models,
        cfg,
        provider,
        rewriter,
        epochs=cfg.pretrain_epochs,
        lr=cfg.lr_pretrain,
        coverage_only=True,
        checkpoint_path=checkpoint_path,
        log_path=log_path,
    )


def train_rl(
    clusters: Sequence[ClusterRecord],
    models: PolicyModels,
    cfg: ControlConfig,
    provider: EmbeddingProvider,
    rewriter=None,
    checkpoint_path: str | Path | None = None,
    log_path: str | Path | None = None,
) -> TrainReport:
    """Phase two: joint REINFORCE + regression updates of all networks.

    Trajectories whose rewrite failed are dropped and counted; an epoch
    with a failure rate above 50% aborts with a diagnostic.
    """
    rewriter = rewriter or IdentityRewriter()
    return _run_phase(
        "rl",
        clusters,
        models,
        cfg,
        provider,
        rewriter,
        epochs=cfg.rl_epochs,
        lr=cfg.lr_rl,
        coverage_only=False,
        checkpoint_path=checkpoint_path,
        log_path=log_path,
    )


GRID_KEYS = ("cl1", "cl2", "k", "c", "lambda_")


def grid_search(
    dev_clusters: Sequence[ClusterRecord],
    grids: dict[str, Sequence[float]],
    models: PolicyModels,
    cfg: ControlConfig,
    provider: EmbeddingProvider,
    rewriter=None,
) -> tuple[ControlConfig, list[dict]]:
    """Exhaustive Cartesian search maximizing mean ROUGE-2 + ROUGE-L F1 on dev.

    Extraction is greedy with the configured rewriter; ties keep the
    first grid point in iteration order.
    """
    _require_references(dev_clusters)
    rewriter = rewriter or IdentityRewriter()
    for key in GRID_KEYS:
        if key in grids and len(grids[key]) == 0:
            raise ValueError(f"empty grid for {key}")
    axes = [list(grids.get(key, [getattr(cfg, key)])) for key in GRID_KEYS]
    cluster_vectors = [provider.embed([s.text for s in c.sentences]) for c in dev_clusters]
    ref_tokens = [tokenize(c.reference_summary) for c in dev_clusters]

    table: list[dict] = []
    best_cfg: ControlConfig | None = None
    best_score = -np.inf
    for values in itertools.product(*axes):
        candidate_cfg = cfg.replace(**dict(zip(GRID_KEYS, values)))
        scores = []
        for ci, cluster in enumerate(dev_clusters):
            traj = extract_from_vectors(
                models, candidate_cfg, cluster.id, cluster_vectors[ci], mode="greedy"
            )
            texts = [cluster.sentences[i].text for i in traj.indices]
            rewritten = rewriter.rewrite(RewriteRequest(sentences=texts)).text
            cand_tokens = tokenize(rewritten)
            scores.append(
                rouge_n(cand_tokens, ref_tokens[ci], 2).f1 + rouge_l(cand_tokens, ref_tokens[ci]).f1
            )
        objective = float(np.mean(scores))
        row = {key.rstrip("_"): value for key, value in zip(GRID_KEYS, values)}
        row["objective"] = objective
        table.append(row)
        if objective > best_score:
            best_score = objective
            best_cfg = candidate_cfg
    return best_cfg, table
