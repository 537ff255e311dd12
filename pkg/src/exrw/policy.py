"""Extraction policy: selection logits, softmax over the remaining pool,
sentence budget, and trajectory generation.

The logit of a candidate is cl1 times its coverage gain over the pool
(excluding itself) plus cl2 times its coherence with the previously
selected sentence; the first step has no predecessor, so its coherence
term is zero and the first pick is pure coverage.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ControlConfig
from .coherence import CoherenceModel, coherence_score
from .corpus import ClusterRecord
from .coverage import CoverageModel, coverage_gain
from .embedding import EmbeddingProvider, cosine
from .neural import MlpParams, init_params, mlp_forward, pair_features

# Guards the floor at exact-integer boundaries against float rounding in
# the variance sum; far below any meaningful budget difference.
_FLOOR_EPS = 1e-9


@dataclass
class PolicyModels:
    coverage: CoverageModel
    coherence: CoherenceModel

    def copy(self) -> "PolicyModels":
        return PolicyModels(self.coverage.copy(), self.coherence.copy())

    def to_dict(self) -> dict[str, MlpParams]:
        return {
            "coverage_fwd": self.coverage.forward,
            "coverage_bwd": self.coverage.backward,
            "coherence": self.coherence.params,
        }

    @classmethod
    def from_dict(cls, models: dict[str, MlpParams]) -> "PolicyModels":
        try:
            return cls(
                coverage=CoverageModel(models["coverage_fwd"], models["coverage_bwd"]),
                coherence=CoherenceModel(models["coherence"]),
            )
        except KeyError as exc:
            raise ValueError(f"checkpoint missing model {exc.args[0]!r}") from exc


def init_policy_models(dim: int, seed: int) -> PolicyModels:
    """Fresh seeded models: coverage forward, coverage backward, coherence."""
    rng = np.random.default_rng(seed)
    in_dim = 5 * dim
    return PolicyModels(
        coverage=CoverageModel(init_params(in_dim, rng), init_params(in_dim, rng)),
        coherence=CoherenceModel(init_params(in_dim, rng)),
    )


@dataclass
class SummaryState:
    selected: list[int] = field(default_factory=list)

    @property
    def step(self) -> int:
        return len(self.selected)

    def add(self, index: int) -> None:
        if index in self.selected:
            raise ValueError(f"sentence {index} already selected")
        self.selected.append(index)


@dataclass
class TrajectoryStep:
    index: int
    prob: float
    step_reward: float | None = None


@dataclass
class Trajectory:
    cluster_id: str
    steps: list[TrajectoryStep]
    tn: int
    final_reward: float | None = None

    @property
    def indices(self) -> list[int]:
        return [s.index for s in self.steps]


@dataclass
class CandidateCache:
    """Forward-pass intermediates for one candidate, kept for backprop."""

    index: int
    gain: float
    coh: float
    cov_feats_fwd: np.ndarray | None  # (n_others, 5d) features (cand, other)
    cov_scores_fwd: np.ndarray | None
    cov_feats_bwd: np.ndarray | None  # (n_others, 5d) features (other, cand)
    cov_scores_bwd: np.ndarray | None
    coh_feat: np.ndarray | None
    coh_score: float | None


@dataclass
class StepForward:
    candidates: list[int]  # sorted remaining indices
    logits: np.ndarray
    probs: np.ndarray
    caches: list[CandidateCache]

    def prob_of(self, index: int) -> float:
        return float(self.probs[self.candidates.index(index)])


def selection_logit(
    cov: CoverageModel,
    coh: CoherenceModel,
    cfg: ControlConfig,
    xi: int,
    state: SummaryState,
    all_vectors: Sequence[np.ndarray],
) -> float:
    """Logit z = cl1 * coverage_gain + cl2 * coherence-with-previous."""
    if xi in state.selected:
        raise ValueError(f"sentence {xi} already selected")
    selected = set(state.selected)
    remaining_others = [all_vectors[j] for j in range(len(all_vectors)) if j not in selected and j != xi]
    z = cfg.cl1 * coverage_gain(cov, all_vectors[xi], remaining_others)
    if state.selected:
        prev = all_vectors[state.selected[-1]]
        z += cfg.cl2 * coherence_score(coh, prev, all_vectors[xi])
    return z


def step_forward(
    models: PolicyModels,
    cfg: ControlConfig,
    vectors: Sequence[np.ndarray],
    state: SummaryState,
    keep_caches: bool = False,
) -> StepForward:
    """Logits and softmax probabilities over the remaining candidates.

    With keep_caches=True the per-candidate forward intermediates are
    retained so the trainer can backpropagate through this step.
    """
    selected = set(state.selected)
    candidates = [i for i in range(len(vectors)) if i not in selected]
    if not candidates:
        raise ValueError("no remaining candidates")
    prev_vec = vectors[state.selected[-1]] if state.selected else None

    logits = np.empty(len(candidates))
    caches: list[CandidateCache] = []
    for pos, i in enumerate(candidates):
        others_idx = [j for j in candidates if j != i]
        cache = _candidate_forward(models, cfg, vectors, i, others_idx, prev_vec, keep_caches)
        logits[pos] = cfg.cl1 * cache.gain + cfg.cl2 * cache.coh
        caches.append(cache)

    shifted = logits - logits.max()
    exp = np.exp(shifted)
    probs = exp / exp.sum()
    return StepForward(candidates=candidates, logits=logits, probs=probs, caches=caches)


def _candidate_forward(
    models: PolicyModels,
    cfg: ControlConfig,
    vectors: Sequence[np.ndarray],
    i: int,
    others_idx: list[int],
    prev_vec: np.ndarray | None,
    keep: bool,
) -> CandidateCache:
    from .neural import mlp_forward_batch, pair_feature_matrix

    xi = np.asarray(vectors[i], dtype=float)
    if others_idx:
        others = np.stack([np.asarray(vectors[j], dtype=float) for j in others_idx])
        feats_fwd = pair_feature_matrix(xi, others)
        scores_fwd = mlp_forward_batch(models.coverage.forward, feats_fwd)
        diff = others - xi
        feats_bwd = np.concatenate(
            [others, np.broadcast_to(xi, others.shape), others * xi, diff, np.abs(diff)], axis=1
        )
        scores_bwd = mlp_forward_batch(models.coverage.backward, feats_bwd)
        gain = float(np.mean(0.5 * (scores_fwd + scores_bwd)))
    else:
        feats_fwd = scores_fwd = feats_bwd = scores_bwd = None
        gain = 0.0

    if prev_vec is not None:
        coh_feat = pair_features(prev_vec, xi)
        coh_score = mlp_forward(models.coherence.params, coh_feat)
    else:
        coh_feat = None
        coh_score = None

    return CandidateCache(
        index=i,
        gain=gain,
        coh=coh_score if coh_score is not None else 0.0,
        cov_feats_fwd=feats_fwd if keep else None,
        cov_scores_fwd=scores_fwd if keep else None,
        cov_feats_bwd=feats_bwd if keep else None,
        cov_scores_bwd=scores_bwd if keep else None,
        coh_feat=coh_feat if keep else None,
        coh_score=coh_score,
    )


def action_distribution(
    cov: CoverageModel,
    coh: CoherenceModel,
    cfg: ControlConfig,
    state: SummaryState,
    all_vectors: Sequence[np.ndarray],
) -> dict[int, float]:
    """Probability per remaining index; sums to 1 within 1e-9."""
    fwd = step_forward(PolicyModels(cov, coh), cfg, all_vectors, state)
    return {i: float(p) for i, p in zip(fwd.candidates, fwd.probs)}


def num_sentences(
    vectors: Sequence[np.ndarray], k: float, c: float, max_tn: int
) -> int:
    """Sentence budget TN = floor(k + c * var) over pairwise cosine similarities.

    The variance is the population variance over all unordered pairs.
    The budget is clamped to [1, max_tn]; truncation to the pool size
    happens at extraction time, not here.
    """
    n = len(vectors)
    if n < 2:
        return 1
    sims = []
    for i in range(n):
        for j in range(i + 1, n):
            sims.append(cosine(vectors[i], vectors[j]))
    arr = np.asarray(sims)
    variance = float(np.mean((arr - arr.mean()) ** 2))
    tn = math.floor(k + c * variance + _FLOOR_EPS)
    return max(1, min(tn, max_tn))


def extract_trajectory(
    models: PolicyModels,
    cfg: ControlConfig,
    cluster: ClusterRecord,
    provider: EmbeddingProvider,
    mode: str = "greedy",
    seed: int | None = None,
) -> Trajectory:
    """Roll out the policy over one cluster.

    mode="sample" draws from the action distribution (seeded);
    mode="greedy" takes the argmax with lowest-index tie-break. Selected
    sentences leave the candidate pool, so indices never repeat.
    """
    if mode not in ("greedy", "sample"):
        raise ValueError(f"mode must be 'greedy' or 'sample', got {mode!r}")
    vectors = provider.embed([s.text for s in cluster.sentences])
    return extract_from_vectors(models, cfg, cluster.id, vectors, mode, seed)


def extract_from_vectors(
    models: PolicyModels,
    cfg: ControlConfig,
    cluster_id: str,
    vectors: Sequence[np.ndarray],
    mode: str = "greedy",
    seed: int | None = None,
) -> Trajectory:
    """Trajectory generation when sentence vectors are already at hand."""
    n = len(vectors)
    tn = num_sentences(vectors, cfg.k, cfg.c, cfg.max_tn)
    steps_total = min(tn, n)
    rng = np.random.default_rng(seed) if mode == "sample" else None
    state = SummaryState()
    steps: list[TrajectoryStep] = []
    for _ in range(steps_total):
        fwd = step_forward(models, cfg, vectors, state)
        if mode == "sample":
            pos = int(rng.choice(len(fwd.candidates), p=fwd.probs))
        else:
            pos = int(np.argmax(fwd.probs))  # first max wins: lowest index
        chosen = fwd.candidates[pos]
        steps.append(TrajectoryStep(index=chosen, prob=float(fwd.probs[pos])))
        state.add(chosen)
    return Trajectory(cluster_id=cluster_id, steps=steps, tn=tn)


def trajectory_to_json(traj: Trajectory) -> dict:
    return {
        "cluster_id": traj.cluster_id,
        "steps": [{"index": s.index, "prob": s.prob} for s in traj.steps],
        "tn": traj.tn,
    }


def dump_trajectories(trajectories: Sequence[Trajectory], path: str | Path) -> None:
    """Debug dump, one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(json.dumps(trajectory_to_json(traj)) + "\n")
