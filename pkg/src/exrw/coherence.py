"""Pairwise coherence scorer, triplet construction, and pre-training.

Consecutive sentences of a human-written reference summary form positive
pairs; a randomly drawn source sentence and the anchor paired with itself
form the two kinds of negatives. A hinge triplet loss drives the positive
pair's score above the negative pair's by a margin. Threshold calibration
over cosine bands is a diagnostic only and never feeds the policy.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ControlConfig
from .corpus import ClusterRecord, split_sentences
from .embedding import EmbeddingProvider, cosine
from .neural import (
    GradRecord,
    MlpParams,
    accumulate_backward_batch,
    mlp_forward,
    mlp_forward_batch,
    pair_features,
    zero_grad,
)

logger = logging.getLogger(__name__)

# Decision-threshold search grid for pair classification (0.05 .. 0.95).
THRESHOLD_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))


@dataclass
class CoherenceModel:
    params: MlpParams

    def copy(self) -> "CoherenceModel":
        return CoherenceModel(self.params.copy())


@dataclass
class Triplet:
    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray
    negative_kind: str  # one of {random_source, self_pair}
    anchor_text: str = ""
    positive_text: str = ""
    negative_text: str = ""


@dataclass(frozen=True)
class CoherenceThresholds:
    """Incoherence floor t1 and redundancy ceiling t2 in cosine space."""

    t1: float
    t2: float

    def __post_init__(self):
        if not (0.0 <= self.t1 < self.t2 <= 1.0):
            raise ValueError(f"thresholds must satisfy 0 <= t1 < t2 <= 1, got ({self.t1}, {self.t2})")


@dataclass
class CalibrationReport:
    thresholds: CoherenceThresholds | None
    ok: bool
    incoherent_mean: float
    positive_mean: float
    redundant_mean: float
    reason: str = ""


@dataclass
class CoherenceReport:
    precision: float
    recall: float
    f1: float
    threshold: float
    epochs: int
    mean_loss: list[float]


def coherence_score(m: CoherenceModel, x1: np.ndarray, x2: np.ndarray) -> float:
    """Order-sensitive pair score in (0,1); no bidirectional averaging."""
    return mlp_forward(m.params, pair_features(x1, x2))


def build_triplets(
    clusters: Sequence[ClusterRecord],
    provider: EmbeddingProvider,
    seed: int,
) -> list[Triplet]:
    """Construct training triplets from reference summaries.

    Each consecutive reference-sentence pair yields one triplet with a
    uniformly sampled source-sentence negative and one with the anchor
    itself as the negative. Deterministic given the seed; clusters
    without a reference summary are skipped (counted in one warning).
    """
    rng = np.random.default_rng(seed)
    triplets: list[Triplet] = []
    skipped = 0
    for cluster in clusters:
        if not cluster.reference_summary or not cluster.reference_summary.strip():
            skipped += 1
            continue
        ref_texts = split_sentences(cluster.reference_summary)
        if len(ref_texts) < 2:
            continue
        source_texts = [s.text for s in cluster.sentences]
        ref_vecs = provider.embed(ref_texts)
        source_vecs = provider.embed(source_texts)
        for i in range(len(ref_texts) - 1):
            anchor, positive = ref_vecs[i], ref_vecs[i + 1]
            neg_idx = int(rng.integers(0, len(source_vecs)))
            triplets.append(
                Triplet(
                    anchor=anchor,
                    positive=positive,
                    negative=source_vecs[neg_idx],
                    negative_kind="random_source",
                    anchor_text=ref_texts[i],
                    positive_text=ref_texts[i + 1],
                    negative_text=source_texts[neg_idx],
                )
            )
            triplets.append(
                Triplet(
                    anchor=anchor,
                    positive=positive,
                    negative=anchor,
                    negative_kind="self_pair",
                    anchor_text=ref_texts[i],
                    positive_text=ref_texts[i + 1],
                    negative_text=ref_texts[i],
                )
            )
    if skipped:
        logger.warning("build_triplets skipped %d clusters without a reference summary", skipped)
    return triplets


def export_triplets(triplets: Sequence[Triplet], path: str | Path) -> None:
    """Dump triplets as JSONL for inspection."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in triplets:
            fh.write(
                json.dumps(
                    {
                        "anchor": t.anchor_text,
                        "positive": t.positive_text,
                        "negative": t.negative_text,
                        "kind": t.negative_kind,
                    }
                )
                + "\n"
            )


def triplet_loss(
    m: CoherenceModel, t: Triplet, margin: float
) -> tuple[float, GradRecord]:
    """Hinge loss max(0, margin + Coh(a,n) - Coh(a,p)) and its gradient.

    Zero-loss triplets get exactly zero gradient (subgradient convention
    at the kink).
    """
    if margin <= 0:
        raise ValueError("margin must be > 0")
    s_pos = coherence_score(m, t.anchor, t.positive)
    s_neg = coherence_score(m, t.anchor, t.negative)
    loss = max(0.0, margin + s_neg - s_pos)
    grad = zero_grad(m.params)
    if loss > 0.0:
        f_pos = pair_features(t.anchor, t.positive)
        f_neg = pair_features(t.anchor, t.negative)
        accumulate_backward_batch(
            m.params, f_neg[None, :], np.array([s_neg]), np.array([1.0]), grad
        )
        accumulate_backward_batch(
            m.params, f_pos[None, :], np.array([s_pos]), np.array([-1.0]), grad
        )
    return loss, grad


def _pair_matrices(triplets: Sequence[Triplet]) -> tuple[np.ndarray, np.ndarray]:
    pos = np.stack([pair_features(t.anchor, t.positive) for t in triplets])
    neg = np.stack([pair_features(t.anchor, t.negative) for t in triplets])
    return pos, neg


def labeled_pairs(triplets: Sequence[Triplet]) -> tuple[np.ndarray, np.ndarray]:
    """Balanced classification view: features and 1/0 labels per pair."""
    pos, neg = _pair_matrices(triplets)
    feats = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return feats, labels


def _prf(predictions: np.ndarray, labels: np.ndarray) -> tuple[float, float, float]:
    tp = float(np.sum((predictions == 1) & (labels == 1)))
    fp = float(np.sum((predictions == 1) & (labels == 0)))
    fn = float(np.sum((predictions == 0) & (labels == 1)))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def evaluate_pairs(
    m: CoherenceModel,
    feats: np.ndarray,
    labels: np.ndarray,
    threshold: float,
) -> tuple[float, float, float]:
    """Precision/recall/F of 'coherent iff score > threshold' on labeled pairs."""
    scores = mlp_forward_batch(m.params, feats)
    return _prf((scores > threshold).astype(int), labels.astype(int))


def train_coherence(
    triplets: Sequence[Triplet],
    config: ControlConfig,
) -> tuple[CoherenceModel, CoherenceReport]:
    """Pre-train the coherence scorer by full-batch gradient descent.

    Splits triplets 80/10/10 into train/dev/test (seeded shuffle),
    minimizes the mean hinge loss, picks the decision threshold on dev
    (max F, lowest threshold on ties), and reports test P/R/F.
    """
    from .neural import init_params

    if not triplets:
        raise ValueError("no triplets to train on")
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(triplets))
    n_dev = max(1, len(triplets) // 10)
    n_test = max(1, len(triplets) // 10)
    n_train = len(triplets) - n_dev - n_test
    if n_train < 1:
        raise ValueError("empty train split: need at least 3 triplets")
    shuffled = [triplets[i] for i in order]
    train = shuffled[:n_train]
    dev = shuffled[n_train : n_train + n_dev]
    test = shuffled[n_train + n_dev :]
    if not dev or not test:
        raise ValueError("empty dev or test split")

    dim = int(np.asarray(train[0].anchor).shape[0])
    model = CoherenceModel(init_params(5 * dim, rng))

    f_pos, f_neg = _pair_matrices(train)
    mean_losses: list[float] = []
    n = len(train)
    for _ in range(config.coherence_epochs):
        s_pos = mlp_forward_batch(model.params, f_pos)
        s_neg = mlp_forward_batch(model.params, f_neg)
        losses = np.maximum(0.0, config.margin + s_neg - s_pos)
        mean_losses.append(float(losses.mean()))
        active = losses > 0.0
        if not np.any(active):
            continue
        grad = zero_grad(model.params)
        upstream = active.astype(float) / n
        accumulate_backward_batch(model.params, f_neg, s_neg, upstream, grad)
        accumulate_backward_batch(model.params, f_pos, s_pos, -upstream, grad)
        model.params.weights -= config.coherence_lr * grad.d_weights
        model.params.bias -= config.coherence_lr * grad.d_bias

    dev_feats, dev_labels = labeled_pairs(dev)
    best_threshold, best_f = THRESHOLD_GRID[0], -1.0
    for threshold in THRESHOLD_GRID:
        _, _, f1 = evaluate_pairs(model, dev_feats, dev_labels, threshold)
        if f1 > best_f:
            best_threshold, best_f = threshold, f1

    test_feats, test_labels = labeled_pairs(test)
    precision, recall, f1 = evaluate_pairs(model, test_feats, test_labels, best_threshold)
    report = CoherenceReport(
        precision=precision,
        recall=recall,
        f1=f1,
        threshold=best_threshold,
        epochs=config.coherence_epochs,
        mean_loss=mean_losses,
    )
    return model, report


def _mean_cosine(pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    if not pairs:
        raise ValueError("pair set must be nonempty")
    return float(np.mean([cosine(a, b) for a, b in pairs]))


def calibrate_thresholds(
    m: CoherenceModel,
    positive_pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    incoherent_pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    redundant_pairs: Sequence[tuple[np.ndarray, np.ndarray]],
) -> CalibrationReport:
    """Diagnostic cosine-band thresholds: never used by the policy.

    t1 is the midpoint of the incoherent and positive cosine means, t2 of
    the positive and redundant means. Degenerate ordering is reported as
    a calibration failure, not raised.
    """
    inc_mean = _mean_cosine(incoherent_pairs)
    pos_mean = _mean_cosine(positive_pairs)
    red_mean = _mean_cosine(redundant_pairs)
    t1 = (inc_mean + pos_mean) / 2.0
    t2 = (pos_mean + red_mean) / 2.0
    t1 = max(0.0, t1)
    t2 = min(1.0, t2)
    if not t1 < t2:
        return CalibrationReport(
            thresholds=None,
            ok=False,
            incoherent_mean=inc_mean,
            positive_mean=pos_mean,
            redundant_mean=red_mean,
            reason=f"degenerate ordering: t1={t1:.4f} >= t2={t2:.4f}",
        )
    return CalibrationReport(
        thresholds=CoherenceThresholds(t1, t2),
        ok=True,
        incoherent_mean=inc_mean,
        positive_mean=pos_mean,
        redundant_mean=red_mean,
    )
