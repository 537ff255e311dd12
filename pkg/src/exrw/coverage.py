"""Bidirectional pairwise coverage scorer and its pool average.

A forward model scores (x_i, x_j) and a backward model scores (x_j, x_i)
with separate parameters; the pair score is their average. The coverage
gain of a candidate is the mean pair score against the remaining pool.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .neural import MlpParams, mlp_forward, mlp_forward_batch, pair_feature_matrix, pair_features


@dataclass
class CoverageModel:
    forward: MlpParams
    backward: MlpParams

    def __post_init__(self):
        if self.forward.in_dim != self.backward.in_dim:
            raise ValueError(
                f"forward in_dim {self.forward.in_dim} != backward in_dim {self.backward.in_dim}"
            )

    def copy(self) -> "CoverageModel":
        return CoverageModel(self.forward.copy(), self.backward.copy())


def pair_coverage(m: CoverageModel, xi: np.ndarray, xj: np.ndarray) -> float:
    """Average of the forward model on (xi, xj) and the backward model on (xj, xi)."""
    return 0.5 * (
        mlp_forward(m.forward, pair_features(xi, xj))
        + mlp_forward(m.backward, pair_features(xj, xi))
    )


def coverage_gain(m: CoverageModel, xi: np.ndarray, remaining: Sequence[np.ndarray]) -> float:
    """Mean pair coverage of xi against the remaining pool; 0 for an empty pool.

    The caller excludes xi itself from `remaining`. Duplicates in the pool
    are averaged as-is.
    """
    if len(remaining) == 0:
        return 0.0
    others = np.stack([np.asarray(v, dtype=float) for v in remaining])
    fwd = mlp_forward_batch(m.forward, pair_feature_matrix(xi, others))
    bwd_feats = np.concatenate(
        [
            others,
            np.broadcast_to(np.asarray(xi, dtype=float), others.shape),
            others * xi,
            others - xi,
            np.abs(others - xi),
        ],
        axis=1,
    )
    bwd = mlp_forward_batch(m.backward, bwd_feats)
    return float(np.mean(0.5 * (fwd + bwd)))
