"""Minimal differentiable primitives shared by the pairwise scorers.

A one-layer sigmoid MLP over a fixed 5d pair feature map, with manual
forward/backward passes and versioned JSON checkpoint I/O. No autodiff,
no multi-layer networks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .policy import ControlConfig

CHECKPOINT_FORMAT = "exrw-ckpt"
CHECKPOINT_VERSION = 1

# Forward outputs are clamped into the open interval (0,1): float64 rounds
# sigmoid(z) to exactly 1.0 for z > ~36, which would break downstream
# log/score contracts.
_P_MIN = 1e-15
_P_MAX = 1.0 - 1e-15


class CheckpointError(ValueError):
    """Version or shape mismatch while loading a checkpoint."""


@dataclass
class MlpParams:
    """Weights and bias of one pairwise scoring network."""

    in_dim: int
    weights: np.ndarray
    bias: float

    def copy(self) -> "MlpParams":
        return MlpParams(self.in_dim, self.weights.copy(), self.bias)


@dataclass
class GradRecord:
    d_weights: np.ndarray
    d_bias: float


def init_params(in_dim: int, rng: np.random.Generator) -> MlpParams:
    """Scaled uniform init: weights ~ U(-1/sqrt(in_dim), +1/sqrt(in_dim)), bias 0."""
    bound = 1.0 / np.sqrt(in_dim)
    return MlpParams(in_dim, rng.uniform(-bound, bound, size=in_dim), 0.0)


def pair_features(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Fixed-order pair feature map [x1; x2; x1*x2; x1-x2; |x1-x2|] of length 5d."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise ValueError(f"dim mismatch: {x1.shape} vs {x2.shape}")
    diff = x1 - x2
    return np.concatenate([x1, x2, x1 * x2, diff, np.abs(diff)])


def pair_feature_matrix(x1: np.ndarray, others: np.ndarray) -> np.ndarray:
    """Row-wise pair features of one vector against a (n, d) batch."""
    x1 = np.asarray(x1, dtype=float)
    others = np.atleast_2d(np.asarray(others, dtype=float))
    tiled = np.broadcast_to(x1, others.shape)
    diff = tiled - others
    return np.concatenate([tiled, others, tiled * others, diff, np.abs(diff)], axis=1)


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable sigmoid clamped into the open interval (0,1)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    out = np.clip(out, _P_MIN, _P_MAX)
    return float(out) if out.ndim == 0 else out


def mlp_forward(p: MlpParams, f: np.ndarray) -> float:
    """sigmoid(w . f + b), strictly inside (0,1)."""
    f = np.asarray(f, dtype=float)
    if f.shape != (p.in_dim,):
        raise ValueError(f"feature shape {f.shape} does not match in_dim {p.in_dim}")
    return float(sigmoid(float(np.dot(p.weights, f)) + p.bias))


def mlp_forward_batch(p: MlpParams, feats: np.ndarray) -> np.ndarray:
    """Forward pass over a (n, in_dim) feature matrix."""
    feats = np.asarray(feats, dtype=float)
    if feats.ndim != 2 or feats.shape[1] != p.in_dim:
        raise ValueError(f"feature matrix shape {feats.shape} does not match in_dim {p.in_dim}")
    return sigmoid(feats @ p.weights + p.bias)


def mlp_backward(p: MlpParams, f: np.ndarray, upstream: float) -> GradRecord:
    """Gradients of (upstream * forward output) w.r.t. weights and bias."""
    f = np.asarray(f, dtype=float)
    if f.shape != (p.in_dim,):
        raise ValueError(f"feature shape {f.shape} does not match in_dim {p.in_dim}")
    s = mlp_forward(p, f)
    local = upstream * s * (1.0 - s)
    return GradRecord(d_weights=local * f, d_bias=local)


def accumulate_backward_batch(
    p: MlpParams, feats: np.ndarray, scores: np.ndarray, upstream: np.ndarray, grad: GradRecord
) -> None:
    """Add batched gradients into `grad` given cached forward scores."""
    local = np.asarray(upstream, dtype=float) * scores * (1.0 - scores)
    grad.d_weights += feats.T @ local
    grad.d_bias += float(local.sum())


def zero_grad(p: MlpParams) -> GradRecord:
    return GradRecord(d_weights=np.zeros(p.in_dim), d_bias=0.0)


def apply_gradient(p: MlpParams, grad: GradRecord, lr: float) -> None:
    """Plain gradient-descent step (in place)."""
    p.weights -= lr * grad.d_weights
    p.bias -= lr * grad.d_bias


def _params_to_json(p: MlpParams) -> dict:
    return {"in_dim": p.in_dim, "weights": [float(w) for w in p.weights], "bias": float(p.bias)}


def _params_from_json(raw: dict) -> MlpParams:
    weights = np.asarray(raw["weights"], dtype=float)
    in_dim = int(raw["in_dim"])
    if weights.shape != (in_dim,):
        raise CheckpointError(f"weights length {weights.shape[0]} does not match in_dim {in_dim}")
    return MlpParams(in_dim=in_dim, weights=weights, bias=float(raw["bias"]))


def save_checkpoint(
    path: str | Path,
    models: dict[str, MlpParams],
    meta: "ControlConfig",
    dim: int,
) -> None:
    """Write a versioned JSON checkpoint (floats round-trip exactly)."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dim": dim,
        "models": {name: _params_to_json(p) for name, p in models.items()},
        "config": meta.to_json(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(
    path: str | Path, expected_dim: int | None = None
) -> tuple[dict[str, MlpParams], "ControlConfig"]:
    """Load a checkpoint, checking format version and vector dim."""
    from .policy import ControlConfig

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unknown checkpoint format {doc.get('format')!r}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {doc.get('version')!r}, expected {CHECKPOINT_VERSION}"
        )
    dim = int(doc["dim"])
    if expected_dim is not None and dim != expected_dim:
        raise CheckpointError(f"checkpoint dim {dim} does not match expected dim {expected_dim}")
    models = {name: _params_from_json(raw) for name, raw in doc["models"].items()}
    for name, params in models.items():
        if params.in_dim != 5 * dim:
            raise CheckpointError(
                f"model {name!r} in_dim {params.in_dim} does not match 5*dim {5 * dim}"
            )
    return models, ControlConfig.from_json(doc.get("config", {}))
