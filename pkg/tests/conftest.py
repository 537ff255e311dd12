"""Shared fixtures and synthetic-data builders."""
from __future__ import annotations

import json

import numpy as np
import pytest

from exrw.corpus import build_cluster
from exrw.embedding import CacheEmbeddingProvider


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture
def tiny_dataset_rows():
    return [
        {
            "id": "c1",
            "documents": [
                {"doc_id": "d1", "text": "Rain fell all night. Roads flooded by dawn."},
                {"doc_id": "d2", "text": "Crews closed two bridges. Schools stayed shut."},
            ],
            "summary": "Rain fell all night. Roads flooded by dawn.",
        },
        {
            "id": "c2",
            "documents": [
                {"doc_id": "d1", "text": "The port reopened today. Ships docked at noon."},
            ],
            "summary": "The port reopened today. Ships docked at noon.",
        },
    ]


@pytest.fixture
def tiny_dataset(tmp_path, tiny_dataset_rows):
    return write_jsonl(tmp_path / "tiny.jsonl", tiny_dataset_rows)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def vector_with_cosine(base, rho, rng):
    """Unit vector at cosine rho from the unit vector `base`."""
    base = unit(base)
    raw = rng.normal(size=base.shape[0])
    perp = raw - np.dot(raw, base) * base
    norm = np.linalg.norm(perp)
    if norm < 1e-12:
        perp = np.zeros_like(base)
        perp[(int(np.argmax(np.abs(base))) + 1) % base.shape[0]] = 1.0
        perp -= np.dot(perp, base) * base
        norm = np.linalg.norm(perp)
    perp /= norm
    return rho * base + np.sqrt(max(0.0, 1.0 - rho * rho)) * perp


def planted_cluster(cluster_id, texts_vectors, summary=None):
    """ClusterRecord plus a cache provider returning the planted vectors.

    texts_vectors: list of (sentence_text, vector); each text must be a
    single splitter-stable sentence.
    """
    texts = [t for t, _ in texts_vectors]
    cluster = build_cluster(cluster_id, [("d1", " ".join(texts))], summary)
    assert [s.text for s in cluster.sentences] == texts, "texts must be splitter-stable"
    provider = CacheEmbeddingProvider.from_texts(texts, [v for _, v in texts_vectors])
    return cluster, provider


def merge_cache_providers(providers):
    dim = providers[0].dim
    merged = {}
    for p in providers:
        merged.update(p._vectors)
    return CacheEmbeddingProvider(dim, merged)


def topic_sentence(topic, rng, dim, topic_weight=0.7):
    """Unit vector whose first half carries a shared topic direction and
    whose second half is per-sentence content noise."""
    half = dim // 2
    content = unit(rng.normal(size=half))
    return unit(
        np.concatenate([np.sqrt(topic_weight) * topic, np.sqrt(1.0 - topic_weight) * content])
    )


def make_band_triplets(n_pairs, dim, seed):
    """Planted coherence bands: positive pairs share a topic subspace
    (cosine ~0.7), random negatives have fresh topics (cosine ~0), and
    self negatives sit at cosine 1."""
    from exrw.coherence import Triplet

    rng = np.random.default_rng(seed)
    half = dim // 2
    out = []
    for _ in range(n_pairs):
        topic = unit(rng.normal(size=half))
        anchor = topic_sentence(topic, rng, dim)
        positive = topic_sentence(topic, rng, dim)
        negative = topic_sentence(unit(rng.normal(size=half)), rng, dim)
        out.append(Triplet(anchor, positive, negative, "random_source"))
        out.append(Triplet(anchor, positive, anchor, "self_pair"))
    return out
