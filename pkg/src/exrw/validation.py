"""Input validation helpers for the estimator API."""
from __future__ import annotations

from typing import Sequence

from .corpus import ClusterRecord, build_cluster


def as_cluster_records(X, require_reference: bool = False) -> list[ClusterRecord]:
    """Coerce estimator input into a list of ClusterRecord.

    Accepts ClusterRecord instances or JSONL-shaped dicts
    ({"id", "documents", "summary"}). Raises ValueError with the
    offending position for anything else.
    """
    if isinstance(X, (ClusterRecord, dict, str, bytes)):
        raise ValueError("X must be a sequence of clusters, not a single cluster")
    records: list[ClusterRecord] = []
    for pos, item in enumerate(X):
        if isinstance(item, ClusterRecord):
            records.append(item)
        elif isinstance(item, dict):
            try:
                docs = [(d["doc_id"], d["text"]) for d in item["documents"]]
                records.append(build_cluster(item["id"], docs, item.get("summary")))
            except (KeyError, TypeError) as exc:
                raise ValueError(f"X[{pos}] is not a valid cluster mapping: {exc}") from exc
        else:
            raise ValueError(f"X[{pos}] has unsupported type {type(item).__name__}")
    if not records:
        raise ValueError("X must contain at least one cluster")
    if require_reference:
        for record in records:
            if not record.reference_summary or not record.reference_summary.strip():
                raise ValueError(f"cluster {record.id!r} has no reference summary")
    return records


def check_text_pairs(pairs: Sequence) -> list[tuple[str, str]]:
    """Validate a sequence of (text, text) pairs."""
    out = []
    for pos, pair in enumerate(pairs):
        if not isinstance(pair, (tuple, list)) or len(pair) != 2:
            raise ValueError(f"pairs[{pos}] must be a (text, text) pair")
        a, b = pair
        if not isinstance(a, str) or not isinstance(b, str) or not a.strip() or not b.strip():
            raise ValueError(f"pairs[{pos}] must hold two nonempty strings")
        out.append((a, b))
    if not out:
        raise ValueError("pairs must be nonempty")
    return out
