"""From-scratch ROUGE-1/2/L and the reward functions.

No stemming and no stopword removal, so scores are deterministic and
dependency-free; they are not directly comparable to ROUGE packages that
stem. The reward of a summary (or a single sentence) is the mean of its
ROUGE-2/ROUGE-L F1 average and its clamped embedding cosine similarity
against the reference.
"""
from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .embedding import EmbeddingProvider, cosine, embed_text

_STRIP_CHARS = string.punctuation + "“”‘’«»"


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: float, cand_total: int, ref_total: int) -> "RougeScore":
        p = overlap / cand_total if cand_total > 0 else 0.0
        r = overlap / ref_total if ref_total > 0 else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f1)

    def to_json(self) -> dict:
        return {"p": self.precision, "r": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class RewardBreakdown:
    rouge2_f1: float
    rougeL_f1: float
    rouge_avg: float
    sim: float
    total: float

    def to_json(self) -> dict:
        return {
            "rouge2_f1": self.rouge2_f1,
            "rougeL_f1": self.rougeL_f1,
            "rouge_avg": self.rouge_avg,
            "sim": self.sim,
            "total": self.total,
        }


_ZERO_REWARD = RewardBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokens with leading/trailing punctuation stripped."""
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(_STRIP_CHARS)
        if token:
            tokens.append(token)
    return tokens


def _ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    if len(tokens) < n:
        return []
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram overlap precision/recall/F1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand_counts = Counter(_ngrams(candidate, n))
    ref_counts = Counter(_ngrams(reference, n))
    overlap = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    return RougeScore.from_counts(
        overlap, sum(cand_counts.values()), sum(ref_counts.values())
    )


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length via one-row dynamic programming."""
    if not a or not b:
        return 0
    row = [0] * (len(b) + 1)
    for x in a:
        prev = 0
        for j, y in enumerate(b, start=1):
            cur = row[j]
            row[j] = prev + 1 if x == y else max(row[j], row[j - 1])
            prev = cur
    return row[len(b)]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """LCS-based precision/recall/F1."""
    lcs = lcs_length(candidate, reference)
    return RougeScore.from_counts(float(lcs), len(candidate), len(reference))


def _clamped_sim(provider: EmbeddingProvider, text_a: str, text_b: str) -> float:
    sim = cosine(embed_text(provider, text_a), embed_text(provider, text_b))
    return min(1.0, max(0.0, sim))


def reward_breakdown(candidate_text: str, reference_text: str, provider: EmbeddingProvider) -> RewardBreakdown:
    if not reference_text.strip():
        raise ValueError("reference summary must be nonempty")
    if not candidate_text.strip():
        return _ZERO_REWARD
    cand_tokens = tokenize(candidate_text)
    ref_tokens = tokenize(reference_text)
    r2 = rouge_n(cand_tokens, ref_tokens, 2).f1
    rl = rouge_l(cand_tokens, ref_tokens).f1
    rouge_avg = (r2 + rl) / 2.0
    sim = _clamped_sim(provider, candidate_text, reference_text)
    return RewardBreakdown(
        rouge2_f1=r2,
        rougeL_f1=rl,
        rouge_avg=rouge_avg,
        sim=sim,
        total=(rouge_avg + sim) / 2.0,
    )


def summary_reward(s_final: str, s_ref: str, provider: EmbeddingProvider) -> RewardBreakdown:
    """Trajectory-level reward of the rewritten summary against the reference."""
    return reward_breakdown(s_final, s_ref, provider)


def step_reward(sentence_text: str, s_ref: str, provider: EmbeddingProvider) -> RewardBreakdown:
    """Per-step reward: the same formula applied to one sentence's text."""
    return reward_breakdown(sentence_text, s_ref, provider)


def cluster_report(
    cluster_id: str, candidate_text: str, reference_text: str, provider: EmbeddingProvider
) -> dict:
    """Evaluation record for one cluster: ROUGE-1/2/L plus the reward."""
    cand_tokens = tokenize(candidate_text)
    ref_tokens = tokenize(reference_text)
    return {
        "cluster_id": cluster_id,
        "rouge1": rouge_n(cand_tokens, ref_tokens, 1).to_json(),
        "rouge2": rouge_n(cand_tokens, ref_tokens, 2).to_json(),
        "rougeL": rouge_l(cand_tokens, ref_tokens).to_json(),
        "reward": reward_breakdown(candidate_text, reference_text, provider).to_json(),
    }


def corpus_means(reports: Sequence[dict]) -> dict:
    """Mean of every per-cluster metric over a report list."""
    if not reports:
        return {}
    means: dict = {}
    for metric in ("rouge1", "rouge2", "rougeL"):
        means[metric] = {
            key: sum(r[metric][key] for r in reports) / len(reports) for key in ("p", "r", "f1")
        }
    reward_keys = reports[0]["reward"].keys()
    means["reward"] = {
        key: sum(r["reward"][key] for r in reports) / len(reports) for key in reward_keys
    }
    return means
