from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from exrw.embedding import CacheEmbeddingProvider, FallbackEmbeddingProvider
from exrw.metrics import (
    RougeScore,
    cluster_report,
    corpus_means,
    rouge_l,
    rouge_n,
    step_reward,
    summary_reward,
    tokenize,
)

from oracles import brute_force_rouge_n, exhaustive_lcs

CAND = "the cat sat on the mat"
REF = "the cat is on the mat"


def test_tokenize_cases():
    assert tokenize("The cat.") == ["the", "cat"]
    assert tokenize("") == []
    assert tokenize("U.S.-based, firm") == ["u.s.-based", "firm"]
    assert tokenize("  many   spaces\there ") == ["many", "spaces", "here"]
    assert tokenize("...") == []


def test_rouge_identity():
    tokens = tokenize("a small but real sentence")
    for n in (1, 2):
        score = rouge_n(tokens, tokens, n)
        assert score.precision == score.recall == score.f1 == 1.0
    score = rouge_l(tokens, tokens)
    assert score.precision == score.recall == score.f1 == 1.0


def test_rouge_worked_example():
    cand, ref = tokenize(CAND), tokenize(REF)
    # Hand count: unigram clipped overlap {the:2, cat:1, on:1, mat:1} = 5 of 6;
    # bigram overlap {the cat, on the, the mat} = 3 of 5; LCS "the cat on the
    # mat" = 5 of 6.
    r1 = rouge_n(cand, ref, 1)
    assert (r1.precision, r1.recall) == (5 / 6, 5 / 6)
    assert r1.f1 == pytest.approx(0.8333, abs=1e-4)
    r2 = rouge_n(cand, ref, 2)
    assert r2.f1 == pytest.approx(0.6, abs=1e-4)
    rl = rouge_l(cand, ref)
    assert rl.f1 == pytest.approx(0.8333, abs=1e-4)


def test_rouge_degenerate():
    tokens = tokenize("real tokens here")
    for score in (rouge_n([], tokens, 1), rouge_n(tokens, [], 2), rouge_l([], tokens)):
        assert score.precision == score.recall == score.f1 == 0.0
    disjoint = rouge_l(tokenize("aa bb"), tokenize("cc dd"))
    assert disjoint.f1 == 0.0
    assert rouge_n(tokenize("one"), tokenize("one two"), 2).f1 == 0.0  # too short for bigrams


def test_rouge_n_rejects_bad_n():
    with pytest.raises(ValueError):
        rouge_n(["a"], ["a"], 0)


def test_rouge_n_matches_brute_force_oracle():
    rng = np.random.default_rng(314)
    vocab = [f"w{i}" for i in range(8)]
    for _ in range(200):
        cand = [vocab[i] for i in rng.integers(0, 8, size=rng.integers(0, 13))]
        ref = [vocab[i] for i in rng.integers(0, 8, size=rng.integers(0, 13))]
        for n in (1, 2):
            got = rouge_n(cand, ref, n)
            expected = brute_force_rouge_n(cand, ref, n)
            assert abs(got.precision - expected[0]) < 1e-12
            assert abs(got.recall - expected[1]) < 1e-12
            assert abs(got.f1 - expected[2]) < 1e-12


def test_rouge_l_matches_exhaustive_enumeration():
    rng = np.random.default_rng(2718)
    vocab = [f"w{i}" for i in range(8)]
    for _ in range(120):
        cand = [vocab[i] for i in rng.integers(0, 8, size=rng.integers(0, 9))]
        ref = [vocab[i] for i in rng.integers(0, 8, size=rng.integers(0, 9))]
        got = rouge_l(cand, ref)
        lcs = exhaustive_lcs(cand, ref)
        p = lcs / len(cand) if cand else 0.0
        r = lcs / len(ref) if ref else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        assert abs(got.f1 - f1) < 1e-12


@given(st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=10))
def test_rouge_identity_property(tokens):
    assert rouge_n(tokens, tokens, 1).f1 == 1.0
    score = rouge_l(tokens, tokens)
    assert score.f1 == 1.0


@given(
    st.lists(st.sampled_from(["a", "b", "c"]), max_size=8),
    st.lists(st.sampled_from(["a", "b", "c"]), max_size=8),
)
def test_rouge_range_property(cand, ref):
    for score in (rouge_n(cand, ref, 1), rouge_n(cand, ref, 2), rouge_l(cand, ref)):
        for value in (score.precision, score.recall, score.f1):
            assert 0.0 <= value <= 1.0


def test_summary_reward_identity():
    provider = FallbackEmbeddingProvider(32)
    reward = summary_reward("Rain fell. Roads flooded.", "Rain fell. Roads flooded.", provider)
    assert reward.total == pytest.approx(1.0)
    assert reward.sim == pytest.approx(1.0)
    assert reward.rouge_avg == pytest.approx(1.0)


def test_summary_reward_empty_candidate():
    provider = FallbackEmbeddingProvider(8)
    reward = summary_reward("", "Rain fell.", provider)
    assert reward.total == 0.0 and reward.sim == 0.0


def test_summary_reward_requires_reference():
    provider = FallbackEmbeddingProvider(8)
    with pytest.raises(ValueError, match="reference"):
        summary_reward("Rain fell.", "  ", provider)


def test_summary_reward_composed_example():
    # Planted vectors force Sim 0.8; ROUGE F1s are the worked example's.
    u = np.array([1.0, 0.0])
    v = np.array([0.8, 0.6])
    provider = CacheEmbeddingProvider.from_texts([CAND, REF], [u, v])
    reward = summary_reward(CAND, REF, provider)
    assert reward.sim == pytest.approx(0.8, abs=1e-12)
    assert reward.rouge_avg == pytest.approx((0.6 + 5 / 6 / 1.0) / 2, abs=1e-4)
    assert reward.total == pytest.approx(0.7583, abs=1e-4)


def test_step_reward_verbatim_single_sentence():
    provider = FallbackEmbeddingProvider(16)
    assert step_reward("Rain fell.", "Rain fell.", provider).total == pytest.approx(1.0)


def test_step_reward_disjoint_clamped():
    # Disjoint vocabulary and a planted negative cosine: reward is exactly 0.
    u = np.array([1.0, 0.0])
    provider = CacheEmbeddingProvider.from_texts(["aa bb.", "cc dd."], [u, -u])
    reward = step_reward("aa bb.", "cc dd.", provider)
    assert reward.total == 0.0
    assert reward.sim == 0.0


def test_step_reward_range():
    provider = FallbackEmbeddingProvider(16)
    rng = np.random.default_rng(0)
    words = ["storm", "port", "vote", "bridge", "river", "dawn"]
    for _ in range(20):
        cand = " ".join(rng.choice(words, size=3)) + "."
        ref = " ".join(rng.choice(words, size=4)) + "."
        total = step_reward(cand, ref, provider).total
        assert 0.0 <= total <= 1.0


def test_reward_breakdown_invariants():
    provider = FallbackEmbeddingProvider(16)
    reward = summary_reward("Rain fell. Roads flooded.", "Rain fell. Crews worked.", provider)
    assert reward.rouge_avg == pytest.approx((reward.rouge2_f1 + reward.rougeL_f1) / 2)
    assert reward.total == pytest.approx((reward.rouge_avg + reward.sim) / 2)


def test_cluster_report_and_means():
    provider = FallbackEmbeddingProvider(16)
    r1 = cluster_report("c1", "Rain fell.", "Rain fell.", provider)
    r2 = cluster_report("c2", "Roads flooded.", "Crews worked.", provider)
    assert r1["rouge1"]["f1"] == 1.0
    means = corpus_means([r1, r2])
    assert means["rouge1"]["f1"] == pytest.approx((r1["rouge1"]["f1"] + r2["rouge1"]["f1"]) / 2)
    assert set(means["reward"]) == {"rouge2_f1", "rougeL_f1", "rouge_avg", "sim", "total"}
    assert corpus_means([]) == {}


def test_rouge_score_from_counts():
    score = RougeScore.from_counts(0, 0, 0)
    assert score.f1 == 0.0
