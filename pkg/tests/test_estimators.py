from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from exrw.corpus import build_cluster
from exrw.estimators import CoherencePairScorer, ExtractRewriteSummarizer
from exrw.validation import as_cluster_records, check_text_pairs


def training_clusters():
    specs = [
        ("Storm closed the port. Ships waited offshore.",
         "Storm closed the port. Ships waited offshore. Alpha beta gamma. Delta epsilon zeta."),
        ("Floods blocked two roads. Crews cleared them by night.",
         "Floods blocked two roads. Crews cleared them by night. Iota kappa lambda. Mu nu xi."),
        ("Trains resumed at noon. Platforms filled quickly.",
         "Trains resumed at noon. Platforms filled quickly. Omicron pi rho. Sigma tau upsilon."),
    ]
    return [
        build_cluster(f"c{i}", [("d1", text)], summary)
        for i, (summary, text) in enumerate(specs)
    ]


def test_as_cluster_records_coercion():
    rows = [
        {"id": "c1", "documents": [{"doc_id": "d", "text": "Rain fell. Roads flooded."}], "summary": "Rain fell."},
    ]
    records = as_cluster_records(rows)
    assert records[0].id == "c1"
    assert len(records[0].sentences) == 2
    # ClusterRecords pass through untouched.
    assert as_cluster_records(records)[0] is records[0]


def test_as_cluster_records_rejects_bad_input():
    with pytest.raises(ValueError, match="sequence"):
        as_cluster_records({"id": "x"})
    with pytest.raises(ValueError, match=r"X\[0\]"):
        as_cluster_records([42])
    with pytest.raises(ValueError, match="at least one"):
        as_cluster_records([])
    with pytest.raises(ValueError, match="reference"):
        as_cluster_records(
            [build_cluster("c", [("d", "Text here.")])], require_reference=True
        )


def test_check_text_pairs():
    assert check_text_pairs([("a b", "c d")]) == [("a b", "c d")]
    with pytest.raises(ValueError):
        check_text_pairs([("a",)])
    with pytest.raises(ValueError):
        check_text_pairs([("a", " ")])
    with pytest.raises(ValueError):
        check_text_pairs([])


def test_summarizer_params_roundtrip():
    est = ExtractRewriteSummarizer(cl1=2.0, cl2=3.0, seed=7)
    params = est.get_params()
    assert params["cl1"] == 2.0 and params["cl2"] == 3.0 and params["seed"] == 7
    cloned = clone(est)
    assert cloned.get_params() == params
    est.set_params(cl1=9.0)
    assert est.cl1 == 9.0


def test_summarizer_requires_fit():
    est = ExtractRewriteSummarizer()
    with pytest.raises(NotFittedError):
        est.transform(training_clusters())


def test_summarizer_fit_transform_and_score():
    clusters = training_clusters()
    est = ExtractRewriteSummarizer(
        dim=16,
        k=2.0,
        c=0.0,
        pretrain_epochs=2,
        rl_epochs=2,
        coherence_epochs=20,
        seed=0,
    )
    est.fit(clusters)
    assert est.models_ is not None
    assert est.coherence_report_ is not None
    summaries = est.transform(clusters)
    assert len(summaries) == len(clusters)
    assert all(isinstance(s, str) and s for s in summaries)
    assert est.predict(clusters) == summaries
    # Deterministic: refitting with the same seed reproduces the transform.
    est2 = clone(est).fit(clusters)
    assert est2.transform(clusters) == summaries
    score = est.score(clusters)
    assert 0.0 <= score <= 2.0


def test_summarizer_dict_input():
    rows = [
        {
            "id": "c1",
            "documents": [{"doc_id": "d", "text": "Rain fell hard. Roads flooded fast. Crews worked."}],
            "summary": "Rain fell hard. Roads flooded fast.",
        },
        {
            "id": "c2",
            "documents": [{"doc_id": "d", "text": "The port reopened. Ships docked. Cargo moved."}],
            "summary": "The port reopened. Ships docked.",
        },
    ]
    est = ExtractRewriteSummarizer(
        dim=16, k=1.0, c=0.0, pretrain_epochs=1, rl_epochs=1, coherence_epochs=10, seed=1
    )
    summaries = est.fit(rows).transform(rows)
    assert len(summaries) == 2


def test_coherence_scorer_end_to_end():
    clusters = training_clusters()
    scorer = CoherencePairScorer(dim=16, epochs=50, lr=1.0, seed=0)
    with pytest.raises(NotFittedError):
        scorer.decision_function([("a b", "c d")])
    scorer.fit(clusters)
    assert scorer.threshold_ in [round(0.05 * i, 2) for i in range(1, 20)]
    pairs = [
        ("Storm closed the port.", "Ships waited offshore."),
        ("Storm closed the port.", "Storm closed the port."),
    ]
    scores = scorer.decision_function(pairs)
    assert scores.shape == (2,)
    predictions = scorer.predict(pairs)
    assert set(predictions) <= {0, 1}
