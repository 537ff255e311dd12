from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from exrw.corpus import (
    build_cluster,
    content_hash,
    load_cluster_dataset,
    normalize_text,
    split_sentences,
)

from conftest import write_jsonl


def test_split_empty_input():
    assert split_sentences("") == []
    assert split_sentences("   \n\t ") == []


def test_split_two_terminated_sentences():
    assert split_sentences("It rained. Roads flooded.") == ["It rained.", "Roads flooded."]


def test_split_abbreviation_hand_traced():
    # Hand trace: '.' after 'Dr' matches the abbreviation list, so the scanner
    # keeps going; '.' after 'arrived' is followed by ' H' and splits.
    assert split_sentences("Dr. Smith arrived. He spoke.") == ["Dr. Smith arrived.", "He spoke."]


@pytest.mark.parametrize(
    "text,expected",
    [
        ("Mr. Jones met Mrs. Day. They left.", ["Mr. Jones met Mrs. Day.", "They left."]),
        ("See Fig. 3 for details. It helps.", ["See Fig. 3 for details.", "It helps."]),
        ("The U.S. Senate voted. Markets rose.", ["The U.S. Senate voted.", "Markets rose."]),
        ("What now?! Nobody knows.", ["What now?!", "Nobody knows."]),
        ("no capital after. stop", ["no capital after. stop"]),
        ("Quote next. \"Yes\" she said.", ["Quote next.", "\"Yes\" she said."]),
        ("Ends with digits. 42 is the answer.", ["Ends with digits.", "42 is the answer."]),
    ],
)
def test_split_rules(text, expected):
    assert split_sentences(text) == expected


def test_split_idempotent_on_single_sentence():
    sentence = "Roads flooded."
    assert split_sentences(sentence) == [sentence]


@given(st.text(max_size=300))
def test_split_preserves_non_whitespace(text):
    joined = "".join(split_sentences(text))
    assert [c for c in joined if not c.isspace()] == [c for c in text if not c.isspace()]


def test_split_no_empty_outputs():
    for text in ("...", "a. B. c! D?", " . X", "!!"):
        assert all(piece.strip() for piece in split_sentences(text))


def test_normalize_and_hash():
    assert normalize_text("  a \t b\nc ") == "a b c"
    assert content_hash("a  b") == content_hash(" a b ")
    assert content_hash("A b") != content_hash("a b")  # no case folding
    assert len(content_hash("x")) == 64
    assert all(ch in "0123456789abcdef" for ch in content_hash("x"))


def test_build_cluster_indexing():
    cluster = build_cluster(
        "c1",
        [("d1", "One here. Two here."), ("d2", "Three here. Four here.")],
        "A reference.",
    )
    assert [s.index for s in cluster.sentences] == [0, 1, 2, 3]
    assert [s.doc_id for s in cluster.sentences] == ["d1", "d1", "d2", "d2"]
    assert cluster.sentences[2].text == "Three here."
    assert cluster.reference_summary == "A reference."


def test_build_cluster_rejects_empty():
    with pytest.raises(ValueError):
        build_cluster("", [("d1", "Text.")])
    with pytest.raises(ValueError, match="nonempty text"):
        build_cluster("c1", [("d1", "   ")])


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_cluster_dataset(path) == []


def test_load_counts_and_order(tmp_path):
    path = write_jsonl(
        tmp_path / "two_docs.jsonl",
        [
            {
                "id": "c1",
                "documents": [
                    {"doc_id": "a", "text": "First one. Second one."},
                    {"doc_id": "b", "text": "Third one. Fourth one."},
                ],
            }
        ],
    )
    records = load_cluster_dataset(path)
    assert len(records) == 1
    assert len(records[0].sentences) == 4
    assert [s.index for s in records[0].sentences] == [0, 1, 2, 3]
    assert records[0].reference_summary is None


def test_load_missing_documents_field(tmp_path):
    path = write_jsonl(tmp_path / "bad.jsonl", [{"id": "c1"}])
    with pytest.raises(ValueError, match="missing field documents at line 1"):
        load_cluster_dataset(path)


def test_load_malformed_json_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "c1", "documents": [{"doc_id": "d", "text": "Hi there."}]}\n{oops\n')
    with pytest.raises(ValueError, match="line 2"):
        load_cluster_dataset(path)


def test_load_duplicate_id(tmp_path):
    row = {"id": "c1", "documents": [{"doc_id": "d", "text": "Hello there."}]}
    path = write_jsonl(tmp_path / "dup.jsonl", [row, row])
    with pytest.raises(ValueError, match="duplicate cluster id"):
        load_cluster_dataset(path)


def test_load_missing_doc_id(tmp_path):
    path = write_jsonl(
        tmp_path / "bad2.jsonl", [{"id": "c1", "documents": [{"text": "Hello."}]}]
    )
    with pytest.raises(ValueError, match="missing field doc_id at line 1"):
        load_cluster_dataset(path)


def test_loaded_indices_are_permutation(tiny_dataset):
    for record in load_cluster_dataset(tiny_dataset):
        indices = sorted(s.index for s in record.sentences)
        assert indices == list(range(len(record.sentences)))
