"""Cluster data model and ingestion.

Parses JSONL cluster datasets, splits documents into sentences with a
deterministic rule-based scanner, and assigns stable sentence identities
keyed by a content hash.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

# Trailing words that end with '.' but do not terminate a sentence.
ABBREVIATIONS = (
    "Dr.", "Mr.", "Mrs.", "Ms.", "U.S.", "e.g.", "i.e.", "etc.",
    "vs.", "No.", "Fig.", "Eq.",
)

_TERMINATORS = ".!?"
# Characters that may open a sentence right after the whitespace gap.
_OPENERS = "\"'“‘«‹("


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


@dataclass(frozen=True)
class Sentence:
    """One source sentence with its global position inside the cluster."""

    index: int
    doc_id: str
    text: str
    content_hash: str


@dataclass
class ClusterRecord:
    """One input instance: documents, their sentences, optional reference."""

    id: str
    documents: list[Document]
    reference_summary: str | None = None
    sentences: list[Sentence] = field(default_factory=list)


def normalize_text(text: str) -> str:
    """Trim and collapse internal whitespace runs to one space (no case folding)."""
    return " ".join(text.split())


def content_hash(text: str) -> str:
    """64-hex-char SHA-256 digest of the normalized text."""
    return hashlib.sha256(normalize_text(text).encode("utf-8")).hexdigest()


def _trailing_word(text: str, end: int) -> str:
    """Maximal non-whitespace run ending at `end` (inclusive)."""
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start : end + 1]


def _is_boundary(text: str, i: int, j: int) -> bool:
    """True if the terminator run text[i..j] ends a sentence.

    Requires whitespace after the run followed by an uppercase letter,
    digit, or opening quote; a single '.' preceded by a known
    abbreviation never splits.
    """
    n = len(text)
    if j + 1 >= n or not text[j + 1].isspace():
        return False
    k = j + 1
    while k < n and text[k].isspace():
        k += 1
    if k >= n:
        return False
    nxt = text[k]
    if not (nxt.isupper() or nxt.isdigit() or nxt in _OPENERS):
        return False
    if i == j and text[i] == ".":
        word = _trailing_word(text, i).lstrip(_OPENERS)
        if word in ABBREVIATIONS:
            return False
    return True


def split_sentences(text: str) -> list[str]:
    """Split text into sentences with a rule-based scanner.

    Splits after '.', '!', '?' runs followed by whitespace and an
    uppercase/digit/quote opener, except after known abbreviations.
    Concatenating the output preserves every non-whitespace character
    of the input; no output element is empty.
    """
    sentences: list[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _TERMINATORS:
            j = i
            while j + 1 < n and text[j + 1] in _TERMINATORS:
                j += 1
            if _is_boundary(text, i, j):
                piece = text[start : j + 1].strip()
                if piece:
                    sentences.append(piece)
                start = j + 1
            i = j + 1
        else:
            i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def build_cluster(
    cluster_id: str,
    documents: list[tuple[str, str]] | list[Document],
    reference_summary: str | None = None,
) -> ClusterRecord:
    """Assemble a ClusterRecord, splitting and globally indexing sentences.

    Sentence order is documents in the given order, sentences in reading
    order; indices run 0..N-1 with no gaps.
    """
    if not cluster_id:
        raise ValueError("cluster id must be nonempty")
    docs = [d if isinstance(d, Document) else Document(*d) for d in documents]
    if not any(d.text.strip() for d in docs):
        raise ValueError(f"cluster {cluster_id!r} has no document with nonempty text")
    sentences: list[Sentence] = []
    for doc in docs:
        for sent_text in split_sentences(doc.text):
            sentences.append(
                Sentence(
                    index=len(sentences),
                    doc_id=doc.doc_id,
                    text=sent_text,
                    content_hash=content_hash(sent_text),
                )
            )
    return ClusterRecord(
        id=cluster_id,
        documents=docs,
        reference_summary=reference_summary,
        sentences=sentences,
    )


def load_cluster_dataset(path: str | Path) -> list[ClusterRecord]:
    """Load a UTF-8 JSONL cluster dataset, one record per line.

    Raises ValueError naming the line number for malformed JSON and the
    field name for missing required fields. Line order is preserved;
    whitespace-only lines are skipped.
    """
    records: list[ClusterRecord] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"malformed JSON at line {lineno}: {exc.msg}") from exc
            if not isinstance(raw, dict):
                raise ValueError(f"malformed JSON at line {lineno}: expected object")
            for field_name in ("id", "documents"):
                if field_name not in raw:
                    raise ValueError(f"missing field {field_name} at line {lineno}")
            cluster_id = raw["id"]
            if not isinstance(cluster_id, str) or not cluster_id:
                raise ValueError(f"invalid field id at line {lineno}: must be nonempty string")
            if cluster_id in seen_ids:
                raise ValueError(f"duplicate cluster id {cluster_id!r} at line {lineno}")
            docs_raw = raw["documents"]
            if not isinstance(docs_raw, list) or not docs_raw:
                raise ValueError(f"invalid field documents at line {lineno}: must be nonempty list")
            documents = []
            for doc in docs_raw:
                for field_name in ("doc_id", "text"):
                    if not isinstance(doc, dict) or field_name not in doc:
                        raise ValueError(f"missing field {field_name} at line {lineno}")
                documents.append(Document(doc_id=str(doc["doc_id"]), text=str(doc["text"])))
            try:
                record = build_cluster(cluster_id, documents, raw.get("summary"))
            except ValueError as exc:
                raise ValueError(f"{exc} (line {lineno})") from exc
            seen_ids.add(cluster_id)
            records.append(record)
    return records
