"""Loading and addressing of a two-subset text corpus.

A corpus is a manifest-ordered list of documents, each labeled as belonging
to the "endorsed" or "controversial" subset. Bodies are normalized on load
(Unicode NFC, "\\n" newlines) so that token positions are stable across
platforms.
"""

from __future__ import annotations

import csv
import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

CORPUS_FORMAT = "lexalign-corpus/1"

MANIFEST_FIELDS = ("id", "subset", "title", "year", "path")


class CorpusError(Exception):
    """Fatal problem while loading or validating a corpus."""


class Subset(str, Enum):
    ENDORSED = "endorsed"
    CONTROVERSIAL = "controversial"

    @classmethod
    def parse(cls, label: str) -> "Subset":
        try:
            return cls(label.strip().lower())
        except ValueError:
            raise CorpusError(
                f"unknown subset label {label!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


@dataclass(frozen=True)
class Document:
    id: str
    subset: Subset
    title: str
    year: int
    body: str
    word_count: int = 0


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    provenance: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for doc in self.documents:
            if doc.id in seen:
                raise CorpusError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def ids(self) -> list[str]:
        return [d.id for d in self.documents]

    def get(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


def normalize_text(text: str) -> str:
    """NFC-normalize and canonicalize newlines to "\\n"."""
    text = unicodedata.normalize("NFC", text)
    return text.replace("\r\n", "\n").replace("\r", "\n")


def _read_manifest(manifest: Path) -> list[dict[str, str]]:
    with open(manifest, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise CorpusError(f"manifest {manifest} is empty")
        missing = set(MANIFEST_FIELDS) - set(reader.fieldnames)
        if missing:
            raise CorpusError(
                f"manifest {manifest} lacks fields {sorted(missing)}"
            )
        return list(reader)


def load_corpus(root: str | Path, manifest: str | Path) -> Corpus:
    """Materialize every manifest row into a Document, in manifest order.

    `root` anchors relative `path` entries. Any missing body file, duplicate
    id, or unknown subset label aborts the load.
    """
    root = Path(root)
    manifest = Path(manifest)
    rows = _read_manifest(manifest)
    if not rows:
        raise CorpusError(f"manifest {manifest} has no document rows")

    docs: list[Document] = []
    seen: set[str] = set()
    for row in rows:
        doc_id = row["id"].strip()
        if not doc_id:
            raise CorpusError("manifest row with empty id")
        if doc_id in seen:
            raise CorpusError(f"duplicate document id {doc_id!r} in manifest")
        seen.add(doc_id)
        subset = Subset.parse(row["subset"])
        path = root / row["path"]
        if not path.is_file():
            raise CorpusError(
                f"document {doc_id!r}: body file {row['path']!r} not found under {root}"
            )
        body = normalize_text(path.read_text(encoding="utf-8"))
        try:
            year = int(row["year"])
        except ValueError:
            raise CorpusError(
                f"document {doc_id!r}: year {row['year']!r} is not an integer"
            ) from None
        docs.append(
            Document(
                id=doc_id,
                subset=subset,
                title=row["title"],
                year=year,
                body=body,
                word_count=_count_tokens(body),
            )
        )
    return Corpus(documents=tuple(docs), provenance=str(manifest))


def _count_tokens(body: str) -> int:
    # deferred import: textprep uses corpus types at module level
    from lexalign.textprep import tokenize

    return len(tokenize(body))


def subset(corpus: Corpus, which: Subset) -> Corpus:
    """Documents whose subset matches `which`, original order preserved."""
    kept = tuple(d for d in corpus.documents if d.subset == which)
    return Corpus(documents=kept, provenance=corpus.provenance)


def to_payload(corpus: Corpus) -> dict:
    return {
        "format": CORPUS_FORMAT,
        "provenance": corpus.provenance,
        "documents": [
            {
                "id": d.id,
                "subset": d.subset.value,
                "title": d.title,
                "year": d.year,
                "body": d.body,
                "word_count": d.word_count,
            }
            for d in corpus.documents
        ],
    }


def from_payload(payload: dict) -> Corpus:
    if payload.get("format") != CORPUS_FORMAT:
        raise CorpusError(
            f"unsupported corpus format {payload.get('format')!r}"
        )
    docs = tuple(
        Document(
            id=d["id"],
            subset=Subset(d["subset"]),
            title=d["title"],
            year=d["year"],
            body=d["body"],
            word_count=d.get("word_count", 0),
        )
        for d in payload["documents"]
    )
    return Corpus(documents=docs, provenance=payload.get("provenance", ""))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(to_payload(corpus), ensure_ascii=False), encoding="utf-8"
    )


def load_corpus_cache(path: str | Path) -> Corpus:
    return from_payload(json.loads(Path(path).read_text(encoding="utf-8")))
