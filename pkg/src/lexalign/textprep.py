"""Tokenization, POS tagging, lemmatization, and content-word filtering.

The POS/lemma backend is pluggable. The default is a deterministic
rule-plus-lexicon annotator bundled with the package: identical input bytes
always produce identical lemma streams, which matters more here than tagging
accuracy. Adapters for external taggers can implement the same single-method
interface.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

from lexalign.corpus import Corpus

log = logging.getLogger(__name__)

PREP_FORMAT = "lexalign-prep/1"

# Maximal runs of letters/digits joined by internal hyphens or apostrophes.
# Underscore is excluded on purpose; punctuation never survives.
_TOKEN_RE = re.compile(r"[^\W_]+(?:['’-][^\W_]+)*", re.UNICODE)


class Pos(str, Enum):
    NOUN = "noun"
    VERB = "verb"
    ADJECTIVE = "adj"
    ADVERB = "adv"
    OTHER = "other"


CONTENT_POS = frozenset({Pos.NOUN, Pos.VERB, Pos.ADJECTIVE, Pos.ADVERB})


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str
    pos: Pos
    position: int


@dataclass(frozen=True)
class ContentStream:
    """Content-word tokens of one document, original positions preserved."""

    doc_id: str
    tokens: tuple[Token, ...]
    total_tokens: int

    def lemmas(self) -> list[str]:
        return [t.lemma for t in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(body: str) -> list[str]:
    """Lowercased surface tokens; list index is the token position."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(body)]


class Annotator(Protocol):
    def annotate(self, surfaces: Sequence[str]) -> list[Token]: ...


class AnnotatorError(Exception):
    """Raised by an annotator for a document it cannot process."""


_SUFFIX_POS = (
    ("ly", Pos.ADVERB),
    ("ous", Pos.ADJECTIVE),
    ("ive", Pos.ADJECTIVE),
    ("able", Pos.ADJECTIVE),
    ("ible", Pos.ADJECTIVE),
    ("ical", Pos.ADJECTIVE),
    ("al", Pos.ADJECTIVE),
    ("ic", Pos.ADJECTIVE),
    ("tion", Pos.NOUN),
    ("sion", Pos.NOUN),
    ("ment", Pos.NOUN),
    ("ness", Pos.NOUN),
    ("ity", Pos.NOUN),
)


class RuleLexiconAnnotator:
    """Deterministic annotator: exact lexicon lookup, then suffix rules.

    Unknown words default to nouns with the surface as lemma. Inflection
    stripping is intentionally naive; the goal is a stable, auditable lemma
    inventory, not linguistic fidelity.
    """

    def __init__(self, lexicon: dict[str, tuple[str, Pos]]):
        self.lexicon = lexicon

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleLexiconAnnotator":
        lexicon: dict[str, tuple[str, Pos]] = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            surface, lemma, pos = line.split("\t")
            lexicon[surface] = (lemma, Pos(pos))
        return cls(lexicon)

    @classmethod
    def bundled(cls) -> "RuleLexiconAnnotator":
        with resources.as_file(
            resources.files("lexalign").joinpath("data", "lexicon.tsv")
        ) as path:
            return cls.from_file(path)

    def annotate(self, surfaces: Sequence[str]) -> list[Token]:
        out = []
        for position, surface in enumerate(surfaces):
            lemma, pos = self._classify(surface)
            out.append(Token(surface=surface, lemma=lemma, pos=pos, position=position))
        return out

    def _classify(self, word: str) -> tuple[str, Pos]:
        hit = self.lexicon.get(word)
        if hit is not None:
            return hit
        if any(ch.isdigit() for ch in word):
            return word, Pos.NOUN
        for suffix, pos in _SUFFIX_POS:
            if word.endswith(suffix) and len(word) > len(suffix) + 2:
                return word, pos
        if word.endswith("ies") and len(word) > 4:
            return word[:-3] + "y", Pos.NOUN
        if word.endswith("ing") and len(word) > 5:
            return word[:-3], Pos.VERB
        if word.endswith("ed") and len(word) > 4:
            return word[:-2], Pos.VERB
        if len(word) > 4 and word.endswith(("sses", "shes", "ches", "xes", "zes")):
            return word[:-2], Pos.NOUN
        if word.endswith("s") and not word.endswith("ss") and len(word) > 3:
            return word[:-1], Pos.NOUN
        return word, Pos.NOUN


_default_annotator: RuleLexiconAnnotator | None = None


def default_annotator() -> RuleLexiconAnnotator:
    global _default_annotator
    if _default_annotator is None:
        _default_annotator = RuleLexiconAnnotator.bundled()
    return _default_annotator


def tag_and_lemmatize(
    surfaces: Sequence[str], annotator: Annotator | None = None
) -> list[Token]:
    annotator = annotator or default_annotator()
    tokens = annotator.annotate(surfaces)
    for tok in tokens:
        if not tok.lemma or tok.lemma != tok.lemma.lower():
            raise AnnotatorError(
                f"annotator produced invalid lemma {tok.lemma!r} for {tok.surface!r}"
            )
    return tokens


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One lemma per line, UTF-8; '#' starts a comment."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            words.add(line.lower())
    return frozenset(words)


def bundled_stopwords() -> frozenset[str]:
    with resources.as_file(
        resources.files("lexalign").joinpath("data", "stopwords.txt")
    ) as path:
        return load_stopwords(path)


def filter_content(
    tokens: Sequence[Token],
    stopwords: frozenset[str] | set[str],
    doc_id: str = "",
) -> ContentStream:
    """Keep noun/verb/adjective/adverb tokens whose lemma is not stopworded.

    Original positions are preserved, so downstream windows can be measured
    on either the surface axis or the content axis.
    """
    kept = tuple(
        t for t in tokens if t.pos in CONTENT_POS and t.lemma not in stopwords
    )
    return ContentStream(doc_id=doc_id, tokens=kept, total_tokens=len(tokens))


def prepare_corpus(
    corpus: Corpus,
    annotator: Annotator | None = None,
    stopwords: frozenset[str] | None = None,
) -> list[ContentStream]:
    """Per-document content streams, in corpus order.

    A document whose annotation fails is skipped with a warning rather than
    aborting the run.
    """
    annotator = annotator or default_annotator()
    if stopwords is None:
        stopwords = bundled_stopwords()
    streams = []
    for doc in corpus:
        try:
            tagged = tag_and_lemmatize(tokenize(doc.body), annotator)
        except AnnotatorError as exc:
            log.warning("skipping document %s: %s", doc.id, exc)
            continue
        streams.append(filter_content(tagged, stopwords, doc_id=doc.id))
    return streams


def streams_to_payload(streams: Sequence[ContentStream]) -> dict:
    return {
        "format": PREP_FORMAT,
        "streams": [
            {
                "doc_id": s.doc_id,
                "total_tokens": s.total_tokens,
                "tokens": [
                    [t.surface, t.lemma, t.pos.value, t.position] for t in s.tokens
                ],
            }
            for s in streams
        ],
    }


def streams_from_payload(payload: dict) -> list[ContentStream]:
    if payload.get("format") != PREP_FORMAT:
        raise ValueError(f"unsupported prep format {payload.get('format')!r}")
    return [
        ContentStream(
            doc_id=s["doc_id"],
            total_tokens=s["total_tokens"],
            tokens=tuple(
                Token(surface=t[0], lemma=t[1], pos=Pos(t[2]), position=t[3])
                for t in s["tokens"]
            ),
        )
        for s in payload["streams"]
    ]


def save_streams(streams: Sequence[ContentStream], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(streams_to_payload(streams), ensure_ascii=False),
        encoding="utf-8",
    )


def load_streams(path: str | Path) -> list[ContentStream]:
    return streams_from_payload(json.loads(Path(path).read_text(encoding="utf-8")))
