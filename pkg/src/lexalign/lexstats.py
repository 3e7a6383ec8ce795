"""Keyness, windowed collocation mining, and the document-feature matrix.

Keyness uses the two-cell corpus-frequency log-likelihood: observed counts
of a lemma in a target and a reference corpus are compared against
expectations derived from the pooled relative frequency. Collocation
strength uses Log-Dice, which is corpus-size independent and capped at 14.

Window spans are measured on the content axis by default (adjacent content
words are at distance 1, i.e. stopword gaps are closed), switchable to the
surface axis where original token positions count.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from lexalign.corpus import Subset
from lexalign.textprep import ContentStream

log = logging.getLogger(__name__)

LOG_DICE_CAP = 14.0

# eligible window axes for collocation counting
AXES = ("content", "surface")


class LexstatsError(Exception):
    pass


@dataclass(frozen=True)
class KeywordEntry:
    lemma: str
    freq_target: int
    freq_reference: int
    ll_score: float


@dataclass(frozen=True)
class CollocationPair:
    node: str
    collocate: str
    joint_freq: int
    node_freq: int
    collocate_freq: int
    log_dice: float
    subset: Subset | None = None

    @property
    def feature_id(self) -> str:
        tag = self.subset.value if self.subset else "any"
        return f"{tag}:{self.node}|{self.collocate}"


def log_likelihood(
    freq_target: int, total_target: int, freq_reference: int, total_reference: int
) -> float:
    """Two-cell log-likelihood keyness score; zero-count terms contribute 0."""
    a, c = freq_target, total_target
    b, d = freq_reference, total_reference
    if c <= 0 or d <= 0:
        raise LexstatsError("corpus totals must be positive")
    pooled = a + b
    if pooled == 0:
        return 0.0
    e1 = c * pooled / (c + d)
    e2 = d * pooled / (c + d)
    ll = 0.0
    if a > 0:
        ll += a * math.log(a / e1)
    if b > 0:
        ll += b * math.log(b / e2)
    return 2.0 * ll


def log_dice(joint_freq: int, node_freq: int, collocate_freq: int) -> float:
    """14 + log2(2*joint / (node_freq + collocate_freq))."""
    if joint_freq <= 0:
        return float("-inf")
    return LOG_DICE_CAP + math.log2(2.0 * joint_freq / (node_freq + collocate_freq))


def _lemma_counts(streams: Iterable[ContentStream]) -> tuple[Counter, int]:
    counts: Counter = Counter()
    total = 0
    for stream in streams:
        for token in stream.tokens:
            counts[token.lemma] += 1
        total += len(stream.tokens)
    return counts, total


def keyness(
    target: Sequence[ContentStream],
    reference: Sequence[ContentStream],
    top_n: int | None = None,
    min_ll: float | None = None,
) -> list[KeywordEntry]:
    """Lemmas overused in the target relative to the reference corpus.

    Only strict overuse (target relative frequency above the reference one)
    qualifies; results are sorted by score descending, ties by lemma.
    """
    target_counts, c = _lemma_counts(target)
    reference_counts, d = _lemma_counts(reference)
    if c == 0 or d == 0:
        raise LexstatsError("keyness requires non-empty target and reference")

    entries = []
    for lemma, a in target_counts.items():
        b = reference_counts.get(lemma, 0)
        if a * d <= b * c:  # exact integer test for a/c > b/d
            continue
        ll = log_likelihood(a, c, b, d)
        if min_ll is not None and ll < min_ll:
            continue
        entries.append(KeywordEntry(lemma, a, b, ll))
    entries.sort(key=lambda e: (-e.ll_score, e.lemma))
    if top_n is not None:
        entries = entries[:top_n]
    return entries


def _positions(stream: ContentStream, axis: str) -> list[int]:
    if axis == "content":
        return list(range(len(stream.tokens)))
    if axis == "surface":
        return [t.position for t in stream.tokens]
    raise LexstatsError(f"unknown span axis {axis!r}; expected one of {AXES}")


def _window_pair_counts(
    stream: ContentStream, nodes: frozenset[str], span: int, axis: str
) -> Counter:
    """Co-occurrence counts of (node lemma, collocate lemma) occurrence pairs.

    Every (node occurrence, collocate occurrence) pair with position distance
    <= span counts once; a token never pairs with itself.
    """
    lemmas = [t.lemma for t in stream.tokens]
    pos = _positions(stream, axis)
    n = len(lemmas)
    joint: Counter = Counter()
    lo = 0
    hi = 0
    for i in range(n):
        if lemmas[i] not in nodes:
            continue
        while lo < n and pos[lo] < pos[i] - span:
            lo += 1
        if hi <= i:
            hi = i
        while hi < n and pos[hi] <= pos[i] + span:
            hi += 1
        for j in range(lo, hi):
            if j != i:
                joint[(lemmas[i], lemmas[j])] += 1
    return joint


def collocations(
    streams: Sequence[ContentStream],
    nodes: Iterable[str],
    span: int = 4,
    min_d: float = 7.0,
    top_n: int | None = 500,
    axis: str = "content",
    subset: Subset | None = None,
) -> list[CollocationPair]:
    """Node-collocate pairs within +-span, scored by Log-Dice.

    Nodes are the given keyword lemmas; any content lemma may collocate.
    Pairs with score >= min_d are ranked descending (ties by node, collocate)
    and the strongest top_n are kept.
    """
    if span < 1:
        raise LexstatsError("span must be >= 1")
    node_set = frozenset(nodes)
    if not node_set:
        raise LexstatsError("collocation mining needs a non-empty node set")

    freq, _ = _lemma_counts(streams)
    joint: Counter = Counter()
    for stream in streams:
        joint.update(_window_pair_counts(stream, node_set, span, axis))

    pairs = []
    for (node, collocate), j in joint.items():
        d_score = log_dice(j, freq[node], freq[collocate])
        if d_score >= min_d:
            pairs.append(
                CollocationPair(
                    node=node,
                    collocate=collocate,
                    joint_freq=j,
                    node_freq=freq[node],
                    collocate_freq=freq[collocate],
                    log_dice=d_score,
                    subset=subset,
                )
            )
    pairs.sort(key=lambda p: (-p.log_dice, p.node, p.collocate))
    if top_n is not None:
        pairs = pairs[:top_n]
    return pairs


@dataclass
class FeatureMatrix:
    """Documents x collocation-pair features, in three representations.

    `raw` holds windowed co-occurrence counts, `normalized` counts per 1,000
    content words, and `z` per-feature standardized values (population mean
    and sd over documents). Features constant across documents cannot be
    standardized; their z column is zeroed and their ids are recorded in
    `constant_features` so downstream factor extraction can drop them.
    """

    doc_ids: list[str]
    features: list[CollocationPair]
    raw: np.ndarray
    normalized: np.ndarray
    z: np.ndarray
    content_counts: list[int]
    constant_features: list[str] = field(default_factory=list)

    @property
    def feature_ids(self) -> list[str]:
        return [f.feature_id for f in self.features]

    @property
    def active_mask(self) -> np.ndarray:
        constant = set(self.constant_features)
        return np.array([fid not in constant for fid in self.feature_ids])

    def active(self) -> tuple[np.ndarray, list[CollocationPair]]:
        """z-matrix and feature list restricted to standardizable features."""
        mask = self.active_mask
        return self.z[:, mask], [f for f, m in zip(self.features, mask) if m]


def build_matrix(
    streams: Sequence[ContentStream],
    features: Sequence[CollocationPair],
    span: int = 4,
    axis: str = "content",
) -> FeatureMatrix:
    """Count each feature pair per document and standardize per feature.

    Documents with zero content words are excluded with a warning. The span
    and axis must match the ones used to mine the features.
    """
    if not features:
        raise LexstatsError("feature list is empty")
    kept = []
    for stream in streams:
        if len(stream.tokens) == 0:
            log.warning("document %s has no content words; excluded", stream.doc_id)
            continue
        kept.append(stream)
    if not kept:
        raise LexstatsError("no documents with content words")

    node_set = frozenset(f.node for f in features)
    index = {(f.node, f.collocate): col for col, f in enumerate(features)}
    raw = np.zeros((len(kept), len(features)))
    for row, stream in enumerate(kept):
        joint = _window_pair_counts(stream, node_set, span, axis)
        for pair, count in joint.items():
            col = index.get(pair)
            if col is not None:
                raw[row, col] = count

    counts = np.array([len(s.tokens) for s in kept], dtype=float)
    normalized = raw / counts[:, None] * 1000.0

    mean = normalized.mean(axis=0)
    sd = normalized.std(axis=0)
    constant = sd < 1e-12
    safe_sd = np.where(constant, 1.0, sd)
    z = (normalized - mean) / safe_sd
    z[:, constant] = 0.0

    matrix = FeatureMatrix(
        doc_ids=[s.doc_id for s in kept],
        features=list(features),
        raw=raw,
        normalized=normalized,
        z=z,
        content_counts=[int(c) for c in counts],
        constant_features=[
            f.feature_id for f, is_const in zip(features, constant) if is_const
        ],
    )
    if matrix.constant_features:
        log.warning(
            "%d constant feature(s) excluded from standardization",
            len(matrix.constant_features),
        )
    return matrix
