"""Factor extraction, varimax rotation, dimension scoring, exemplar picks.

Extraction is principal-component style on the feature correlation matrix:
deterministic, and checkable against an independent eigensolver. Rotation is
orthogonal varimax via pairwise plane rotations. Document dimension scores
follow the standard summation scheme: z-scores of positively assigned
features minus z-scores of negatively assigned ones.

Factor indices are 0-based throughout this module; presentation layers map
them to 1-based dimension labels.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_CUTOFF = 0.30


class FactorError(Exception):
    pass


class Pole(str, Enum):
    POSITIVE = "pos"
    NEGATIVE = "neg"

    @property
    def sign(self) -> int:
        return 1 if self is Pole.POSITIVE else -1

    @property
    def pretty(self) -> str:
        return "+" if self is Pole.POSITIVE else "-"


@dataclass
class Extraction:
    loadings: np.ndarray  # features x factors, unrotated
    explained_variance: np.ndarray  # top-n eigenvalues, descending
    scree: np.ndarray  # all eigenvalues, descending
    n_factors: int


@dataclass
class FactorModel:
    n_factors: int
    loadings: np.ndarray  # rotated, features x factors
    rotation: np.ndarray  # orthogonal, factors x factors
    explained_variance: np.ndarray
    scree: np.ndarray
    assignment: dict[int, tuple[int, int]]  # feature column -> (factor, sign)
    cutoff: float = DEFAULT_CUTOFF

    def assigned_features(self, factor: int) -> list[tuple[int, int]]:
        return [
            (col, sign)
            for col, (f, sign) in sorted(self.assignment.items())
            if f == factor
        ]


@dataclass(frozen=True)
class DimensionScore:
    doc_id: str
    factor: int
    score: float

    @property
    def pole(self) -> Pole:
        # zero scores sit on the positive pole by convention
        return Pole.POSITIVE if self.score >= 0 else Pole.NEGATIVE


def _fix_column_signs(loadings: np.ndarray) -> np.ndarray:
    fixed = loadings.copy()
    for j in range(fixed.shape[1]):
        col = fixed[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            fixed[:, j] = -col
    return fixed


def extract_factors(z: np.ndarray, n: int | None = None) -> Extraction:
    """Eigendecomposition of the feature correlation matrix.

    Loadings are sqrt(eigenvalue)-scaled eigenvectors of the top components.
    With n=None the factor count is the number of eigenvalues above the mean
    eigenvalue; the full eigenvalue series is returned either way so callers
    can inspect the scree and override.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2:
        raise FactorError("z must be a documents x features matrix")
    n_docs, n_features = z.shape
    sd = z.std(axis=0)
    if np.any(sd <= 0):
        dead = [int(i) for i in np.where(sd <= 0)[0]]
        raise FactorError(f"zero-variance feature column(s) {dead}; drop them first")

    corr = (z.T @ z) / n_docs
    corr = (corr + corr.T) / 2.0
    try:
        eigvals, eigvecs = np.linalg.eigh(corr)
    except np.linalg.LinAlgError as exc:
        raise FactorError(
            f"eigendecomposition failed: {exc}; cond={np.linalg.cond(corr):.3e}"
        ) from exc
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]

    if n is None:
        n = int(np.sum(eigvals > eigvals.mean()))
        n = max(n, 1)
    if n < 1 or n > n_features:
        raise FactorError(f"factor count {n} out of range 1..{n_features}")
    if n_docs < n + 1:
        raise FactorError(f"need at least {n + 1} documents for {n} factors")

    top = np.clip(eigvals[:n], 0.0, None)
    loadings = _fix_column_signs(eigvecs[:, :n] * np.sqrt(top))
    return Extraction(
        loadings=loadings,
        explained_variance=top.copy(),
        scree=eigvals.copy(),
        n_factors=n,
    )


def varimax_criterion(loadings: np.ndarray) -> float:
    """Sum over factors of the variance of squared loadings."""
    sq = np.asarray(loadings, dtype=float) ** 2
    return float(np.sum((sq**2).mean(axis=0) - sq.mean(axis=0) ** 2))


def rotate_varimax(
    loadings: np.ndarray,
    tol: float = 1e-10,
    max_sweeps: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal varimax rotation via pairwise plane rotations.

    Returns (rotated loadings, rotation matrix R) with rotated = loadings @ R.
    Sweeps over factor pairs until the criterion gain of a full sweep drops
    below `tol`. Column signs are fixed so the largest-magnitude entry per
    factor is positive, and columns are ordered by explained sum of squares.
    """
    a = np.array(loadings, dtype=float)
    if a.ndim != 2:
        raise FactorError("loadings must be 2-D")
    p, m = a.shape
    rot = np.eye(m)
    if m > 1:
        current = varimax_criterion(a)
        for _ in range(max_sweeps):
            for x in range(m - 1):
                for y in range(x + 1, m):
                    u = a[:, x] ** 2 - a[:, y] ** 2
                    v = 2.0 * a[:, x] * a[:, y]
                    big_a = u.sum()
                    big_b = v.sum()
                    num = 2.0 * (u @ v) - 2.0 * big_a * big_b / p
                    den = (u @ u) - (v @ v) - (big_a**2 - big_b**2) / p
                    phi = 0.25 * math.atan2(num, den)
                    if abs(phi) < 1e-14:
                        continue
                    cos, sin = math.cos(phi), math.sin(phi)
                    g = np.eye(m)
                    g[x, x] = cos
                    g[y, y] = cos
                    g[x, y] = -sin
                    g[y, x] = sin
                    # columns: x' = x cos + y sin, y' = -x sin + y cos
                    a = a @ g
                    rot = rot @ g
            updated = varimax_criterion(a)
            if updated - current < tol:
                break
            current = updated

    # canonical signs and ordering
    for j in range(m):
        if a[np.argmax(np.abs(a[:, j])), j] < 0:
            a[:, j] = -a[:, j]
            rot[:, j] = -rot[:, j]
    ss = (a**2).sum(axis=0)
    order = np.argsort(-ss, kind="stable")
    return a[:, order], rot[:, order]


def assign_features(
    loadings: np.ndarray, cutoff: float = DEFAULT_CUTOFF
) -> dict[int, tuple[int, int]]:
    """Each feature goes to its max-|loading| factor if above the cutoff."""
    assignment: dict[int, tuple[int, int]] = {}
    for i, row in enumerate(np.asarray(loadings, dtype=float)):
        f = int(np.argmax(np.abs(row)))
        value = row[f]
        if abs(value) >= cutoff:
            assignment[i] = (f, 1 if value >= 0 else -1)
    return assignment


def fit_factors(
    z: np.ndarray, n: int | None = None, cutoff: float = DEFAULT_CUTOFF
) -> FactorModel:
    """Extraction, rotation, and feature assignment in one pass."""
    extraction = extract_factors(z, n)
    rotated, rotation = rotate_varimax(extraction.loadings)
    return FactorModel(
        n_factors=extraction.n_factors,
        loadings=rotated,
        rotation=rotation,
        explained_variance=extraction.explained_variance,
        scree=extraction.scree,
        assignment=assign_features(rotated, cutoff),
        cutoff=cutoff,
    )


def score_documents(
    z: np.ndarray, model: FactorModel, doc_ids: Sequence[str]
) -> list[DimensionScore]:
    """Summation dimension scores: positive-feature z minus negative-feature z.

    A factor with no assigned features is excluded with a warning.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[0] != len(doc_ids):
        raise FactorError("doc_ids length does not match z rows")
    scores = []
    for factor in range(model.n_factors):
        assigned = model.assigned_features(factor)
        if not assigned:
            log.warning("factor %d has no assigned features; skipped", factor)
            continue
        cols = np.array([c for c, _ in assigned])
        signs = np.array([s for _, s in assigned], dtype=float)
        values = z[:, cols] @ signs
        for doc_id, value in zip(doc_ids, values):
            scores.append(DimensionScore(doc_id=doc_id, factor=factor, score=float(value)))
    return scores


def select_exemplars(
    scores: Sequence[DimensionScore], k: int = 5
) -> dict[tuple[int, Pole], list[DimensionScore]]:
    """Top-k documents per (factor, pole) by absolute score.

    Ties break by doc id; a pole with fewer than k documents returns all of
    them with a warning.
    """
    if k < 1:
        raise FactorError("k must be >= 1")
    grouped: dict[tuple[int, Pole], list[DimensionScore]] = {}
    for s in scores:
        grouped.setdefault((s.factor, s.pole), []).append(s)
    out: dict[tuple[int, Pole], list[DimensionScore]] = {}
    for key in sorted(grouped, key=lambda kp: (kp[0], kp[1].value)):
        ranked = sorted(grouped[key], key=lambda s: (-abs(s.score), s.doc_id))
        if len(ranked) < k:
            log.warning(
                "factor %d pole %s has only %d document(s); returning all",
                key[0],
                key[1].value,
                len(ranked),
            )
        out[key] = ranked[:k]
    return out


@dataclass(frozen=True)
class DimensionDescriptor:
    """Expert-written labels and typical vocabulary for one dimension."""

    dim_index: int  # 1-based, as presented in reports and prompts
    short_label_pos: str
    short_label_neg: str
    long_label_pos: str
    long_label_neg: str
    vocabulary_pos: tuple[str, ...] = ()
    vocabulary_neg: tuple[str, ...] = ()

    def label(self, pole: Pole) -> str:
        return self.short_label_pos if pole is Pole.POSITIVE else self.short_label_neg

    def description(self, pole: Pole) -> str:
        return self.long_label_pos if pole is Pole.POSITIVE else self.long_label_neg

    def vocabulary(self, pole: Pole) -> tuple[str, ...]:
        return self.vocabulary_pos if pole is Pole.POSITIVE else self.vocabulary_neg


def load_descriptors(path: str | Path) -> dict[int, DimensionDescriptor]:
    """Descriptor file: JSON with a `dimensions` list keyed by 1-based index."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    out = {}
    for entry in payload["dimensions"]:
        d = DimensionDescriptor(
            dim_index=int(entry["dim"]),
            short_label_pos=entry["short_label_pos"],
            short_label_neg=entry["short_label_neg"],
            long_label_pos=entry["long_label_pos"],
            long_label_neg=entry["long_label_neg"],
            vocabulary_pos=tuple(entry.get("vocabulary_pos", ())),
            vocabulary_neg=tuple(entry.get("vocabulary_neg", ())),
        )
        out[d.dim_index] = d
    return out
