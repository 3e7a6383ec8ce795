"""Alignment scoring between generated answers and pole reference texts.

Semantic alignment pools window embeddings of long texts (length-weighted
mean of per-window vectors, L2-normalized) and takes the cosine of the two
pooled vectors. Lexical alignment trains a two-document TF-IDF (smooth idf,
L2 norm) on exactly the answer text and the reference text and takes the
cosine of the two weight vectors. A one-way ANOVA compares the no-context
and retrieval conditions per prompt type.

Report tables carry values as decimals with half-up rounding so printed
averages match what a reader computes from the printed rows.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from lexalign.factors import Pole
from lexalign.llmgate import AnswerRecord
from lexalign.retrieval import EmbeddingProvider, ExemplarText
from lexalign.textprep import tokenize

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 256
DEFAULT_WINDOW_OVERLAP = 64

# printed tables round to two decimals; differences under half a printing
# unit are flagged as "no change"
MARKER_EPSILON = Decimal("0.005")


class EvalError(Exception):
    pass


class Kind(str, Enum):
    SEMANTIC = "Semantic"
    LEXICAL = "Lexical"


class Condition(str, Enum):
    LLM = "LLM"
    RAG = "RAG"


class PromptType(str, Enum):
    REGULAR = "Regular"
    ENHANCED = "Enhanced"


@dataclass(frozen=True)
class AlignmentScore:
    model: str
    dim: int
    pole: Pole
    condition: Condition
    prompt_type: PromptType
    kind: Kind
    value: float | None  # None marks a missing cell
    n_answers: int = 0


@dataclass(frozen=True)
class AnovaResult:
    prompt_type: PromptType
    kind: Kind
    f_statistic: float
    p_value: float
    df: tuple[int, int]
    n_llm: int
    n_rag: int

    @property
    def significant_at_05(self) -> bool:
        return self.p_value < 0.05


def _token_windows(tokens: list[str], window: int, overlap: int) -> list[list[str]]:
    if window <= overlap or overlap < 0:
        raise EvalError("need window > overlap >= 0")
    stride = window - overlap
    windows = []
    start = 0
    while start < len(tokens):
        windows.append(tokens[start : start + window])
        if start + window >= len(tokens):
            break
        start += stride
    return windows


def _pooled_embedding(
    text: str, provider: EmbeddingProvider, window: int, overlap: int
) -> np.ndarray:
    tokens = provider.tokenize(text)
    if not tokens:
        raise EvalError("cannot embed a text with no tokens")
    limit = provider.max_tokens
    if limit is None or len(tokens) <= limit:
        windows = [tokens]
    else:
        windows = _token_windows(tokens, window, overlap)
    vectors = provider.encode([" ".join(w) for w in windows])
    weights = np.array([len(w) for w in windows], dtype=float)
    pooled = (weights[:, None] * vectors).sum(axis=0) / weights.sum()
    norm = np.linalg.norm(pooled)
    if norm < 1e-12:
        raise EvalError("pooled embedding collapsed to zero")
    return pooled / norm


def semantic_alignment(
    answers: str,
    reference: str,
    provider: EmbeddingProvider,
    window: int = DEFAULT_WINDOW,
    overlap: int = DEFAULT_WINDOW_OVERLAP,
) -> float:
    """Cosine of the pooled window embeddings of the two texts."""
    a = _pooled_embedding(answers, provider, window, overlap)
    b = _pooled_embedding(reference, provider, window, overlap)
    return float(a @ b)


def lexical_alignment(answers: str, reference: str) -> float:
    """Cosine of two-document TF-IDF vectors.

    The vocabulary is the union of the two token bags; idf uses the smooth
    variant ln((1+N)/(1+df)) + 1 with N=2 documents. Empty text after
    tokenization scores 0 with a warning.
    """
    tokens_a = tokenize(answers)
    tokens_b = tokenize(reference)
    if not tokens_a or not tokens_b:
        log.warning("lexical alignment on empty text; scoring 0")
        return 0.0
    counts_a = Counter(tokens_a)
    counts_b = Counter(tokens_b)
    vocabulary = sorted(set(counts_a) | set(counts_b))
    idf = {
        term: math.log(3.0 / (1.0 + ((term in counts_a) + (term in counts_b)))) + 1.0
        for term in vocabulary
    }
    vec_a = np.array([counts_a.get(t, 0) * idf[t] for t in vocabulary])
    vec_b = np.array([counts_b.get(t, 0) * idf[t] for t in vocabulary])
    return float(
        (vec_a @ vec_b) / (np.linalg.norm(vec_a) * np.linalg.norm(vec_b))
    )


def log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    eps = 1e-16
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise EvalError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - log_beta(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def f_survival(f: float, df1: int, df2: int) -> float:
    """P(F >= f) for an F(df1, df2) distribution."""
    if math.isinf(f):
        return 0.0
    if f <= 0.0:
        return 1.0
    x = df2 / (df2 + df1 * f)
    return regularized_incomplete_beta(x, df2 / 2.0, df1 / 2.0)


def one_way_anova(group_a: Sequence[float], group_b: Sequence[float]) -> tuple[float, float, tuple[int, int]]:
    """One-way F test of two groups; returns (F, p, (df1, df2)).

    Zero within-group variance with unequal means yields the infinity
    sentinel and p=0; equal groups yield F=0, p=1.
    """
    if not group_a or not group_b:
        raise EvalError("ANOVA needs two non-empty groups")
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    n1, n2 = len(a), len(b)
    df = (1, n1 + n2 - 2)
    if df[1] < 1:
        raise EvalError("ANOVA needs at least three observations in total")
    grand = (a.sum() + b.sum()) / (n1 + n2)
    ssb = n1 * (a.mean() - grand) ** 2 + n2 * (b.mean() - grand) ** 2
    ssw = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
    if ssw == 0.0:
        if ssb == 0.0:
            return 0.0, 1.0, df
        return float("inf"), 0.0, df
    f = (ssb / df[0]) / (ssw / df[1])
    return float(f), f_survival(float(f), *df), df


def reference_texts(exemplars: Iterable[ExemplarText]) -> dict[tuple[int, Pole], str]:
    """Concatenated exemplar bodies per (dim, pole), in rank order."""
    buckets: dict[tuple[int, Pole], list[ExemplarText]] = defaultdict(list)
    for ex in exemplars:
        buckets[(ex.dim, ex.pole)].append(ex)
    return {
        key: "\n".join(e.text for e in sorted(group, key=lambda e: e.rank))
        for key, group in buckets.items()
    }


def concatenate_answers(records: Sequence[AnswerRecord]) -> str:
    ordered = sorted(records, key=lambda r: (r.question_id, r.repeat_index))
    return "\n".join(r.answer_text for r in ordered)


def score_records(
    records: Sequence[AnswerRecord],
    references: dict[tuple[int, Pole], str],
    provider: EmbeddingProvider,
    kinds: Sequence[Kind] = (Kind.SEMANTIC, Kind.LEXICAL),
    window: int = DEFAULT_WINDOW,
    overlap: int = DEFAULT_WINDOW_OVERLAP,
) -> list[AlignmentScore]:
    """One alignment score per (model, dim, pole, condition, prompt type, kind).

    All answers of a cell are concatenated before scoring. A provider failure
    marks the cell missing instead of aborting the run.
    """
    cells: dict[tuple, list[AnswerRecord]] = defaultdict(list)
    for record in records:
        if record.error is not None:
            continue
        key = (
            record.model,
            record.dim,
            record.pole,
            Condition(record.mode.condition),
            PromptType(record.mode.prompt_type),
        )
        cells[key].append(record)

    scores = []
    for key in sorted(cells, key=lambda k: (k[0], k[1], k[2].value, k[3].value, k[4].value)):
        model, dim, pole, condition, prompt_type = key
        reference = references.get((dim, pole))
        if reference is None:
            raise EvalError(f"no reference text for dimension {dim} pole {pole.value}")
        answers = concatenate_answers(cells[key])
        for kind in kinds:
            try:
                if kind is Kind.SEMANTIC:
                    value = semantic_alignment(
                        answers, reference, provider, window, overlap
                    )
                else:
                    value = lexical_alignment(answers, reference)
            except Exception as exc:  # provider failures included
                log.warning(
                    "cell %s/%s dim %d %s %s %s marked missing: %s",
                    model,
                    kind.value,
                    dim,
                    pole.value,
                    condition.value,
                    prompt_type.value,
                    exc,
                )
                value = None
            scores.append(
                AlignmentScore(
                    model=model,
                    dim=dim,
                    pole=pole,
                    condition=condition,
                    prompt_type=prompt_type,
                    kind=kind,
                    value=value,
                    n_answers=len(cells[key]),
                )
            )
    return scores


def anova_llm_vs_rag(
    scores: Sequence[AlignmentScore], prompt_type: PromptType, kind: Kind
) -> AnovaResult:
    """Compare all LLM-condition cells against all RAG-condition cells."""
    llm = [
        s.value
        for s in scores
        if s.prompt_type == prompt_type
        and s.kind == kind
        and s.condition == Condition.LLM
        and s.value is not None
    ]
    rag = [
        s.value
        for s in scores
        if s.prompt_type == prompt_type
        and s.kind == kind
        and s.condition == Condition.RAG
        and s.value is not None
    ]
    f, p, df = one_way_anova(llm, rag)
    return AnovaResult(
        prompt_type=prompt_type,
        kind=kind,
        f_statistic=f,
        p_value=p,
        df=df,
        n_llm=len(llm),
        n_rag=len(rag),
    )


def save_scores(scores: Sequence[AlignmentScore], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["model", "dim", "pole", "condition", "prompt_type", "kind", "value", "n_answers"]
        )
        for s in scores:
            writer.writerow(
                [
                    s.model,
                    s.dim,
                    s.pole.value,
                    s.condition.value,
                    s.prompt_type.value,
                    s.kind.value,
                    "" if s.value is None else repr(s.value),
                    s.n_answers,
                ]
            )


def _quantize(value: float | None) -> Decimal | None:
    if value is None:
        return None
    return Decimal(str(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def _marker(llm: Decimal | None, rag: Decimal | None) -> str:
    if llm is None or rag is None:
        return " "
    if abs(rag - llm) < MARKER_EPSILON:
        return "→"
    return "↑" if rag > llm else "↓"


def _cell_pair(llm: Decimal | None, rag: Decimal | None) -> str:
    left = "  NA" if llm is None else f"{llm:>4}"
    right = "  NA " if rag is None else f"{rag:>4}{_marker(llm, rag)}"
    return f"{left}  {right}"


def _model_order(scores: Sequence[AlignmentScore]) -> list[str]:
    seen: list[str] = []
    for s in scores:
        if s.model not in seen:
            seen.append(s.model)
    return seen


def render_alignment_table(
    scores: Sequence[AlignmentScore], prompt_type: PromptType
) -> str:
    """Fixed-width table: model rows x (dim, pole) column pairs, LLM vs RAG.

    Positive poles print before negative ones. The Average row is the
    half-up-rounded arithmetic mean of the model rows, and the arrows mark
    the RAG-vs-LLM direction at printed precision.
    """
    relevant = [s for s in scores if s.prompt_type == prompt_type]
    if not relevant:
        raise EvalError(f"no scores for prompt type {prompt_type.value}")
    models = _model_order(relevant)
    dims = sorted({s.dim for s in relevant})
    columns = [(d, Pole.POSITIVE) for d in dims] + [(d, Pole.NEGATIVE) for d in dims]
    width = max(len("Model"), len("Average"), *(len(m) for m in models)) + 3

    table: dict[tuple, Decimal | None] = {}
    for s in relevant:
        table[(s.model, s.dim, s.pole, s.condition, s.kind)] = _quantize(s.value)

    lines = [f"Alignment with pole reference texts ({prompt_type.value} prompt)"]
    for kind in (Kind.SEMANTIC, Kind.LEXICAL):
        lines.append("")
        lines.append(kind.value)
        header = "Model".ljust(width)
        header += "".join(f"Dim {d} ({p.pretty})".ljust(13) for d, p in columns)
        lines.append(header.rstrip())
        sub = " " * width + "".join(f"{'LLM':>4}  {'RAG':<5}  " for _ in columns)
        lines.append(sub.rstrip())

        sums: dict[tuple, Decimal] = defaultdict(lambda: Decimal(0))
        counts: dict[tuple, int] = defaultdict(int)
        for model in models:
            row = model.ljust(width)
            for dim, pole in columns:
                llm = table.get((model, dim, pole, Condition.LLM, kind))
                rag = table.get((model, dim, pole, Condition.RAG, kind))
                for condition, value in ((Condition.LLM, llm), (Condition.RAG, rag)):
                    if value is not None:
                        sums[(dim, pole, condition)] += value
                        counts[(dim, pole, condition)] += 1
                row += _cell_pair(llm, rag) + "  "
            lines.append(row.rstrip())

        row = "Average".ljust(width)
        for dim, pole in columns:
            means = {}
            for condition in (Condition.LLM, Condition.RAG):
                n = counts[(dim, pole, condition)]
                means[condition] = (
                    (sums[(dim, pole, condition)] / n).quantize(
                        Decimal("0.01"), rounding=ROUND_HALF_UP
                    )
                    if n
                    else None
                )
            row += _cell_pair(means[Condition.LLM], means[Condition.RAG]) + "  "
        lines.append(row.rstrip())
    return "\n".join(lines) + "\n"


def _format_p(p: float) -> str:
    if p == 0.0:
        return "0"
    if p >= 0.001:
        return f"{p:.3f}"
    return f"{p:.1e}"


def render_anova_table(results: Sequence[AnovaResult]) -> str:
    lines = [
        "ANOVA: LLM vs RAG alignment scores",
        f"{'Kind':<10}{'Prompt Type':<14}{'F-statistic':<14}{'p-value':<12}(p < 0.05)",
    ]
    for r in results:
        f_text = "inf" if math.isinf(r.f_statistic) else f"{r.f_statistic:.2f}"
        mark = "yes" if r.significant_at_05 else "no"
        lines.append(
            f"{r.kind.value:<10}{r.prompt_type.value:<14}{f_text:<14}"
            f"{_format_p(r.p_value):<12}{mark}"
        )
    return "\n".join(lines) + "\n"


def build_report(scores: Sequence[AlignmentScore], out_dir: str | Path) -> list[Path]:
    """Write alignment tables, the ANOVA summary, and bar-plot data.

    Missing cells are disclosed next to the ANOVA table and excluded from
    every aggregate.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    prompt_types = [p for p in PromptType if any(s.prompt_type == p for s in scores)]
    for prompt_type in prompt_types:
        path = out / f"table_{prompt_type.value.lower()}.txt"
        path.write_text(render_alignment_table(scores, prompt_type), encoding="utf-8")
        written.append(path)

    anovas = []
    for kind in (Kind.SEMANTIC, Kind.LEXICAL):
        for prompt_type in prompt_types:
            anovas.append(anova_llm_vs_rag(scores, prompt_type, kind))
    missing = sum(1 for s in scores if s.value is None)
    anova_text = render_anova_table(anovas)
    anova_text += f"missing cells excluded: {missing}\n"
    anova_path = out / "anova.txt"
    anova_path.write_text(anova_text, encoding="utf-8")
    written.append(anova_path)

    csv_path = out / "overall_similarity.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prompt_type", "kind", "condition", "mean_value", "n_cells"])
        for prompt_type in prompt_types:
            for kind in (Kind.SEMANTIC, Kind.LEXICAL):
                for condition in (Condition.LLM, Condition.RAG):
                    values = [
                        s.value
                        for s in scores
                        if s.prompt_type == prompt_type
                        and s.kind == kind
                        and s.condition == condition
                        and s.value is not None
                    ]
                    mean = sum(values) / len(values) if values else ""
                    writer.writerow(
                        [
                            prompt_type.value,
                            kind.value,
                            condition.value,
                            f"{mean:.6f}" if values else "",
                            len(values),
                        ]
                    )
    written.append(csv_path)
    return written


def load_scores(path: str | Path) -> list[AlignmentScore]:
    scores = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            scores.append(
                AlignmentScore(
                    model=row["model"],
                    dim=int(row["dim"]),
                    pole=Pole(row["pole"]),
                    condition=Condition(row["condition"]),
                    prompt_type=PromptType(row["prompt_type"]),
                    kind=Kind(row["kind"]),
                    value=float(row["value"]) if row["value"] else None,
                    n_answers=int(row["n_answers"]),
                )
            )
    return scores
