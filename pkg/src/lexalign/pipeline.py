"""End-to-end pipeline: ingest through report, with artifact provenance.

Every stage writes versioned artifacts into the configured work directory
and records the SHA-256 digests of its inputs, outputs, and the config in
``provenance.json``. A stage whose recorded digests still match is skipped
on rerun, so stages backed by paid APIs never silently re-execute; the
``verify`` entry point re-checks the whole chain.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from lexalign import corpus as corpus_mod
from lexalign import evalstat, factors, lexstats, llmgate, promptgen, retrieval
from lexalign.corpus import Subset
from lexalign.factors import FactorModel, Pole
from lexalign.textprep import (
    bundled_stopwords,
    load_stopwords,
    load_streams,
    prepare_corpus,
    save_streams,
)

log = logging.getLogger(__name__)

KEYWORDS_FORMAT = "lexalign-keywords/1"
COLLOC_FORMAT = "lexalign-colloc/1"
MATRIX_FORMAT = "lexalign-matrix/1"
MODEL_FORMAT = "lexalign-factor/1"


class PipelineError(Exception):
    pass


def _bundled(name: str) -> Path:
    with resources.as_file(resources.files("lexalign") / "data" / name) as path:
        return Path(path)


@dataclass
class RunConfig:
    """All knobs of one pipeline run; JSON round-trips losslessly."""

    corpus_root: str = "."
    manifest: str = "manifest.csv"
    workdir: str = "run"
    stopwords: str | None = None  # None -> bundled list
    templates_dir: str | None = None
    descriptors: str | None = None
    questions: str | None = None
    span: int = 4
    span_axis: str = "content"
    min_d: float = 7.0
    top_n: int = 500
    keyword_top_n: int | None = None
    keyword_min_ll: float | None = None
    n_factors: int | None = None  # None -> mean-eigenvalue rule
    cutoff: float = 0.30
    dimensions: list[int] = field(default_factory=lambda: [1, 2, 3])
    exemplar_k: int = 5
    chunk_size: int = 300
    chunk_overlap: int = 50
    k: int = 3
    repeats: int = 5
    window: int = 256
    overlap: int = 64
    seed: int = 0
    temperature: float = 0.7
    max_output_tokens: int = 1024
    modes: list[str] = field(
        default_factory=lambda: [m.value for m in promptgen.PromptMode]
    )
    embedding: dict = field(default_factory=lambda: {"provider": "hash", "dim": 384})
    models: list[dict] = field(
        default_factory=lambda: [{"name": "mock-echo", "kind": "mock"}]
    )

    def __post_init__(self):
        positive = {
            "span": self.span,
            "min_d": self.min_d,
            "top_n": self.top_n,
            "cutoff": self.cutoff,
            "exemplar_k": self.exemplar_k,
            "chunk_size": self.chunk_size,
            "k": self.k,
            "repeats": self.repeats,
            "window": self.window,
            "overlap": self.overlap,
        }
        for name, value in positive.items():
            if value <= 0:
                raise PipelineError(f"config threshold {name} must be positive")
        if self.chunk_overlap < 0 or self.chunk_overlap >= self.chunk_size:
            raise PipelineError("need chunk_size > chunk_overlap >= 0")
        if self.overlap >= self.window:
            raise PipelineError("need window > overlap")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise PipelineError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    # resolved resource paths -------------------------------------------

    def stopwords_set(self) -> frozenset[str]:
        return load_stopwords(self.stopwords) if self.stopwords else bundled_stopwords()

    def templates_path(self) -> Path:
        if self.templates_dir:
            return Path(self.templates_dir)
        return promptgen.default_templates_dir()

    def descriptors_path(self) -> Path:
        return Path(self.descriptors) if self.descriptors else _bundled("descriptors.json")

    def questions_path(self) -> Path:
        return Path(self.questions) if self.questions else _bundled("questions.json")

    def build_embedder(self) -> retrieval.EmbeddingProvider:
        kind = self.embedding.get("provider", "hash")
        if kind == "hash":
            return retrieval.HashEmbedder(
                dim=int(self.embedding.get("dim", 384)),
                seed=int(self.embedding.get("seed", self.seed)),
                max_tokens=self.embedding.get("max_tokens", 256),
            )
        if kind == "http":
            return retrieval.HttpEmbedder(
                url=self.embedding["url"],
                dim=int(self.embedding["dim"]),
                auth_env=self.embedding.get("auth_env"),
                max_tokens=self.embedding.get("max_tokens"),
            )
        raise PipelineError(f"unknown embedding provider {kind!r}")

    def build_endpoints(self) -> list[llmgate.ModelEndpoint]:
        endpoints = []
        names = set()
        for entry in self.models:
            endpoint = llmgate.ModelEndpoint(
                name=entry["name"],
                kind=entry.get("kind", "mock"),
                base_url=entry.get("base_url", ""),
                auth_env=entry.get("auth_env"),
                model_id=entry.get("model_id", ""),
                temperature=float(entry.get("temperature", self.temperature)),
                max_output_tokens=int(
                    entry.get("max_output_tokens", self.max_output_tokens)
                ),
            )
            if endpoint.name in names:
                raise PipelineError(f"duplicate endpoint name {endpoint.name!r}")
            names.add(endpoint.name)
            endpoints.append(endpoint)
        return endpoints


@dataclass
class Paths:
    workdir: Path

    @property
    def corpus(self) -> Path:
        return self.workdir / "corpus.json"

    @property
    def prep(self) -> Path:
        return self.workdir / "prep.json"

    def keywords(self, subset: Subset) -> Path:
        return self.workdir / f"keywords_{subset.value}.json"

    @property
    def colloc(self) -> Path:
        return self.workdir / "colloc.json"

    @property
    def matrix(self) -> Path:
        return self.workdir / "matrix.json"

    @property
    def matrix_csv(self) -> Path:
        return self.workdir / "matrix_z.csv"

    @property
    def model(self) -> Path:
        return self.workdir / "model.json"

    @property
    def scree(self) -> Path:
        return self.workdir / "scree.csv"

    @property
    def exemplars(self) -> Path:
        return self.workdir / "exemplars.json"

    @property
    def index(self) -> Path:
        return self.workdir / "index.json"

    @property
    def answers(self) -> Path:
        return self.workdir / "answers.jsonl"

    @property
    def scores(self) -> Path:
        return self.workdir / "scores.csv"

    @property
    def report_dir(self) -> Path:
        return self.workdir / "report"

    @property
    def provenance(self) -> Path:
        return self.workdir / "provenance.json"


# ---------------------------------------------------------------------------
# artifact helpers


def save_keywords(
    entries: Sequence[lexstats.KeywordEntry], subset: Subset, path: Path
) -> None:
    payload = {
        "format": KEYWORDS_FORMAT,
        "subset": subset.value,
        "entries": [
            {
                "lemma": e.lemma,
                "freq_target": e.freq_target,
                "freq_reference": e.freq_reference,
                "ll_score": e.ll_score,
            }
            for e in entries
        ],
    }
    path.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_keywords(path: Path) -> list[lexstats.KeywordEntry]:
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format") != KEYWORDS_FORMAT:
        raise PipelineError(f"unsupported keywords format in {path}")
    return [
        lexstats.KeywordEntry(
            lemma=e["lemma"],
            freq_target=e["freq_target"],
            freq_reference=e["freq_reference"],
            ll_score=e["ll_score"],
        )
        for e in payload["entries"]
    ]


def save_pairs(
    pairs: Sequence[lexstats.CollocationPair], path: Path, span: int, axis: str, min_d: float
) -> None:
    payload = {
        "format": COLLOC_FORMAT,
        "span": span,
        "axis": axis,
        "min_d": min_d,
        "pairs": [
            {
                "node": p.node,
                "collocate": p.collocate,
                "joint_freq": p.joint_freq,
                "node_freq": p.node_freq,
                "collocate_freq": p.collocate_freq,
                "log_dice": p.log_dice,
                "subset": p.subset.value if p.subset else None,
            }
            for p in pairs
        ],
    }
    path.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_pairs(path: Path) -> tuple[list[lexstats.CollocationPair], dict]:
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format") != COLLOC_FORMAT:
        raise PipelineError(f"unsupported collocation format in {path}")
    pairs = [
        lexstats.CollocationPair(
            node=p["node"],
            collocate=p["collocate"],
            joint_freq=p["joint_freq"],
            node_freq=p["node_freq"],
            collocate_freq=p["collocate_freq"],
            log_dice=p["log_dice"],
            subset=Subset(p["subset"]) if p["subset"] else None,
        )
        for p in payload["pairs"]
    ]
    meta = {k: payload[k] for k in ("span", "axis", "min_d")}
    return pairs, meta


def save_matrix(matrix: lexstats.FeatureMatrix, path: Path) -> None:
    payload = {
        "format": MATRIX_FORMAT,
        "doc_ids": matrix.doc_ids,
        "features": [
            {
                "node": f.node,
                "collocate": f.collocate,
                "joint_freq": f.joint_freq,
                "node_freq": f.node_freq,
                "collocate_freq": f.collocate_freq,
                "log_dice": f.log_dice,
                "subset": f.subset.value if f.subset else None,
            }
            for f in matrix.features
        ],
        "raw": matrix.raw.tolist(),
        "normalized": matrix.normalized.tolist(),
        "z": matrix.z.tolist(),
        "content_counts": matrix.content_counts,
        "constant_features": matrix.constant_features,
    }
    path.write_text(json.dumps(payload), encoding="utf-8")


def load_matrix(path: Path) -> lexstats.FeatureMatrix:
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format") != MATRIX_FORMAT:
        raise PipelineError(f"unsupported matrix format in {path}")
    features = [
        lexstats.CollocationPair(
            node=f["node"],
            collocate=f["collocate"],
            joint_freq=f["joint_freq"],
            node_freq=f["node_freq"],
            collocate_freq=f["collocate_freq"],
            log_dice=f["log_dice"],
            subset=Subset(f["subset"]) if f["subset"] else None,
        )
        for f in payload["features"]
    ]
    return lexstats.FeatureMatrix(
        doc_ids=payload["doc_ids"],
        features=features,
        raw=np.asarray(payload["raw"], dtype=float),
        normalized=np.asarray(payload["normalized"], dtype=float),
        z=np.asarray(payload["z"], dtype=float),
        content_counts=payload["content_counts"],
        constant_features=payload["constant_features"],
    )


def export_matrix_csv(matrix: lexstats.FeatureMatrix, path: Path, values: str = "z") -> None:
    grid = {"raw": matrix.raw, "normalized": matrix.normalized, "z": matrix.z}[values]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("doc_id," + ",".join(matrix.feature_ids) + "\n")
        for doc_id, row in zip(matrix.doc_ids, grid):
            fh.write(doc_id + "," + ",".join(repr(v) for v in row) + "\n")


def save_model(model: FactorModel, feature_ids: Sequence[str], path: Path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "n_factors": model.n_factors,
        "cutoff": model.cutoff,
        "feature_ids": list(feature_ids),
        "loadings": model.loadings.tolist(),
        "rotation": model.rotation.tolist(),
        "explained_variance": model.explained_variance.tolist(),
        "scree": model.scree.tolist(),
        "assignment": [
            {"feature": feature_ids[col], "column": col, "factor": f, "sign": sign}
            for col, (f, sign) in sorted(model.assignment.items())
        ],
    }
    path.write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: Path) -> tuple[FactorModel, list[str]]:
    payload = json.loads(path.read_text(encoding="utf-8"))
    if payload.get("format") != MODEL_FORMAT:
        raise PipelineError(f"unsupported factor model format in {path}")
    model = FactorModel(
        n_factors=payload["n_factors"],
        loadings=np.asarray(payload["loadings"], dtype=float),
        rotation=np.asarray(payload["rotation"], dtype=float),
        explained_variance=np.asarray(payload["explained_variance"], dtype=float),
        scree=np.asarray(payload["scree"], dtype=float),
        assignment={
            a["column"]: (a["factor"], a["sign"]) for a in payload["assignment"]
        },
        cutoff=payload["cutoff"],
    )
    return model, payload["feature_ids"]


# ---------------------------------------------------------------------------
# stages


def stage_ingest(config: RunConfig, paths: Paths) -> None:
    corpus = corpus_mod.load_corpus(config.corpus_root, config.manifest)
    corpus_mod.save_corpus(corpus, paths.corpus)


def stage_prep(config: RunConfig, paths: Paths) -> None:
    corpus = corpus_mod.load_corpus_cache(paths.corpus)
    streams = prepare_corpus(corpus, stopwords=config.stopwords_set())
    save_streams(streams, paths.prep)


def _streams_by_subset(paths: Paths):
    corpus = corpus_mod.load_corpus_cache(paths.corpus)
    subset_of = {d.id: d.subset for d in corpus}
    streams = load_streams(paths.prep)
    grouped = {Subset.ENDORSED: [], Subset.CONTROVERSIAL: []}
    for stream in streams:
        grouped[subset_of[stream.doc_id]].append(stream)
    return streams, grouped


def stage_keyness(config: RunConfig, paths: Paths) -> None:
    _, grouped = _streams_by_subset(paths)
    for target, reference in (
        (Subset.ENDORSED, Subset.CONTROVERSIAL),
        (Subset.CONTROVERSIAL, Subset.ENDORSED),
    ):
        entries = lexstats.keyness(
            grouped[target],
            grouped[reference],
            top_n=config.keyword_top_n,
            min_ll=config.keyword_min_ll,
        )
        save_keywords(entries, target, paths.keywords(target))
        log.info("keyness %s vs %s: %d keywords", target.value, reference.value, len(entries))


def stage_colloc(config: RunConfig, paths: Paths) -> None:
    _, grouped = _streams_by_subset(paths)
    all_pairs = []
    for subset in (Subset.ENDORSED, Subset.CONTROVERSIAL):
        nodes = [e.lemma for e in load_keywords(paths.keywords(subset))]
        pairs = lexstats.collocations(
            grouped[subset],
            nodes,
            span=config.span,
            min_d=config.min_d,
            top_n=config.top_n,
            axis=config.span_axis,
            subset=subset,
        )
        log.info("collocations %s: %d pairs", subset.value, len(pairs))
        all_pairs.extend(pairs)
    save_pairs(all_pairs, paths.colloc, config.span, config.span_axis, config.min_d)


def stage_matrix(config: RunConfig, paths: Paths) -> None:
    streams = load_streams(paths.prep)
    pairs, meta = load_pairs(paths.colloc)
    matrix = lexstats.build_matrix(
        streams, pairs, span=meta["span"], axis=meta["axis"]
    )
    save_matrix(matrix, paths.matrix)
    export_matrix_csv(matrix, paths.matrix_csv, values="z")


def stage_factor(config: RunConfig, paths: Paths) -> None:
    matrix = load_matrix(paths.matrix)
    z, active_features = matrix.active()
    model = factors.fit_factors(z, n=config.n_factors, cutoff=config.cutoff)
    save_model(model, [f.feature_id for f in active_features], paths.model)
    with open(paths.scree, "w", encoding="utf-8") as fh:
        fh.write("factor,eigenvalue\n")
        for i, value in enumerate(model.scree, start=1):
            fh.write(f"{i},{value!r}\n")


def stage_exemplars(config: RunConfig, paths: Paths) -> None:
    corpus = corpus_mod.load_corpus_cache(paths.corpus)
    matrix = load_matrix(paths.matrix)
    z, _ = matrix.active()
    model, _ = load_model(paths.model)
    scores = factors.score_documents(z, model, matrix.doc_ids)
    selected = factors.select_exemplars(scores, k=config.exemplar_k)
    exemplars = []
    for (factor, pole), ranked in selected.items():
        dim = factor + 1
        if dim not in config.dimensions:
            continue
        for rank, score in enumerate(ranked, start=1):
            exemplars.append(
                retrieval.ExemplarText(
                    doc_id=score.doc_id,
                    dim=dim,
                    pole=pole,
                    rank=rank,
                    score=score.score,
                    text=corpus.get(score.doc_id).body,
                )
            )
    retrieval.save_exemplars(exemplars, paths.exemplars)
    log.info("selected %d exemplar texts", len(exemplars))


def stage_index(config: RunConfig, paths: Paths) -> None:
    exemplars = retrieval.load_exemplars(paths.exemplars)
    chunks = retrieval.chunk_documents(
        exemplars, size=config.chunk_size, overlap=config.chunk_overlap
    )
    index = retrieval.build_index(chunks, config.build_embedder())
    retrieval.save_index(index, paths.index)


def stage_experiment(config: RunConfig, paths: Paths) -> None:
    runner = llmgate.GridRunner(
        endpoints=config.build_endpoints(),
        questions=llmgate.load_questions(config.questions_path()),
        descriptors=factors.load_descriptors(config.descriptors_path()),
        store=llmgate.RecordStore(paths.answers),
        modes=[promptgen.PromptMode(m) for m in config.modes],
        repeats=config.repeats,
        index=retrieval.load_index(paths.index),
        embedder=config.build_embedder(),
        top_k=config.k,
        templates_dir=config.templates_path(),
    )
    stats = runner.run()
    log.info(
        "experiment grid: %d generated, %d skipped, %d failed",
        stats.generated,
        stats.skipped,
        stats.failed,
    )


def stage_eval(config: RunConfig, paths: Paths) -> None:
    records = llmgate.RecordStore(paths.answers).load()
    references = evalstat.reference_texts(retrieval.load_exemplars(paths.exemplars))
    scores = evalstat.score_records(
        records,
        references,
        config.build_embedder(),
        window=config.window,
        overlap=config.overlap,
    )
    evalstat.save_scores(scores, paths.scores)


def stage_report(config: RunConfig, paths: Paths) -> None:
    scores = evalstat.load_scores(paths.scores)
    evalstat.build_report(scores, paths.report_dir)


@dataclass(frozen=True)
class Stage:
    name: str
    run: Callable[[RunConfig, Paths], None]
    inputs: Callable[[RunConfig, Paths], list[Path]]
    outputs: Callable[[RunConfig, Paths], list[Path]]
    producer_hint: str = ""


STAGES: list[Stage] = [
    Stage(
        "ingest",
        stage_ingest,
        lambda c, p: [Path(c.manifest)],
        lambda c, p: [p.corpus],
    ),
    Stage(
        "prep",
        stage_prep,
        lambda c, p: [p.corpus],
        lambda c, p: [p.prep],
    ),
    Stage(
        "keyness",
        stage_keyness,
        lambda c, p: [p.corpus, p.prep],
        lambda c, p: [p.keywords(Subset.ENDORSED), p.keywords(Subset.CONTROVERSIAL)],
    ),
    Stage(
        "colloc",
        stage_colloc,
        lambda c, p: [
            p.corpus,
            p.prep,
            p.keywords(Subset.ENDORSED),
            p.keywords(Subset.CONTROVERSIAL),
        ],
        lambda c, p: [p.colloc],
    ),
    Stage(
        "matrix",
        stage_matrix,
        lambda c, p: [p.prep, p.colloc],
        lambda c, p: [p.matrix, p.matrix_csv],
    ),
    Stage(
        "factor",
        stage_factor,
        lambda c, p: [p.matrix],
        lambda c, p: [p.model, p.scree],
    ),
    Stage(
        "exemplars",
        stage_exemplars,
        lambda c, p: [p.corpus, p.matrix, p.model],
        lambda c, p: [p.exemplars],
    ),
    Stage(
        "index",
        stage_index,
        lambda c, p: [p.exemplars],
        lambda c, p: [p.index],
    ),
    Stage(
        "experiment",
        stage_experiment,
        lambda c, p: [p.index, c.questions_path(), c.descriptors_path()],
        lambda c, p: [p.answers],
    ),
    Stage(
        "eval",
        stage_eval,
        lambda c, p: [p.answers, p.exemplars],
        lambda c, p: [p.scores],
    ),
    Stage(
        "report",
        stage_report,
        lambda c, p: [p.scores],
        lambda c, p: [
            p.report_dir / "anova.txt",
            p.report_dir / "overall_similarity.csv",
        ],
    ),
]

_STAGE_BY_NAME = {s.name: s for s in STAGES}
_PRODUCER: dict[str, str] = {}
for _stage in STAGES:
    for _out in _stage.outputs(RunConfig(), Paths(Path("run"))):
        _PRODUCER[_out.name] = _stage.name


def _digest_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _digest_inputs(files: Sequence[Path]) -> dict[str, str]:
    digests = {}
    for path in files:
        if path.is_dir():
            for sub in sorted(path.rglob("*")):
                if sub.is_file():
                    digests[str(sub)] = _digest_file(sub)
        elif path.is_file():
            digests[str(path)] = _digest_file(path)
    return digests


def _load_provenance(paths: Paths) -> dict:
    if paths.provenance.exists():
        return json.loads(paths.provenance.read_text(encoding="utf-8"))
    return {}


def _store_provenance(paths: Paths, data: dict) -> None:
    paths.provenance.write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")


def _stage_fresh(entry: dict | None, config: RunConfig, inputs: list[Path], outputs: list[Path]) -> bool:
    if not entry:
        return False
    if entry.get("config_digest") != config.digest():
        return False
    if entry.get("inputs") != _digest_inputs(inputs):
        return False
    for path in outputs:
        if not path.exists():
            return False
    return entry.get("outputs") == _digest_inputs(outputs)


def run_pipeline(
    config: RunConfig, stages: Sequence[str] | None = None
) -> list[tuple[str, str]]:
    """Execute the requested stages in dependency order.

    Returns (stage, status) pairs with status "ran" or "cached". A requested
    stage whose upstream artifact is missing fails with the stage to run
    first named in the error.
    """
    requested = [s.name for s in STAGES] if stages is None else list(stages)
    unknown = set(requested) - set(_STAGE_BY_NAME)
    if unknown:
        raise PipelineError(f"unknown stage(s) {sorted(unknown)}")
    paths = Paths(Path(config.workdir))
    paths.workdir.mkdir(parents=True, exist_ok=True)

    provenance = _load_provenance(paths)
    results = []
    for stage in STAGES:
        if stage.name not in requested:
            continue
        inputs = stage.inputs(config, paths)
        for path in inputs:
            if not path.exists():
                producer = _PRODUCER.get(path.name)
                if producer:
                    raise PipelineError(
                        f"stage {stage.name!r} needs {path.name}; run {producer!r} first"
                    )
                raise PipelineError(f"stage {stage.name!r} input {path} not found")
        outputs = stage.outputs(config, paths)
        if _stage_fresh(provenance.get(stage.name), config, inputs, outputs):
            log.info("stage %s: cached", stage.name)
            results.append((stage.name, "cached"))
            continue
        log.info("stage %s: running", stage.name)
        stage.run(config, paths)
        provenance[stage.name] = {
            "config_digest": config.digest(),
            "inputs": _digest_inputs(inputs),
            "outputs": _digest_inputs(stage.outputs(config, paths)),
        }
        _store_provenance(paths, provenance)
        results.append((stage.name, "ran"))
    return results


def verify_provenance(config: RunConfig) -> list[str]:
    """Re-check recorded digests of every completed stage; return problems."""
    paths = Paths(Path(config.workdir))
    provenance = _load_provenance(paths)
    problems = []
    if not provenance:
        return [f"no provenance recorded under {paths.workdir}"]
    for stage in STAGES:
        entry = provenance.get(stage.name)
        if entry is None:
            continue
        if entry.get("config_digest") != config.digest():
            problems.append(f"{stage.name}: config changed since this stage ran")
        for kind in ("inputs", "outputs"):
            for name, digest in entry.get(kind, {}).items():
                path = Path(name)
                if not path.exists():
                    problems.append(f"{stage.name}: {kind[:-1]} {name} missing")
                elif _digest_file(path) != digest:
                    problems.append(f"{stage.name}: {kind[:-1]} {name} digest mismatch")
    return problems
