"""Command-line front door wiring the pipeline stages.

Subcommands mirror the stage artifacts: ingest, prep, keyness, colloc,
matrix, factor, exemplars, index, prompt, experiment, eval, report, verify,
plus ``run`` which executes any subset of stages from a config file with
digest-based caching. Secrets are never accepted as flags; endpoints name
environment variables instead.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from lexalign import corpus as corpus_mod
from lexalign import evalstat, factors, lexstats, llmgate, pipeline, promptgen, retrieval
from lexalign.corpus import Subset
from lexalign.factors import Pole
from lexalign.textprep import bundled_stopwords, load_stopwords, load_streams, prepare_corpus, save_streams

log = logging.getLogger(__name__)


def _add_run(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("run", help="run pipeline stages from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--stages", help="comma-separated stage subset (default: all)")

    def command(args: argparse.Namespace) -> int:
        config = pipeline.RunConfig.load(args.config)
        stages = args.stages.split(",") if args.stages else None
        for stage, status in pipeline.run_pipeline(config, stages):
            print(f"{stage}: {status}")
        return 0

    p.set_defaults(command=command)


def _add_verify(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("verify", help="re-check the provenance chain of a run")
    p.add_argument("--config", required=True)

    def command(args: argparse.Namespace) -> int:
        problems = pipeline.verify_provenance(pipeline.RunConfig.load(args.config))
        if problems:
            for problem in problems:
                print(problem)
            return 1
        print("provenance chain verified")
        return 0

    p.set_defaults(command=command)


def _add_ingest(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("ingest", help="load a manifest-described corpus")
    p.add_argument("--root", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    def command(args: argparse.Namespace) -> int:
        corpus = corpus_mod.load_corpus(args.root, args.manifest)
        corpus_mod.save_corpus(corpus, args.out)
        print(f"ingested {len(corpus)} documents -> {args.out}")
        return 0

    p.set_defaults(command=command)


def _add_prep(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("prep", help="tokenize, tag, and filter to content lemmas")
    p.add_argument("--corpus", required=True)
    p.add_argument("--stopwords")
    p.add_argument("--out", required=True)

    def command(args: argparse.Namespace) -> int:
        corpus = corpus_mod.load_corpus_cache(args.corpus)
        stopwords = (
            load_stopwords(args.stopwords) if args.stopwords else bundled_stopwords()
        )
        streams = prepare_corpus(corpus, stopwords=stopwords)
        save_streams(streams, args.out)
        print(f"prepared {len(streams)} content streams -> {args.out}")
        return 0

    p.set_defaults(command=command)


def _split_streams(corpus_path: str, prep_path: str):
    corpus = corpus_mod.load_corpus_cache(corpus_path)
    subset_of = {d.id: d.subset for d in corpus}
    grouped: dict[Subset, list] = {Subset.ENDORSED: [], Subset.CONTROVERSIAL: []}
    for stream in load_streams(prep_path):
        grouped[subset_of[stream.doc_id]].append(stream)
    return grouped


def _add_keyness(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("keyness", help="log-likelihood keywords of one subset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--prep", required=True)
    p.add_argument("--target", required=True, choices=[s.value for s in Subset])
    p.add_argument("--reference", required=True, choices=[s.value for s in Subset])
    p.add_argument("--top", type=int)
    p.add_argument("--min-ll", type=float)
    p.add_argument("--out", required=True)

    def command(args: argparse.Namespace) -> int:
        grouped = _split_streams(args.corpus, args.prep)
        target = Subset(args.target)
        entries = lexstats.keyness(
            grouped[target],
            grouped[Subset(args.reference)],
            top_n=args.top,
            min_ll=args.min_ll,
        )
        pipeline.save_keywords(entries, target, Path(args.out))
        print(f"{len(entries)} keywords -> {args.out}")
        return 0

    p.set_defaults(command=command)


def _add_colloc(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("colloc", help="windowed Log-Dice collocations of one subset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--prep", required=True)
    p.add_argument("--keywords", required=True)
    p.add_argument("--subset", required=True, choices=[s.value for s in Subset])
    p.add_argument("--span", type=int, default=4)
    p.add_argument("--min-d", type=float, default=7.0)
    p.add_argument("--top", type=int, default=500)
    p.add_argument("--span-axis", choices=lexstats.AXES, default="content")
    p.add_argument("--out", required=True)

    def command(args: argparse.Namespace) -> int:
        grouped = _split_streams(args.corpus, args.prep)
        subset = Subset(args.subset)
        nodes = [e.lemma for e in pipeline.load_keywords(Path(args.keywords))]
        pairs = lexstats.collocations(
            grouped[subset],
            nodes,
            span=args.span,
            min_d=args.min_d,
            top_n=args.top,
            axis=args.span_axis,
            subset=subset,
        )
        pipeline.save_pairs(pairs, Path(args.out), args.span, args.span_axis, args.min_d)
        print(f"{len(pairs)} collocation pairs -> {args.out}")
        return 0

    p.set_defaults(command=command)


def _add_matrix(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("matrix", help="document x feature matrix")
    p.add_argument("--prep", required=True)
    p.add_argument("--colloc", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="also export an audit CSV")
    p.add_argument("--values", choices=["raw", "normalized", "z"], default="z")

    def command(args: argparse.Namespace) -> int:
        streams = load_streams(args.prep)
        pairs, meta = pipeline.load_pairs(Path(args.colloc))
        matrix = lexstats.build_matrix(streams, pairs, span=meta["span"], axis=meta["axis"])
        pipeline.save_matrix(matrix, Path(args.out))
        if args.csv:
            pipeline.export_matrix_csv(matrix, Path(args.csv), values=args.values)
        print(
            f"matrix {matrix.raw.shape[0]} docs x {matrix.raw.shape[1]} features "
            f"({len(matrix.constant_features)} constant) -> {args.out}"
        )
        return 0

    p.set_defaults(command=command)


def _add_factor(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("factor", help="extract and rotate factors")
    p.add_argument("--matrix", required=True)
    p.add_argument("--n", default="auto", help="factor count or 'auto'")
    p.add_argument("--cutoff", type=float, default=factors.DEFAULT_CUTOFF)
    p.add_argument("--out", required=True)
    p.add_argument("--scree", help="eigenvalue series CSV")

    def command(args: argparse.Namespace) -> int:
        matrix = pipeline.load_matrix(Path(args.matrix))
        z, active = matrix.active()
        n = None if args.n == "auto" else int(args.n)
        model = factors.fit_factors(z, n=n, cutoff=args.cutoff)
        pipeline.save_model(model, [f.feature_id for f in active], Path(args.out))
        if args.scree:
            with open(args.scree, "w", encoding="utf-8") as fh:
                fh.write("factor,eigenvalue\n")
                for i, value in enumerate(model.scree, start=1):
                    fh.write(f"{i},{value!r}\n")
        print(f"{model.n_factors} factors -> {args.out}")
        return 0

    p.set_defaults(command=command)


def _add_exemplars(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("exemplars", help="top-k pole exemplar texts")
    p.add_argument("--corpus", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--dims", default="1,2,3", help="1-based dimensions to keep")
    p.add_argument("--out", required=True)

    def command(args: argparse.Namespace) -> int:
        corpus = corpus_mod.load_corpus_cache(args.corpus)
        matrix = pipeline.load_matrix(Path(args.matrix))
        z, _ = matrix.active()
        model, _ = pipeline.load_model(Path(args.model))
        scores = factors.score_documents(z, model, matrix.doc_ids)
        wanted = {int(d) for d in args.dims.split(",")}
        exemplars = []
        for (factor, pole), ranked in factors.select_exemplars(scores, k=args.k).items():
            if factor + 1 not in wanted:
                continue
            for rank, s in enumerate(ranked, start=1):
                exemplars.append(
                    retrieval.ExemplarText(
                        doc_id=s.doc_id,
                        dim=factor + 1,
                        pole=pole,
                        rank=rank,
                        score=s.score,
                        text=corpus.get(s.doc_id).body,
                    )
                )
        retrieval.save_exemplars(exemplars, args.out)
        print(f"{len(exemplars)} exemplar texts -> {args.out}")
        return 0

    p.set_defaults(command=command)


def _add_index(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("index", help="chunk and embed exemplar texts")
    p.add_argument("--exemplars", required=True)
    p.add_argument("--size", type=int, default=retrieval.DEFAULT_CHUNK_SIZE)
    p.add_argument("--overlap", type=int, default=retrieval.DEFAULT_CHUNK_OVERLAP)
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--url", help="HTTP embedding endpoint (default: bundled provider)")
    p.add_argument("--auth-env")
    p.add_argument("--out", required=True)

    def command(args: argparse.Namespace) -> int:
        exemplars = retrieval.load_exemplars(args.exemplars)
        chunks = retrieval.chunk_documents(exemplars, size=args.size, overlap=args.overlap)
        if args.url:
            embedder = retrieval.HttpEmbedder(args.url, args.dim, auth_env=args.auth_env)
        else:
            embedder = retrieval.HashEmbedder(dim=args.dim, seed=args.seed)
        index = retrieval.build_index(chunks, embedder)
        retrieval.save_index(index, args.out)
        print(f"indexed {len(index)} chunks -> {args.out}")
        return 0

    p.set_defaults(command=command)


def _add_prompt(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("prompt", help="prompt tools")
    inner = p.add_subparsers(dest="prompt_command", required=True)
    pv = inner.add_parser("preview", help="print the exact prompt for a question")
    pv.add_argument("--mode", required=True, choices=[m.value for m in promptgen.PromptMode])
    pv.add_argument("--dim", type=int, default=1)
    pv.add_argument("--pole", choices=[pl.value for pl in Pole], default="pos")
    pv.add_argument("--question", required=True)
    pv.add_argument("--descriptors")
    pv.add_argument("--templates")
    pv.add_argument("--index", help="retrieve passages from this index")
    pv.add_argument("--k", type=int, default=3)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument(
        "--passage", action="append", default=[], help="explicit passage (repeatable)"
    )

    def command(args: argparse.Namespace) -> int:
        mode = promptgen.PromptMode(args.mode)
        pole = Pole(args.pole)
        passages = list(args.passage)
        if mode.is_rag and args.index:
            index = retrieval.load_index(args.index)
            embedder = retrieval.HashEmbedder(dim=index.vectors.shape[1], seed=args.seed)
            query = retrieval.make_query(args.question, args.dim, pole, embedder)
            passages = [sc.chunk.text for sc in retrieval.retrieve(query, index, k=args.k)]
        descriptor = None
        if mode.is_enhanced:
            path = args.descriptors or pipeline.RunConfig().descriptors_path()
            descriptor = factors.load_descriptors(path)[args.dim]
        bundle = promptgen.PromptBundle(
            question=args.question,
            mode=mode,
            passages=tuple(passages),
            descriptor=descriptor,
            pole=pole if mode.is_enhanced else None,
        )
        sys.stdout.write(promptgen.render(bundle, args.templates))
        return 0

    pv.set_defaults(command=command)


def _add_experiment(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("experiment", help="experiment grid tools")
    inner = p.add_subparsers(dest="experiment_command", required=True)
    run = inner.add_parser("run", help="run the answer-generation grid")
    run.add_argument("--config", required=True)
    run.add_argument("--modes", help="comma-separated prompt modes (default: config)")
    run.add_argument(
        "--resume",
        action="store_true",
        help="skip answers already in the record log (always on; flag kept for scripts)",
    )
    run.add_argument(
        "--fresh", action="store_true", help="delete the existing record log first"
    )

    def command(args: argparse.Namespace) -> int:
        config = pipeline.RunConfig.load(args.config)
        if args.modes:
            config.modes = args.modes.split(",")
        paths = pipeline.Paths(Path(config.workdir))
        if args.fresh and paths.answers.exists():
            paths.answers.unlink()
        pipeline.stage_experiment(config, paths)
        store = llmgate.RecordStore(paths.answers)
        print(f"{len(store)} answer records in {paths.answers}")
        return 0

    run.set_defaults(command=command)


def _add_eval(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("eval", help="alignment scores for answer records")
    p.add_argument("--records", required=True)
    p.add_argument("--references", required=True, help="exemplars file")
    p.add_argument("--kind", choices=["both", "semantic", "lexical"], default="both")
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--url", help="HTTP embedding endpoint (default: bundled provider)")
    p.add_argument("--auth-env")
    p.add_argument("--window", type=int, default=evalstat.DEFAULT_WINDOW)
    p.add_argument("--overlap", type=int, default=evalstat.DEFAULT_WINDOW_OVERLAP)
    p.add_argument("--out", required=True)

    def command(args: argparse.Namespace) -> int:
        records = llmgate.RecordStore(args.records).load()
        references = evalstat.reference_texts(retrieval.load_exemplars(args.references))
        if args.url:
            provider = retrieval.HttpEmbedder(args.url, args.dim, auth_env=args.auth_env)
        else:
            provider = retrieval.HashEmbedder(dim=args.dim, seed=args.seed)
        kinds = {
            "both": (evalstat.Kind.SEMANTIC, evalstat.Kind.LEXICAL),
            "semantic": (evalstat.Kind.SEMANTIC,),
            "lexical": (evalstat.Kind.LEXICAL,),
        }[args.kind]
        scores = evalstat.score_records(
            records,
            references,
            provider,
            kinds=kinds,
            window=args.window,
            overlap=args.overlap,
        )
        evalstat.save_scores(scores, args.out)
        print(f"{len(scores)} alignment scores -> {args.out}")
        return 0

    p.set_defaults(command=command)


def _add_report(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("report", help="alignment tables, ANOVA, plot data")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)

    def command(args: argparse.Namespace) -> int:
        scores = evalstat.load_scores(args.scores)
        for path in evalstat.build_report(scores, args.out):
            print(f"wrote {path}")
        return 0

    p.set_defaults(command=command)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexalign",
        description=__doc__.split("\n")[0] if __doc__ else "",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for add in (
        _add_run,
        _add_verify,
        _add_ingest,
        _add_prep,
        _add_keyness,
        _add_colloc,
        _add_matrix,
        _add_factor,
        _add_exemplars,
        _add_index,
        _add_prompt,
        _add_experiment,
        _add_eval,
        _add_report,
    ):
        add(sub)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.command(args)
    except (
        corpus_mod.CorpusError,
        lexstats.LexstatsError,
        factors.FactorError,
        retrieval.RetrievalError,
        retrieval.EmbeddingError,
        promptgen.PromptError,
        llmgate.GenerationError,
        evalstat.EvalError,
        pipeline.PipelineError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
