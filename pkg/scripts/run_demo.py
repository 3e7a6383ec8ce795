#!/usr/bin/env python3
"""Run the whole offline pipeline on the bundled demo corpus.

Executes ingest through report with the mock chat endpoint and the
deterministic embedding provider, then prints where the artifacts landed and
the headline directional numbers. Everything is offline and seeded; two runs
produce byte-identical reports.

Usage:
  python scripts/run_demo.py [--workdir demo_run]
"""

from __future__ import annotations

import argparse
from importlib import resources
from pathlib import Path

from lexalign.evalstat import Condition, Kind, PromptType, load_scores
from lexalign.pipeline import Paths, RunConfig, run_pipeline


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default="demo_run")
    args = parser.parse_args()

    demo = Path(str(resources.files("lexalign"))) / "data" / "demo_corpus"
    config = RunConfig(
        corpus_root=str(demo),
        manifest=str(demo / "manifest.csv"),
        workdir=args.workdir,
        n_factors=3,
    )
    config.save(Path(args.workdir + ".config.json"))
    for stage, status in run_pipeline(config):
        print(f"{stage}: {status}")

    paths = Paths(Path(args.workdir))
    scores = load_scores(paths.scores)
    for kind in (Kind.SEMANTIC, Kind.LEXICAL):
        for prompt_type in (PromptType.REGULAR, PromptType.ENHANCED):
            cells = [
                s
                for s in scores
                if s.kind is kind and s.prompt_type is prompt_type and s.value is not None
            ]
            llm = [s.value for s in cells if s.condition is Condition.LLM]
            rag = [s.value for s in cells if s.condition is Condition.RAG]
            print(
                f"{kind.value:<9} {prompt_type.value:<9} "
                f"LLM avg {sum(llm) / len(llm):.3f}   RAG avg {sum(rag) / len(rag):.3f}"
            )
    print(f"report under {paths.report_dir}")


if __name__ == "__main__":
    main()
