import time
from pathlib import Path

import pytest

from lexalign.pipeline import Paths, RunConfig, run_pipeline

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "lexalign" / "data"
DEMO_CORPUS = DATA_DIR / "demo_corpus"


def write_corpus(tmp_path: Path, rows: list[tuple[str, str, str]]) -> tuple[Path, Path]:
    """Write a manifest + body files; rows are (id, subset, body)."""
    root = tmp_path / "corpus"
    (root / "texts").mkdir(parents=True, exist_ok=True)
    lines = ["id,subset,title,year,path"]
    for doc_id, subset, body in rows:
        (root / "texts" / f"{doc_id}.txt").write_text(body, encoding="utf-8")
        lines.append(f"{doc_id},{subset},Title {doc_id},2021,texts/{doc_id}.txt")
    manifest = root / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return root, manifest


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory) -> tuple[RunConfig, Paths, float]:
    """Full offline pipeline over the bundled demo corpus, run once."""
    workdir = tmp_path_factory.mktemp("demo_run")
    config = RunConfig(
        corpus_root=str(DEMO_CORPUS),
        manifest=str(DEMO_CORPUS / "manifest.csv"),
        workdir=str(workdir),
        n_factors=3,
    )
    started = time.monotonic()
    run_pipeline(config)
    elapsed = time.monotonic() - started
    return config, Paths(workdir), elapsed
