import json
from pathlib import Path

import pytest

import lexalign.cli as cli
from lexalign.pipeline import (
    Paths,
    PipelineError,
    RunConfig,
    run_pipeline,
    verify_provenance,
)

from conftest import DEMO_CORPUS


def demo_config(workdir: Path, **overrides) -> RunConfig:
    return RunConfig(
        corpus_root=str(DEMO_CORPUS),
        manifest=str(DEMO_CORPUS / "manifest.csv"),
        workdir=str(workdir),
        n_factors=3,
        **overrides,
    )


# --- config ------------------------------------------------------------------


def test_config_roundtrip_identity(tmp_path):
    config = demo_config(tmp_path, repeats=2, top_n=123)
    path = tmp_path / "cfg.json"
    config.save(path)
    assert RunConfig.load(path) == config
    assert RunConfig.from_dict(config.to_dict()) == config


def test_config_defaults_match_contract():
    config = RunConfig()
    assert (config.span, config.min_d, config.top_n) == (4, 7.0, 500)
    assert (config.cutoff, config.k, config.repeats) == (0.30, 3, 5)
    assert (config.window, config.overlap) == (256, 64)
    assert config.exemplar_k == 5
    assert (config.chunk_size, config.chunk_overlap) == (300, 50)


def test_config_rejects_bad_thresholds():
    with pytest.raises(PipelineError, match="positive"):
        RunConfig(span=0)
    with pytest.raises(PipelineError, match="chunk"):
        RunConfig(chunk_size=50, chunk_overlap=50)
    with pytest.raises(PipelineError, match="window"):
        RunConfig(window=64, overlap=64)


def test_config_rejects_unknown_keys():
    with pytest.raises(PipelineError, match="unknown config keys"):
        RunConfig.from_dict({"not_a_field": 1})


# --- staging ------------------------------------------------------------------


def test_missing_upstream_names_producer(tmp_path):
    config = demo_config(tmp_path / "run")
    run_pipeline(config, stages=["ingest"])
    with pytest.raises(PipelineError, match="run 'prep' first"):
        run_pipeline(config, stages=["keyness"])


def test_unknown_stage_rejected(tmp_path):
    with pytest.raises(PipelineError, match="unknown stage"):
        run_pipeline(demo_config(tmp_path), stages=["compile"])


def test_full_pipeline_produces_report(demo_run):
    config, paths, _ = demo_run
    for artifact in (
        paths.corpus,
        paths.prep,
        paths.colloc,
        paths.matrix,
        paths.model,
        paths.scree,
        paths.exemplars,
        paths.index,
        paths.answers,
        paths.scores,
    ):
        assert artifact.exists(), artifact
    report = paths.report_dir
    assert (report / "table_regular.txt").exists()
    assert (report / "table_enhanced.txt").exists()
    assert (report / "anova.txt").exists()
    assert (report / "overall_similarity.csv").exists()


def test_rerun_hits_cache(demo_run):
    config, paths, _ = demo_run
    results = run_pipeline(config)
    assert all(status == "cached" for _, status in results)


def test_verify_passes_then_detects_tampering(tmp_path):
    config = demo_config(tmp_path / "run")
    run_pipeline(config, stages=["ingest", "prep"])
    assert verify_provenance(config) == []
    paths = Paths(Path(config.workdir))
    payload = json.loads(paths.prep.read_text())
    payload["streams"][0]["doc_id"] = "tampered"
    paths.prep.write_text(json.dumps(payload))
    problems = verify_provenance(config)
    assert any("digest mismatch" in p for p in problems)


def test_stage_rerun_after_config_change(tmp_path):
    config = demo_config(tmp_path / "run")
    run_pipeline(config, stages=["ingest"])
    changed = demo_config(tmp_path / "run", top_n=400)
    results = run_pipeline(changed, stages=["ingest"])
    assert results == [("ingest", "ran")]


def test_mock_report_byte_identical_across_runs(demo_run, tmp_path):
    config, paths, _ = demo_run
    other = demo_config(tmp_path / "replica")
    run_pipeline(other)
    replica = Paths(Path(other.workdir))
    for name in ("table_regular.txt", "table_enhanced.txt", "anova.txt", "overall_similarity.csv"):
        assert (replica.report_dir / name).read_bytes() == (
            paths.report_dir / name
        ).read_bytes()
    assert replica.answers.read_bytes() == paths.answers.read_bytes()


# --- artifact loaders -----------------------------------------------------------


def test_matrix_artifact_roundtrip(demo_run):
    from lexalign.pipeline import load_matrix

    _, paths, _ = demo_run
    matrix = load_matrix(paths.matrix)
    assert matrix.raw.shape[0] == 12
    assert matrix.raw.shape[1] == 1000
    assert len(matrix.doc_ids) == 12


def test_model_artifact_roundtrip(demo_run):
    from lexalign.pipeline import load_model

    _, paths, _ = demo_run
    model, feature_ids = load_model(paths.model)
    assert model.n_factors == 3
    assert model.loadings.shape[0] == len(feature_ids)


# --- CLI -------------------------------------------------------------------------


def test_cli_stagewise_flow(tmp_path, capsys):
    out = tmp_path / "art"
    out.mkdir()
    demo = str(DEMO_CORPUS)
    assert cli.main([
        "ingest", "--root", demo, "--manifest", f"{demo}/manifest.csv",
        "--out", f"{out}/corpus.json",
    ]) == 0
    assert cli.main([
        "prep", "--corpus", f"{out}/corpus.json", "--out", f"{out}/prep.json",
    ]) == 0
    assert cli.main([
        "keyness", "--corpus", f"{out}/corpus.json", "--prep", f"{out}/prep.json",
        "--target", "endorsed", "--reference", "controversial",
        "--out", f"{out}/keywords.json",
    ]) == 0
    assert cli.main([
        "colloc", "--corpus", f"{out}/corpus.json", "--prep", f"{out}/prep.json",
        "--keywords", f"{out}/keywords.json", "--subset", "endorsed",
        "--span", "4", "--min-d", "7", "--top", "500",
        "--out", f"{out}/colloc.json",
    ]) == 0
    assert cli.main([
        "matrix", "--prep", f"{out}/prep.json", "--colloc", f"{out}/colloc.json",
        "--out", f"{out}/matrix.json", "--csv", f"{out}/matrix.csv",
    ]) == 0
    assert cli.main([
        "factor", "--matrix", f"{out}/matrix.json", "--n", "3",
        "--out", f"{out}/model.json", "--scree", f"{out}/scree.csv",
    ]) == 0
    assert cli.main([
        "exemplars", "--corpus", f"{out}/corpus.json", "--matrix", f"{out}/matrix.json",
        "--model", f"{out}/model.json", "--out", f"{out}/exemplars.json",
    ]) == 0
    assert cli.main([
        "index", "--exemplars", f"{out}/exemplars.json", "--out", f"{out}/index.json",
    ]) == 0
    captured = capsys.readouterr().out
    assert "500 collocation pairs" in captured
    assert Path(f"{out}/matrix.csv").exists()
    assert Path(f"{out}/scree.csv").exists()


def test_cli_run_and_verify(tmp_path, capsys):
    config = demo_config(tmp_path / "run")
    cfg_path = tmp_path / "cfg.json"
    config.save(cfg_path)
    assert cli.main(["run", "--config", str(cfg_path), "--stages", "ingest,prep"]) == 0
    out = capsys.readouterr().out
    assert "ingest: ran" in out and "prep: ran" in out
    assert cli.main(["verify", "--config", str(cfg_path)]) == 0
    assert "verified" in capsys.readouterr().out


def test_cli_run_missing_upstream_errors(tmp_path, capsys):
    config = demo_config(tmp_path / "run")
    cfg_path = tmp_path / "cfg.json"
    config.save(cfg_path)
    assert cli.main(["run", "--config", str(cfg_path), "--stages", "factor"]) == 2
    assert "first" in capsys.readouterr().err


def test_cli_prompt_preview(tmp_path, capsys):
    assert cli.main([
        "prompt", "preview", "--mode", "enhanced-nocontext", "--dim", "1",
        "--pole", "pos", "--question", "Does the dosage matter?",
    ]) == 0
    out = capsys.readouterr().out
    assert "Dimension label:" in out
    assert "Does the dosage matter?" in out


def test_cli_prompt_preview_with_passages(capsys):
    assert cli.main([
        "prompt", "preview", "--mode", "regular-rag", "--question", "q?",
        "--passage", "First.", "--passage", "Second.",
    ]) == 0
    out = capsys.readouterr().out
    assert "[1] First.\n[2] Second." in out


def test_cli_eval_and_report(demo_run, tmp_path, capsys):
    _, paths, _ = demo_run
    scores_out = tmp_path / "scores.csv"
    assert cli.main([
        "eval", "--records", str(paths.answers), "--references", str(paths.exemplars),
        "--out", str(scores_out),
    ]) == 0
    assert scores_out.exists()
    report_dir = tmp_path / "report"
    assert cli.main(["report", "--scores", str(scores_out), "--out", str(report_dir)]) == 0
    assert (report_dir / "anova.txt").exists()


def test_cli_experiment_run_resume(demo_run, tmp_path, capsys):
    config, paths, _ = demo_run
    cfg_path = tmp_path / "cfg.json"
    config.save(cfg_path)
    assert cli.main([
        "experiment", "run", "--config", str(cfg_path), "--resume",
    ]) == 0
    out = capsys.readouterr().out
    assert "720 answer records" in out
