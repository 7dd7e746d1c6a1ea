"""End-to-end pipeline runs, stats, verification, and the CLI surface."""

import json

import pytest
from click.testing import CliRunner

from situgen.cli import main as cli_main
from situgen.errors import SitugenError
from situgen.pipeline import (
    RunConfig,
    read_jsonl,
    run_pipeline,
    stats,
    verify_file,
    write_jsonl,
)
from situgen.qa import CATEGORIES


@pytest.fixture(scope="module")
def pipeline_out(tmp_path_factory, request):
    scenes = request.getfixturevalue("fixture_pack_dir")
    out = tmp_path_factory.mktemp("pipeline_out")
    config = RunConfig(seed=11, scenes=str(scenes), out_dir=str(out))
    summary = run_pipeline(config)
    return scenes, out, config, summary


# make fixture_pack_dir resolvable from module-scoped fixture
@pytest.fixture(scope="session")
def fixture_pack_dir_session(fixture_pack_dir):
    return fixture_pack_dir


def test_pipeline_covers_all_categories(pipeline_out):
    _, _, _, summary = pipeline_out
    assert set(summary["stats"]["per_category"]) == set(CATEGORIES)
    assert summary["pairs"] > 0 and summary["msnn_records"] > 0


def test_pipeline_deterministic_bytes(pipeline_out, tmp_path):
    scenes, out, config, _ = pipeline_out
    first = (out / "dataset.jsonl").read_bytes()
    first_msnn = (out / "msnn.jsonl").read_bytes()
    run_pipeline(RunConfig(**{**config.to_json()}))
    assert (out / "dataset.jsonl").read_bytes() == first
    assert (out / "msnn.jsonl").read_bytes() == first_msnn


def test_pipeline_header_is_self_describing(pipeline_out):
    _, out, config, _ = pipeline_out
    header, records = read_jsonl(out / "dataset.jsonl")
    assert header["run_config"] == config.to_json()
    assert len(records) > 0


def test_generated_files_verify_clean(pipeline_out):
    scenes, out, _, _ = pipeline_out
    assert verify_file(out / "dataset.jsonl", graphs_dir=out / "graphs") == []
    assert verify_file(out / "msnn.jsonl", scenes_dir=scenes) == []


def test_verify_catches_corruption(pipeline_out, tmp_path):
    _, out, _, _ = pipeline_out
    header, records = read_jsonl(out / "dataset.jsonl")
    target = next(r for r in records if r["category"] == "counting")
    target["answer"] = str(int(target["answer"]) + 1)
    bad = tmp_path / "bad.jsonl"
    write_jsonl(bad, records, header)
    problems = verify_file(bad, graphs_dir=out / "graphs")
    assert len(problems) == 1
    assert target["qa_id"] in problems[0]


def test_balance_held_on_pipeline_output(pipeline_out):
    _, out, _, summary = pipeline_out
    yes, no = summary["stats"]["existence_yes"], summary["stats"]["existence_no"]
    assert yes + no > 0
    assert abs(yes - no) / (yes + no) <= 0.05


def test_stats_zeroed_on_empty(tmp_path):
    empty = tmp_path / "empty.jsonl"
    write_jsonl(empty, [], {"run_config": RunConfig().to_json()})
    report = stats(empty)
    assert report.total == 0
    assert report.per_category == {}
    assert report.yes_no_ratio is None


def test_stats_exact_counts(pipeline_out):
    _, out, _, _ = pipeline_out
    _, records = read_jsonl(out / "dataset.jsonl")
    report = stats(out / "dataset.jsonl")
    # independent tally
    per_cat = {}
    yes = no = 0
    for r in records:
        per_cat[r["category"]] = per_cat.get(r["category"], 0) + 1
        if r["category"] == "existence":
            word = r["answer"].split()[0].lower().rstrip(",")
            yes += word == "yes"
            no += word == "no"
    assert report.per_category == per_cat
    assert report.total == len(records)
    assert (report.yes_count, report.no_count) == (yes, no)


def test_read_jsonl_reports_line_numbers(tmp_path):
    bad = tmp_path / "b.jsonl"
    bad.write_text('{"ok": 1}\nnot json\n')
    with pytest.raises(SitugenError, match=r"b\.jsonl:2"):
        read_jsonl(bad)


def test_missing_scene_dir_is_stage_tagged(tmp_path):
    with pytest.raises(SitugenError, match=r"\[load\]"):
        run_pipeline(RunConfig(seed=0, scenes=str(tmp_path / "nope"), out_dir=str(tmp_path)))


# ---------------------------------------------------------------------------
# CLI


@pytest.fixture()
def runner():
    return CliRunner()


def test_cli_sample_situations(runner, fixture_pack_dir, tmp_path):
    out = tmp_path / "situ.jsonl"
    result = runner.invoke(cli_main, [
        "sample-situations", "--scene", str(fixture_pack_dir / "pack_kitchen.json"),
        "--n", "6", "--seed", "3", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    _, rows = read_jsonl(out)
    assert len(rows) == 6
    assert all("rot_deg" in r for r in rows)


def test_cli_build_graph(runner, fixture_pack_dir, tmp_path):
    situ_file = tmp_path / "situ.jsonl"
    runner.invoke(cli_main, [
        "sample-situations", "--scene", str(fixture_pack_dir / "pack_office.json"),
        "--n", "2", "--seed", "1", "--out", str(situ_file),
    ])
    graphs = tmp_path / "graphs"
    result = runner.invoke(cli_main, [
        "build-graph", "--scene", str(fixture_pack_dir / "pack_office.json"),
        "--situations", str(situ_file), "--out", str(graphs),
    ])
    assert result.exit_code == 0, result.output
    files = list(graphs.glob("*.json"))
    assert len(files) == 2
    payload = json.loads(files[0].read_text())
    assert {"graph_id", "situation", "nodes", "edges", "agent_edges"} <= set(payload)


def test_cli_generate_refine_verify_stats(runner, fixture_pack_dir, tmp_path):
    out = tmp_path / "data" / "dataset.jsonl"
    out.parent.mkdir()
    result = runner.invoke(cli_main, [
        "generate", "--scenes", str(fixture_pack_dir), "--per-scene", "20",
        "--seed", "5", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    assert out.exists()

    refined = tmp_path / "refined.jsonl"
    report = tmp_path / "report.json"
    result = runner.invoke(cli_main, [
        "refine", "--in", str(out), "--graphs", str(out.parent / "graphs"),
        "--out", str(refined), "--report", str(report),
        "--balance", "--scenes", str(fixture_pack_dir),
    ])
    assert result.exit_code == 0, result.output
    report_data = json.loads(report.read_text())
    assert report_data["checked"] > 0
    # every record found its graph through the file round trip
    assert not any("no graph" in reason for _, _, reason in report_data["reasons"])

    result = runner.invoke(cli_main, [
        "verify", str(refined), "--graphs", str(out.parent / "graphs"),
    ])
    assert result.exit_code == 0, result.output

    result = runner.invoke(cli_main, ["stats", str(refined)])
    assert result.exit_code == 0
    assert "per_category" in result.output


def test_cli_gen_msnn_and_verify(runner, fixture_pack_dir, tmp_path):
    out = tmp_path / "msnn.jsonl"
    result = runner.invoke(cli_main, [
        "gen-msnn", "--scenes", str(fixture_pack_dir), "--per-scene", "2",
        "--seed", "2", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    result = runner.invoke(cli_main, ["verify", str(out), "--scenes", str(fixture_pack_dir)])
    assert result.exit_code == 0, result.output


def test_cli_evaluate_em(runner, fixture_pack_dir, tmp_path):
    out = tmp_path / "d" / "dataset.jsonl"
    out.parent.mkdir()
    runner.invoke(cli_main, [
        "generate", "--scenes", str(fixture_pack_dir), "--per-scene", "10",
        "--seed", "5", "--out", str(out),
    ])
    _, records = read_jsonl(out)
    preds = tmp_path / "preds.jsonl"
    write_jsonl(preds, [{"qa_id": r["qa_id"], "response": r["answer"]} for r in records])
    result = runner.invoke(cli_main, [
        "evaluate", "--dataset", str(out), "--preds", str(preds), "--judge", "em",
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["em"] == 100.0
    assert payload["em_refined"] == 100.0


def test_cli_nonzero_exit_on_error(runner, tmp_path):
    result = runner.invoke(cli_main, [
        "generate", "--scenes", str(tmp_path), "--out", str(tmp_path / "x.jsonl"),
    ])
    assert result.exit_code != 0

    bad = tmp_path / "corrupt.jsonl"
    bad.write_text("not json\n")
    result = runner.invoke(cli_main, ["stats", str(bad)])
    assert result.exit_code != 0


def test_cli_evaluate_judge_offline_warm_cache(runner, fixture_pack_dir, tmp_path, monkeypatch):
    from situgen.llm import CachedChatClient, ReplayCache
    from situgen.evaluation import build_judge_prompt

    out = tmp_path / "d" / "dataset.jsonl"
    out.parent.mkdir()
    runner.invoke(cli_main, [
        "generate", "--scenes", str(fixture_pack_dir), "--per-scene", "6",
        "--seed", "5", "--out", str(out),
    ])
    _, records = read_jsonl(out)
    records = records[:4]
    preds = tmp_path / "preds.jsonl"
    write_jsonl(preds, [{"qa_id": r["qa_id"], "response": r["answer"]} for r in records])
    dataset_small = tmp_path / "small.jsonl"
    write_jsonl(dataset_small, records)

    # warm the cache with deterministic judge replies, then evaluate offline
    cache_dir = tmp_path / "cache"
    cache = ReplayCache(cache_dir)

    class AlwaysFive:
        def complete(self, messages, model=None):
            return "Score: 5"

    warm = CachedChatClient(cache, AlwaysFive(), model="judge-x")
    from situgen.qa import QAPair as _QAPair

    for r in records:
        qa = _QAPair.from_json(r)
        warm.complete([{"role": "user", "content": build_judge_prompt(qa, qa.answer)}])

    monkeypatch.setenv("SITUGEN_CACHE_DIR", str(cache_dir))
    monkeypatch.setenv("SITUGEN_LLM_MODEL", "judge-x")
    monkeypatch.delenv("SITUGEN_LLM_BASE_URL", raising=False)
    result = runner.invoke(cli_main, [
        "evaluate", "--dataset", str(dataset_small), "--preds", str(preds),
        "--judge", "llm", "--offline",
    ])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["correctness"] == 100.0


def test_cli_serve_resolves_data_dir_env(runner, tmp_path, monkeypatch):
    monkeypatch.delenv("SITUGEN_DATA_DIR", raising=False)
    result = runner.invoke(cli_main, ["serve"])
    assert result.exit_code != 0
    assert "SITUGEN_DATA_DIR" in result.output

    monkeypatch.setenv("SITUGEN_DATA_DIR", str(tmp_path))
    result = runner.invoke(cli_main, ["serve"])
    assert result.exit_code != 0
    # paths were resolved into the data dir before the existence check
    assert str(tmp_path / "dataset.jsonl") in result.output
