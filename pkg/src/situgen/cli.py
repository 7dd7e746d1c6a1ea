"""Command-line entry points. One subcommand per pipeline stage; stdout
carries data, stderr diagnostics; any error exits nonzero."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from random import Random

import click

from .errors import SitugenError
from .evaluation import evaluate_predictions, msnn_accuracy
from .graph import RelationConfig, build_situated_graph, graph_to_dict
from .llm import client_from_env
from .nav import gen_msnn_record
from .pipeline import (
    RunConfig,
    derive_seed,
    header_for,
    read_jsonl,
    run_pipeline,
    stats as compute_stats,
    verify_file,
    write_jsonl,
)
from .qa import QAPair, WildVocab
from .refine import ReviewVerdict, apply_verdicts, balance_existence, refine_batch
from .scene import load_scene, load_scene_pack, scene_grid
from .situations import HoiBank, Situation, sample_situation, render_action_description, render_location_description
from .pipeline import load_graphs_dir

INTERACTIONS_DEFAULT = "standing,sitting,interact_large,interact_small"


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Situated 3D scene QA and next-step-navigation data engine."""


@main.command("sample-situations")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--n", default=10, show_default=True)
@click.option("--types", default=INTERACTIONS_DEFAULT, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--cell", default=0.10, show_default=True)
@click.option("--clearance", default=0.20, show_default=True)
@click.option("--radius", default=1.0, show_default=True)
@click.option("--k-nearest", default=3, show_default=True)
def sample_situations_cmd(scene_path, n, types, seed, out, cell, clearance, radius, k_nearest):
    """Sample agent situations in one scene and write them as JSONL."""
    try:
        scene = load_scene(scene_path)
        grid = scene_grid(scene, cell, clearance)
        bank = HoiBank.bundled()
        rng = Random(derive_seed(seed, scene.scene_id))
        wanted = [t.strip() for t in types.split(",") if t.strip()]
        from dataclasses import replace

        records = []
        for i in range(n):
            interaction = wanted[i % len(wanted)]
            situ = sample_situation(scene, interaction, rng, grid, radius=radius)
            situ = replace(
                situ,
                action_text=render_action_description(scene, situ, bank, rng),
                location_text=render_location_description(scene, situ, k_nearest),
            )
            records.append({"scene_id": scene.scene_id, **situ.to_json()})
        write_jsonl(out, records, {"format": "situgen-situations", "seed": seed})
        click.echo(f"wrote {len(records)} situations to {out}")
    except SitugenError as exc:
        _fail(str(exc))


@main.command("build-graph")
@click.option("--scene", "scene_path", required=True, type=click.Path(exists=True))
@click.option("--situations", "situations_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--relation-config", "relation_config_path", type=click.Path(exists=True))
def build_graph_cmd(scene_path, situations_path, out_dir, relation_config_path):
    """Build situated scene graphs for each situation in a JSONL file."""
    try:
        scene = load_scene(scene_path)
        cfg = RelationConfig.load(relation_config_path) if relation_config_path else RelationConfig()
        _, rows = read_jsonl(situations_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        count = 0
        for row in rows:
            situ = Situation.from_json(row)
            g = build_situated_graph(scene, situ, cfg)
            d = graph_to_dict(g)
            (out / f"{d['graph_id']}.json").write_text(
                json.dumps(d, sort_keys=True, ensure_ascii=False, indent=1) + "\n"
            )
            count += 1
        click.echo(f"wrote {count} graphs to {out_dir}")
    except SitugenError as exc:
        _fail(str(exc))


@main.command("generate")
@click.option("--scenes", required=True, type=click.Path(exists=True))
@click.option("--per-scene", default=40, show_default=True)
@click.option("--mode", type=click.Choice(["template", "llm"]), default="template", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--situations-per-scene", default=4, show_default=True)
@click.option("--msnn-per-scene", default=0, show_default=True)
@click.option("--relation-config", "relation_config_path", type=click.Path(exists=True))
@click.option("--offline", is_flag=True, help="LLM mode must hit the replay cache.")
def generate_cmd(scenes, per_scene, mode, seed, out, situations_per_scene, msnn_per_scene,
                 relation_config_path, offline):
    """Run the generation pipeline and write the QA dataset JSONL."""
    try:
        out = Path(out)
        config = RunConfig(
            seed=seed,
            scenes=str(scenes),
            out_dir=str(out.parent if out.suffix else out),
            per_scene=per_scene,
            situations_per_scene=situations_per_scene,
            msnn_per_scene=msnn_per_scene,
            mode=mode,
        )
        if relation_config_path:
            config.relation_config = RelationConfig.load(relation_config_path).to_json()
        llm = client_from_env(offline=offline) if mode == "llm" else None
        summary = run_pipeline(config, llm=llm)
        if out.suffix and Path(summary["dataset"]) != out:
            Path(summary["dataset"]).replace(out)
            summary["dataset"] = str(out)
        click.echo(json.dumps(summary, indent=1, sort_keys=True))
    except SitugenError as exc:
        _fail(str(exc))


@main.command("refine")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--graphs", "graphs_dir", required=True, type=click.Path(exists=True))
@click.option("--verdicts", "verdicts_path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--report", "report_path", type=click.Path())
@click.option("--balance/--no-balance", default=False, show_default=True)
@click.option("--tolerance", default=0.05, show_default=True)
@click.option("--scenes", "scenes_dir", type=click.Path(exists=True),
              help="Scene pack, required for --balance augmentation.")
@click.option("--seed", default=0, show_default=True)
def refine_cmd(in_path, graphs_dir, verdicts_path, out, report_path, balance, tolerance,
               scenes_dir, seed):
    """Validate, correct, filter (and optionally balance) a QA dataset."""
    try:
        header, records = read_jsonl(in_path)
        pairs = [QAPair.from_json(r) for r in records]
        graphs = load_graphs_dir(graphs_dir)
        pairs, report = refine_batch(pairs, graphs)

        if verdicts_path:
            _, rows = read_jsonl(verdicts_path)
            verdicts = [ReviewVerdict.from_json(r) for r in rows]
            pairs, verdict_report = apply_verdicts(pairs, verdicts)
            report.corrected += verdict_report.corrected
            report.dropped += verdict_report.dropped
            report.reasons.extend(verdict_report.reasons)

        balance_info = None
        if balance:
            if not scenes_dir:
                _fail("--balance requires --scenes for negative augmentation")
            scenes = {s.scene_id: s for s in load_scene_pack(scenes_dir)}
            scene_graphs = [
                (scenes[g.scene_id], g) for g in graphs.values() if g.scene_id in scenes
            ]
            pairs, balance_info = balance_existence(
                pairs, scene_graphs, WildVocab.bundled(),
                Random(derive_seed(seed, "balance")), tolerance,
            )

        write_jsonl(out, [qa.to_json() for qa in pairs], header)
        report_json = report.to_json()
        if balance_info is not None:
            report_json["balance"] = balance_info
        if report_path:
            Path(report_path).write_text(json.dumps(report_json, indent=1, sort_keys=True) + "\n")
        click.echo(report.summary())
    except SitugenError as exc:
        _fail(str(exc))


@main.command("gen-msnn")
@click.option("--scenes", required=True, type=click.Path(exists=True))
@click.option("--per-scene", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--cell", default=0.10, show_default=True)
@click.option("--clearance", default=0.20, show_default=True)
def gen_msnn_cmd(scenes, per_scene, seed, out, cell, clearance):
    """Generate next-step navigation records."""
    try:
        bank = HoiBank.bundled()
        records = []
        config = RunConfig(seed=seed, scenes=str(scenes), per_scene=0,
                           msnn_per_scene=per_scene, cell=cell, clearance=clearance)
        for scene in load_scene_pack(scenes):
            grid = scene_grid(scene, cell, clearance)
            rng = Random(derive_seed(seed, f"msnn:{scene.scene_id}"))
            for j in range(per_scene):
                try:
                    rec = gen_msnn_record(scene, rng, bank, grid, record_index=j)
                    records.append(rec.to_json())
                except SitugenError as exc:
                    click.echo(f"warning: {scene.scene_id}: {exc}", err=True)
        write_jsonl(out, records, header_for(config))
        click.echo(f"wrote {len(records)} records to {out}")
    except SitugenError as exc:
        _fail(str(exc))


@main.command("evaluate")
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--preds", required=True, type=click.Path(exists=True))
@click.option("--judge", type=click.Choice(["llm", "em", "both"]), default="em", show_default=True)
@click.option("--offline", is_flag=True)
@click.option("--report", "report_path", type=click.Path())
@click.option("--msnn-dataset", type=click.Path(exists=True))
@click.option("--msnn-preds", type=click.Path(exists=True))
def evaluate_cmd(dataset, preds, judge, offline, report_path, msnn_dataset, msnn_preds):
    """Score model responses with EM metrics and/or the LLM judge."""
    try:
        _, records = read_jsonl(dataset)
        pairs = [QAPair.from_json(r) for r in records]
        _, pred_rows = read_jsonl(preds)
        responses = {row["qa_id"]: row["response"] for row in pred_rows}
        client = client_from_env(offline=offline) if judge in ("llm", "both") else None
        report = evaluate_predictions(
            pairs, responses, judge=client, judge_model=client.model if client else ""
        )
        if msnn_dataset and msnn_preds:
            _, gt_rows = read_jsonl(msnn_dataset)
            _, p_rows = read_jsonl(msnn_preds)
            report.msnn_accuracy = msnn_accuracy(
                [r["action"] for r in p_rows], [r["action"] for r in gt_rows]
            )
        payload = report.to_json()
        click.echo(json.dumps(payload, indent=1, sort_keys=True))
        if report_path:
            Path(report_path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    except SitugenError as exc:
        _fail(str(exc))


@main.command("stats")
@click.argument("dataset", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path())
def stats_cmd(dataset, out_path):
    """Tally a dataset: categories, scenes, situation types, yes/no ratio."""
    try:
        report = compute_stats(dataset)
        payload = json.dumps(report.to_json(), indent=1, sort_keys=True)
        click.echo(payload)
        if out_path:
            Path(out_path).write_text(payload + "\n")
    except SitugenError as exc:
        _fail(str(exc))


@main.command("verify")
@click.argument("file", type=click.Path(exists=True))
@click.option("--graphs", "graphs_dir", type=click.Path(exists=True))
@click.option("--scenes", "scenes_dir", type=click.Path(exists=True))
def verify_cmd(file, graphs_dir, scenes_dir):
    """Re-check every record in a pipeline output against its scene graph."""
    try:
        problems = verify_file(file, graphs_dir=graphs_dir, scenes_dir=scenes_dir)
    except SitugenError as exc:
        _fail(str(exc))
        return
    if problems:
        for p in problems:
            click.echo(p, err=True)
        _fail(f"{len(problems)} problems found in {file}")
    click.echo(f"ok: {file} verified")


@main.command("serve")
@click.option("--dataset", type=click.Path())
@click.option("--scenes", type=click.Path())
@click.option("--verdicts", type=click.Path())
@click.option("--graphs", "graphs_dir", type=click.Path(exists=True))
@click.option("--addr", default="127.0.0.1:8787", show_default=True)
@click.option("--ui-dir", type=click.Path(exists=True))
def serve_cmd(dataset, scenes, verdicts, graphs_dir, addr, ui_dir):
    """Serve the review API (and the review UI when --ui-dir is given).

    Paths default into $SITUGEN_DATA_DIR (dataset.jsonl, scenes/,
    verdicts.jsonl, graphs/) when set.
    """
    try:
        import os

        data_dir = os.environ.get("SITUGEN_DATA_DIR")
        if data_dir:
            root = Path(data_dir)
            dataset = dataset or str(root / "dataset.jsonl")
            scenes = scenes or str(root / "scenes")
            verdicts = verdicts or str(root / "verdicts.jsonl")
            if graphs_dir is None and (root / "graphs").is_dir():
                graphs_dir = str(root / "graphs")
        if not dataset or not scenes:
            _fail("--dataset and --scenes are required (or set SITUGEN_DATA_DIR)")
        verdicts = verdicts or "verdicts.jsonl"
        for required in (dataset, scenes):
            if not Path(required).exists():
                _fail(f"path does not exist: {required}")

        import uvicorn

        from .server import create_app

        app = create_app(dataset, scenes, verdicts, ui_dir=ui_dir, graphs_dir=graphs_dir)
        host, _, port = addr.partition(":")
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8787), log_level="warning")
    except SitugenError as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
