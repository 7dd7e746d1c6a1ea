"""End-to-end runs, JSONL persistence, dataset statistics, and verification.

Every output file starts with a `{"_header": ...}` line embedding the full
run configuration, so files are self-describing and `verify` can rebuild the
exact grids and graphs a run used. Offline runs under a fixed seed are
byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from random import Random
from typing import Iterable, Optional

from .errors import SamplingError, SitugenError
from .graph import RelationConfig, SituatedGraph, build_situated_graph, graph_from_dict, graph_key, graph_to_dict
from .nav import MSNNRecord, gen_msnn_record, goal_region, next_action
from .qa import (
    DEFAULT_MIX,
    QAPair,
    WildVocab,
    allocate_mix,
    build_qa_prompt,
    compose_description,
    generate_templated,
    load_affordances,
    load_room_rules,
    load_seed_examples,
    navigation_answer,
    parse_llm_output,
)
from .refine import balance_existence, parse_question, refine_batch
from .scene import Scene, load_scene_pack, scene_grid, DEFAULT_CELL, DEFAULT_CLEARANCE
from .situations import (
    HoiBank,
    Situation,
    render_action_description,
    render_location_description,
    sample_situation,
)

logger = logging.getLogger(__name__)

INTERACTION_CYCLE = ("standing", "sitting", "interact_large", "interact_small")


def derive_seed(seed: int, tag: str) -> int:
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


# ---------------------------------------------------------------------------
# JSONL with self-describing header


def write_jsonl(path: str | Path, records: Iterable[dict], header: Optional[dict] = None) -> None:
    lines = []
    if header is not None:
        lines.append(json.dumps({"_header": header}, sort_keys=True, ensure_ascii=False))
    lines.extend(json.dumps(r, sort_keys=True, ensure_ascii=False) for r in records)
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_jsonl(path: str | Path) -> tuple[Optional[dict], list[dict]]:
    header = None
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SitugenError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if lineno == 1 and isinstance(obj, dict) and "_header" in obj:
                header = obj["_header"]
            else:
                records.append(obj)
    return header, records


# ---------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    seed: int = 0
    scenes: str = ""
    out_dir: str = "out"
    per_scene: int = 40
    situations_per_scene: int = 4
    msnn_per_scene: int = 3
    mode: str = "template"  # or "llm"
    mix: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_MIX))
    cell: float = DEFAULT_CELL
    clearance: float = DEFAULT_CLEARANCE
    interaction_radius: float = 1.0
    k_nearest: int = 3
    balance_tolerance: float = 0.05
    negatives_per_scene: int = 2
    relation_config: dict = field(default_factory=lambda: RelationConfig().to_json())
    llm_model: str = ""

    def relations(self) -> RelationConfig:
        return RelationConfig(**self.relation_config)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "RunConfig":
        return cls(**d)


def header_for(config: RunConfig) -> dict:
    return {"format": "situgen-jsonl", "version": 1, "run_config": config.to_json()}


# ---------------------------------------------------------------------------
# Pipeline


def _sample_situations(
    scene: Scene, config: RunConfig, rng: Random, grid, bank: HoiBank
) -> list[Situation]:
    situations = []
    for i in range(config.situations_per_scene):
        situ = None
        for offset in range(len(INTERACTION_CYCLE)):
            interaction = INTERACTION_CYCLE[(i + offset) % len(INTERACTION_CYCLE)]
            try:
                situ = sample_situation(
                    scene, interaction, rng, grid, radius=config.interaction_radius
                )
                break
            except SamplingError:
                continue
        if situ is None:
            continue
        from dataclasses import replace

        situ = replace(
            situ,
            action_text=render_action_description(scene, situ, bank, rng),
            location_text=render_location_description(scene, situ, config.k_nearest),
        )
        situations.append(situ)
    if not situations:
        raise SamplingError(f"scene {scene.scene_id}: no situation could be sampled")
    return situations


def _generate_for_scene(
    scene: Scene,
    config: RunConfig,
    rng: Random,
    bank: HoiBank,
    vocab: WildVocab,
    llm=None,
) -> tuple[list[QAPair], dict[str, SituatedGraph], list[tuple[Scene, SituatedGraph]]]:
    cfg = config.relations()
    grid = scene_grid(scene, config.cell, config.clearance)
    situations = _sample_situations(scene, config, rng, grid, bank)
    graphs: dict[str, SituatedGraph] = {}
    pairs: list[QAPair] = []
    built = []
    for situ in situations:
        g = build_situated_graph(scene, situ, cfg)
        graphs[graph_key(scene.scene_id, situ)] = g
        built.append((scene, g))

    if config.mode == "llm" and llm is not None:
        seeds = load_seed_examples()
        for idx, (_, g) in enumerate(built):
            combo = tuple((idx + j) % len(seeds) for j in range(3))
            bundle = build_qa_prompt(
                g, seeds, seed_combination=combo,
                n_pairs=config.per_scene // len(built) or 1,
            )
            raw = llm.complete(bundle.messages())
            result = parse_llm_output(raw, scene, g.situation, graph_key(scene.scene_id, g.situation))
            pairs.extend(result.pairs)
            for fragment, reason in result.skipped:
                logger.warning("%s: skipped LLM record (%s): %.60s", scene.scene_id, reason, fragment)
    else:
        alloc = allocate_mix(config.per_scene, config.mix)
        for category in sorted(alloc):
            base, extra = divmod(alloc[category], len(built))
            for idx, (_, g) in enumerate(built):
                want = base + (1 if idx < extra else 0)
                if want:
                    pairs.extend(generate_templated(g, category, rng, want))
    return pairs, graphs, built


def run_pipeline(config: RunConfig, llm=None) -> dict:
    """sample -> graph -> generate -> refine -> balance -> stats, end to end."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graphs_dir = out_dir / "graphs"
    graphs_dir.mkdir(exist_ok=True)

    try:
        scenes = load_scene_pack(config.scenes)
    except Exception as exc:
        raise SitugenError(f"[load] {exc}") from exc
    if not scenes:
        raise SitugenError(f"[load] no scene files in {config.scenes}")

    bank = HoiBank.bundled()
    vocab = WildVocab.bundled()
    all_pairs: list[QAPair] = []
    all_graphs: dict[str, SituatedGraph] = {}
    scene_graphs: list[tuple[Scene, SituatedGraph]] = []
    msnn_records: list[MSNNRecord] = []

    for scene in scenes:
        rng = Random(derive_seed(config.seed, scene.scene_id))
        try:
            pairs, graphs, built = _generate_for_scene(scene, config, rng, bank, vocab, llm)
        except SamplingError as exc:
            logger.warning("[generate] %s", exc)
            continue
        except SitugenError as exc:
            raise SitugenError(f"[generate] {exc}") from exc
        all_pairs.extend(pairs)
        all_graphs.update(graphs)
        scene_graphs.extend(built)

        grid = scene_grid(scene, config.cell, config.clearance)
        nav_rng = Random(derive_seed(config.seed, f"msnn:{scene.scene_id}"))
        for j in range(config.msnn_per_scene):
            try:
                msnn_records.append(
                    gen_msnn_record(
                        scene, nav_rng, bank, grid,
                        record_index=j, k_nearest=config.k_nearest,
                    )
                )
            except (SamplingError, SitugenError) as exc:
                logger.warning("[msnn] %s: %s", scene.scene_id, exc)

    try:
        refined, report = refine_batch(all_pairs, all_graphs)
        balanced, balance_info = balance_existence(
            refined,
            scene_graphs,
            vocab,
            Random(derive_seed(config.seed, "balance")),
            tolerance=config.balance_tolerance,
        )
    except SitugenError as exc:
        raise SitugenError(f"[refine] {exc}") from exc

    header = header_for(config)
    dataset_path = out_dir / "dataset.jsonl"
    msnn_path = out_dir / "msnn.jsonl"
    write_jsonl(dataset_path, [qa.to_json() for qa in balanced], header)
    write_jsonl(msnn_path, [r.to_json() for r in msnn_records], header)
    for gid, g in sorted(all_graphs.items()):
        (graphs_dir / f"{gid}.json").write_text(
            json.dumps(graph_to_dict(g), sort_keys=True, ensure_ascii=False, indent=1) + "\n"
        )

    report_json = report.to_json()
    report_json["balance"] = balance_info
    (out_dir / "refinement_report.json").write_text(
        json.dumps(report_json, sort_keys=True, indent=1) + "\n"
    )
    stats_report = stats(dataset_path)
    (out_dir / "stats.json").write_text(
        json.dumps(stats_report.to_json(), sort_keys=True, indent=1) + "\n"
    )
    return {
        "dataset": str(dataset_path),
        "msnn": str(msnn_path),
        "graphs_dir": str(graphs_dir),
        "pairs": len(balanced),
        "msnn_records": len(msnn_records),
        "report": report_json,
        "stats": stats_report.to_json(),
    }


# ---------------------------------------------------------------------------
# Statistics


@dataclass
class StatsReport:
    total: int = 0
    per_category: dict[str, int] = field(default_factory=dict)
    per_scene: dict[str, int] = field(default_factory=dict)
    situation_types: dict[str, int] = field(default_factory=dict)
    yes_count: int = 0
    no_count: int = 0
    avg_question_tokens: float = 0.0
    avg_answer_tokens: float = 0.0

    @property
    def yes_no_ratio(self) -> Optional[float]:
        if self.no_count == 0:
            return None
        return self.yes_count / self.no_count

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "per_category": dict(sorted(self.per_category.items())),
            "per_scene": dict(sorted(self.per_scene.items())),
            "situation_types": dict(sorted(self.situation_types.items())),
            "existence_yes": self.yes_count,
            "existence_no": self.no_count,
            "yes_no_ratio": None if self.yes_no_ratio is None else round(self.yes_no_ratio, 4),
            "avg_question_tokens": round(self.avg_question_tokens, 4),
            "avg_answer_tokens": round(self.avg_answer_tokens, 4),
        }


def stats(dataset_path: str | Path) -> StatsReport:
    _, records = read_jsonl(dataset_path)
    report = StatsReport(total=len(records))
    q_tokens = 0
    a_tokens = 0
    for rec in records:
        qa = QAPair.from_json(rec)
        report.per_category[qa.category] = report.per_category.get(qa.category, 0) + 1
        report.per_scene[qa.scene_id] = report.per_scene.get(qa.scene_id, 0) + 1
        st = qa.situation.interaction
        report.situation_types[st] = report.situation_types.get(st, 0) + 1
        q_tokens += len(qa.question.plain().split())
        a_tokens += len(qa.answer.split())
        if qa.category == "existence":
            first = qa.answer.strip().lower().split()
            if first and first[0] == "yes":
                report.yes_count += 1
            elif first and first[0] == "no":
                report.no_count += 1
    if records:
        report.avg_question_tokens = q_tokens / len(records)
        report.avg_answer_tokens = a_tokens / len(records)
    return report


# ---------------------------------------------------------------------------
# Verification


def load_graphs_dir(graphs_dir: str | Path) -> dict[str, SituatedGraph]:
    graphs = {}
    for path in sorted(Path(graphs_dir).glob("*.json")):
        g = graph_from_dict(json.loads(path.read_text()))
        graphs[graph_key(g.scene_id, g.situation)] = g
    return graphs


def _verify_qa_record(qa: QAPair, g: SituatedGraph) -> list[str]:
    problems = []
    node_ids = set(g.nodes)
    for oid in qa.question.referenced_ids():
        if oid not in node_ids:
            problems.append(f"{qa.qa_id}: question references missing object {oid}")
    if qa.category in ("counting", "existence"):
        pred = parse_question(qa.question.plain(), qa.category, g)
        if pred is None:
            if qa.provenance != "llm":
                problems.append(f"{qa.qa_id}: question outside validator grammar")
            return problems
        count = pred.count(g)
        if qa.category == "counting":
            from .refine import normalize_count_answer

            answered = normalize_count_answer(qa.answer)
            if answered != count:
                problems.append(f"{qa.qa_id}: counting answer {qa.answer!r} != {count}")
        else:
            from .refine import normalize_yesno

            answered = normalize_yesno(qa.answer)
            if answered != (count > 0):
                problems.append(f"{qa.qa_id}: existence answer {qa.answer!r} != {count > 0}")
        return problems

    pred = qa.meta.get("predicate") if qa.meta else None
    if not pred:
        return problems
    if qa.category == "navigation":
        ae = g.agent_edge_for(pred["object"])
        if ae is None or (ae.coarse, ae.clock, ae.band) != (
            pred["coarse"], pred["clock"], pred["band"]
        ):
            problems.append(f"{qa.qa_id}: navigation relation changed")
        elif qa.answer != navigation_answer(ae.coarse, ae.clock, ae.band):
            problems.append(f"{qa.qa_id}: navigation answer not reproducible")
    elif qa.category == "spatial":
        from .graph import Edge

        ed = pred["edge"]
        e = Edge(ed["kind"], ed["src"], ed["dst"], ed.get("extra"))
        if e not in g.all_edges():
            problems.append(f"{qa.qa_id}: spatial edge no longer in graph")
    elif qa.category == "refer":
        matches = [
            ae for ae in g.agent_edges
            if ae.clock == pred["clock"] and ae.band == pred["band"]
        ]
        if len(matches) != 1 or matches[0].object != pred["object"]:
            problems.append(f"{qa.qa_id}: refer description is no longer unique")
    elif qa.category == "attribute":
        obj = g.nodes.get(pred["object"])
        if obj is None or obj.attributes.short().get(pred["attr"]) != qa.answer:
            problems.append(f"{qa.qa_id}: attribute answer mismatch")
    elif qa.category == "description":
        obj = g.nodes.get(pred["object"])
        if obj is None or compose_description(obj) != qa.answer:
            problems.append(f"{qa.qa_id}: description not reproducible")
    elif qa.category == "room_type":
        labels = {o.label for o in g.objects()}
        rules = load_room_rules()
        best, best_score = None, 0
        for room, indicative in sorted(rules.items()):
            score = len(labels & set(indicative))
            if score > best_score:
                best, best_score = room, score
        if best is None or qa.answer != f"a {best}":
            problems.append(f"{qa.qa_id}: room type not reproducible")
    elif qa.category == "affordance":
        affordances = load_affordances()
        if affordances.get(pred["label"]) != qa.answer:
            problems.append(f"{qa.qa_id}: affordance answer mismatch")
    return problems


def _bfs_distance(grid, start, goals: set) -> Optional[int]:
    if start in goals:
        return 0
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        (r, c), d = queue.popleft()
        for nr, nc in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
            if (nr, nc) in seen or not grid.passable(nr, nc):
                continue
            if (nr, nc) in goals:
                return d + 1
            seen.add((nr, nc))
            queue.append(((nr, nc), d + 1))
    return None


def _verify_msnn_record(rec: MSNNRecord, scene: Scene, config: RunConfig) -> list[str]:
    problems = []
    grid = scene_grid(scene, config.cell, config.clearance)
    path = list(rec.path)
    rid = rec.record_id or "msnn-record"
    for cell in path:
        if not grid.passable(*cell):
            problems.append(f"{rid}: path cell {cell} is not passable")
            return problems
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        if abs(r0 - r1) + abs(c0 - c1) != 1:
            problems.append(f"{rid}: path steps are not 4-connected")
            return problems
    if not scene.has_object(rec.goal.object_id):
        problems.append(f"{rid}: goal object {rec.goal.object_id} missing")
        return problems
    region = goal_region(scene, grid, scene.object(rec.goal.object_id))
    if path[-1] not in region:
        problems.append(f"{rid}: path does not end in the goal region")
    optimal = _bfs_distance(grid, path[0], region)
    if optimal is None or optimal != len(path) - 1:
        problems.append(f"{rid}: path length {len(path) - 1} != shortest {optimal}")
    if len(path) >= 2 and next_action(path, rec.start, grid) != rec.action:
        problems.append(f"{rid}: action not re-derivable from path and start")
    return problems


def verify_file(
    path: str | Path,
    graphs_dir: str | Path | None = None,
    scenes_dir: str | Path | None = None,
) -> list[str]:
    """Re-check every record in a pipeline output against its scene graph or
    scene grid; returns human-readable problems (empty = pass)."""
    header, records = read_jsonl(path)
    config = RunConfig.from_json(header["run_config"]) if header and "run_config" in header else RunConfig()
    problems: list[str] = []
    if records and "action" in records[0] and "path" in records[0]:
        if scenes_dir is None:
            raise SitugenError("verifying a navigation file requires --scenes")
        scenes = {s.scene_id: s for s in load_scene_pack(scenes_dir)}
        for rec_d in records:
            rec = MSNNRecord.from_json(rec_d)
            scene = scenes.get(rec.scene_id)
            if scene is None:
                problems.append(f"unknown scene {rec.scene_id}")
                continue
            problems.extend(_verify_msnn_record(rec, scene, config))
        return problems

    if graphs_dir is None:
        raise SitugenError("verifying a dataset file requires --graphs")
    graphs = load_graphs_dir(graphs_dir)
    for rec_d in records:
        qa = QAPair.from_json(rec_d)
        g = graphs.get(graph_key(qa.scene_id, qa.situation))
        if g is None:
            problems.append(f"{qa.qa_id}: no graph for its situation")
            continue
        problems.extend(_verify_qa_record(qa, g))
    return problems
