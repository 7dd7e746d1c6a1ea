"""Review service backing the browser UI: scenes, top-down geometry, item
paging, and durable verdict collection.

Verdicts append to a JSONL log (fsync on write); restarting the service
replays the log, so service state is always reconstructible from disk.
Submissions are idempotent per (qa_id, reviewer): an identical resubmission
is acknowledged without a second append.
"""

from __future__ import annotations

import json
import math
import os
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field, model_validator

from .graph import graph_key
from .pipeline import read_jsonl
from .qa import QAPair
from .refine import ReviewVerdict
from .scene import Scene, load_scene_pack


class ScoresBody(BaseModel):
    situation: int = Field(ge=1, le=5)
    question: int = Field(ge=1, le=5)
    answer: int = Field(ge=1, le=5)


class VerdictBody(BaseModel):
    scores: ScoresBody
    verdict: Literal["accept", "reject", "fix"]
    reviewer: str = Field(min_length=1)
    fixed_answer: Optional[str] = None
    timestamp: Optional[str] = None

    @model_validator(mode="after")
    def _fix_needs_answer(self):
        if self.verdict == "fix" and not self.fixed_answer:
            raise ValueError("fix verdict requires fixed_answer")
        return self


class ReviewState:
    def __init__(
        self,
        dataset_path: str | Path,
        scenes_dir: str | Path,
        verdicts_path: str | Path,
        graphs_dir: str | Path | None = None,
    ):
        _, records = read_jsonl(dataset_path)
        self.items: dict[str, QAPair] = {}
        self.order: list[str] = []
        for rec in records:
            qa = QAPair.from_json(rec)
            self.items[qa.qa_id] = qa
            self.order.append(qa.qa_id)
        self.scenes: dict[str, Scene] = {s.scene_id: s for s in load_scene_pack(scenes_dir)}
        self.graphs: dict[str, dict] = {}
        if graphs_dir is not None and Path(graphs_dir).is_dir():
            for path in sorted(Path(graphs_dir).glob("*.json")):
                payload = json.loads(path.read_text())
                self.graphs[payload["graph_id"]] = payload
        self.verdicts_path = Path(verdicts_path)
        self.verdicts: list[ReviewVerdict] = []
        self.latest: dict[str, ReviewVerdict] = {}
        self.latest_by_reviewer: dict[tuple[str, str], ReviewVerdict] = {}
        self._write_lock = threading.Lock()
        if self.verdicts_path.exists():
            _, rows = read_jsonl(self.verdicts_path)
            for row in rows:
                self._register(ReviewVerdict.from_json(row))

    def _register(self, v: ReviewVerdict) -> None:
        self.verdicts.append(v)
        self.latest[v.qa_id] = v
        self.latest_by_reviewer[(v.qa_id, v.reviewer)] = v

    def submit(self, v: ReviewVerdict) -> bool:
        """Append a verdict; returns False when it duplicates the reviewer's
        latest verdict for this item (idempotent resubmission)."""
        with self._write_lock:
            previous = self.latest_by_reviewer.get((v.qa_id, v.reviewer))
            if previous is not None and _same_verdict(previous, v):
                return False
            self._register(v)
            line = json.dumps(v.to_json(), sort_keys=True, ensure_ascii=False)
            with open(self.verdicts_path, "a") as f:
                f.write(line + "\n")
                f.flush()
                os.fsync(f.fileno())
            return True

    def item_payload(self, qa_id: str) -> dict:
        qa = self.items[qa_id]
        v = self.latest.get(qa_id)
        return {
            **qa.to_json(),
            "graph_id": graph_key(qa.scene_id, qa.situation),
            "verdict": v.to_json() if v else None,
            "needs_review": "corrected_from" in qa.meta or v is None,
        }


def _same_verdict(a: ReviewVerdict, b: ReviewVerdict) -> bool:
    return (
        a.scores == b.scores
        and a.verdict == b.verdict
        and a.fixed_answer == b.fixed_answer
    )


def _object_rect(obj) -> dict:
    return {
        "id": obj.id,
        "label": obj.label,
        "cx": float(obj.centroid[0]),
        "cy": float(obj.centroid[1]),
        "w": float(obj.size[0]),
        "h": float(obj.size[1]),
        "yaw_deg": round(math.degrees(obj.yaw), 3),
        "attributes": obj.attributes.short(),
        "image_ref": obj.image_ref,
        "flags": sorted(obj.flags),
    }


def _floor_payload(scene: Scene) -> dict:
    floor = scene.floor
    if floor.polygon is not None:
        polygon = [[float(x), float(y)] for x, y in floor.polygon]
    else:
        g = floor.grid
        x0, y0 = float(g.origin[0]), float(g.origin[1])
        x1 = x0 + g.width * g.cell
        y1 = y0 + g.height * g.cell
        polygon = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    return {"polygon": polygon, "z": float(floor.z)}


def create_app(
    dataset_path: str | Path,
    scenes_dir: str | Path,
    verdicts_path: str | Path,
    ui_dir: str | Path | None = None,
    graphs_dir: str | Path | None = None,
) -> FastAPI:
    state = ReviewState(dataset_path, scenes_dir, verdicts_path, graphs_dir)
    app = FastAPI(title="situgen review service")
    app.state.review = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/scenes")
    def list_scenes():
        counts: dict[str, int] = {}
        for qa in state.items.values():
            counts[qa.scene_id] = counts.get(qa.scene_id, 0) + 1
        return [
            {
                "scene_id": sid,
                "n_objects": len(scene.objects),
                "n_items": counts.get(sid, 0),
            }
            for sid, scene in sorted(state.scenes.items())
        ]

    @app.get("/api/scenes/{scene_id}/topdown")
    def topdown(scene_id: str, item: Optional[str] = None):
        scene = state.scenes.get(scene_id)
        if scene is None:
            raise HTTPException(404, f"unknown scene {scene_id}")
        agent = None
        highlight_ids: list[int] = []
        if item is not None:
            qa = state.items.get(item)
            if qa is None:
                raise HTTPException(404, f"unknown item {item}")
            s = qa.situation
            agent = {
                "x": float(s.location[0]),
                "y": float(s.location[1]),
                "rot_deg": round(math.degrees(s.rotation), 3),
                "interaction": s.interaction,
            }
            highlight_ids = sorted(
                set(
                    qa.question.referenced_ids()
                    + qa.situation.action_text.referenced_ids()
                    + qa.situation.location_text.referenced_ids()
                )
            )
        min_x, min_y, max_x, max_y = scene.floor.bounds()
        return {
            "scene_id": scene_id,
            "floor": _floor_payload(scene),
            "objects": [_object_rect(o) for o in scene.objects],
            "agent": agent,
            "highlight_ids": highlight_ids,
            "bounds": [min_x, min_y, max_x, max_y],
        }

    @app.get("/api/items")
    def list_items(
        scene: Optional[str] = None,
        cursor: int = Query(0, ge=0),
        limit: int = Query(20, ge=1, le=200),
    ):
        ids = [
            qa_id
            for qa_id in state.order
            if scene is None or state.items[qa_id].scene_id == scene
        ]
        page = ids[cursor : cursor + limit]
        next_cursor = cursor + limit if cursor + limit < len(ids) else None
        return {
            "items": [state.item_payload(qa_id) for qa_id in page],
            "cursor": next_cursor,
            "total": len(ids),
        }

    @app.get("/api/items/{qa_id}")
    def get_item(qa_id: str):
        if qa_id not in state.items:
            raise HTTPException(404, f"unknown item {qa_id}")
        return state.item_payload(qa_id)

    @app.post("/api/items/{qa_id}/verdict")
    def post_verdict(qa_id: str, body: VerdictBody):
        if qa_id not in state.items:
            raise HTTPException(404, f"unknown item {qa_id}")
        verdict = ReviewVerdict(
            qa_id=qa_id,
            scores=body.scores.model_dump(),
            verdict=body.verdict,
            reviewer=body.reviewer,
            timestamp=body.timestamp or datetime.now(timezone.utc).isoformat(),
            fixed_answer=body.fixed_answer,
        )
        appended = state.submit(verdict)
        return {"ok": True, "appended": appended, "verdict": verdict.to_json()}

    @app.get("/api/graphs/{graph_id}")
    def get_graph(graph_id: str):
        payload = state.graphs.get(graph_id)
        if payload is None:
            raise HTTPException(404, f"unknown graph {graph_id}")
        return payload

    @app.get("/api/progress")
    def progress():
        by_verdict: dict[str, int] = {}
        for v in state.latest.values():
            by_verdict[v.verdict] = by_verdict.get(v.verdict, 0) + 1
        return {
            "total": len(state.items),
            "reviewed": len(state.latest),
            "by_verdict": by_verdict,
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
