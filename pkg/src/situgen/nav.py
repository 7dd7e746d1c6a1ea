"""Next-step navigation records: start situation, goal, shortest grid path,
and the discrete action the agent should take first.

Planning runs on the scene's occupancy grid with 4-connected unit-cost A*
(an 8-connected variant with octile heuristic sits behind a flag). The
ground-truth action comes from the signed angle between the agent's heading
and the first path step, quantized into four 90-degree bins whose exact
45-degree boundaries belong to the turns.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass, replace
from random import Random
from typing import Optional

import numpy as np

from .errors import PlanningError, SamplingError
from .geometry import signed_angle
from .qa import make_qa_id
from .scene import ObjectInstance, OccupancyGrid, Scene, scene_grid
from .situations import (
    HoiBank,
    InterleavedText,
    Segment,
    Situation,
    classify_interactable,
    interleave,
    interleave_from_text,
    render_action_description,
    render_location_description,
    sample_situation,
)

ACTIONS = ("move_forward", "turn_left", "move_backward", "turn_right")

GOAL_RADIUS = 1.0  # m, goal region around the target object's footprint


@dataclass(frozen=True)
class Goal:
    object_id: int
    text: InterleavedText

    def to_json(self) -> dict:
        return {"object_id": self.object_id, "text": self.text.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "Goal":
        return cls(d["object_id"], InterleavedText.from_json(d["text"]))


@dataclass(frozen=True)
class MSNNRecord:
    scene_id: str
    start: Situation
    goal: Goal
    path: tuple[tuple[int, int], ...]
    action: str
    record_id: str = ""

    def validate(self, grid: OccupancyGrid) -> None:
        if not self.path:
            raise PlanningError("path must be non-empty")
        if self.action not in ACTIONS:
            raise PlanningError(f"unknown action {self.action!r}")
        if len(self.path) >= 2 and next_action(list(self.path), self.start, grid) != self.action:
            raise PlanningError("stored action disagrees with the stored path")

    def to_json(self) -> dict:
        d = {
            "scene_id": self.scene_id,
            "start": self.start.to_json(),
            "goal": self.goal.to_json(),
            "path": [list(cell) for cell in self.path],
            "action": self.action,
        }
        if self.record_id:
            d["record_id"] = self.record_id
        return d

    @classmethod
    def from_json(cls, d: dict) -> "MSNNRecord":
        return cls(
            scene_id=d["scene_id"],
            start=Situation.from_json(d["start"]),
            goal=Goal.from_json(d["goal"]),
            path=tuple((r, c) for r, c in d["path"]),
            action=d["action"],
            record_id=d.get("record_id", ""),
        )


# ---------------------------------------------------------------------------
# Planning


def _neighbors4(r: int, c: int):
    yield r + 1, c
    yield r - 1, c
    yield r, c + 1
    yield r, c - 1


def _neighbors8(r: int, c: int):
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                yield r + dr, c + dc


def plan_path(
    grid: OccupancyGrid,
    start: tuple[int, int],
    goal_region: set[tuple[int, int]],
    diagonal: bool = False,
) -> list[tuple[int, int]]:
    """Minimum-length passable path from start to any goal-region cell.

    Unit step cost, Manhattan heuristic (octile when diagonal moves are on),
    deterministic tie-breaking by (f, h, row-major index).
    """
    if not goal_region:
        raise PlanningError("goal region is empty")
    if not grid.passable(*start):
        raise PlanningError(f"start cell {start} is not passable")
    goals = {g for g in goal_region if grid.passable(*g)}
    if not goals:
        raise PlanningError("goal unreachable")

    goal_list = sorted(goals)

    def h(cell: tuple[int, int]) -> float:
        r, c = cell
        if diagonal:
            best = math.inf
            for gr, gc in goal_list:
                dr, dc = abs(r - gr), abs(c - gc)
                best = min(best, max(dr, dc) + (math.sqrt(2) - 1) * min(dr, dc))
            return best
        return min(abs(r - gr) + abs(c - gc) for gr, gc in goal_list)

    neighbors = _neighbors8 if diagonal else _neighbors4
    step = (lambda a, b: math.sqrt(2) if a[0] != b[0] and a[1] != b[1] else 1.0) if diagonal else (
        lambda a, b: 1.0
    )

    def idx(cell: tuple[int, int]) -> int:
        return cell[0] * grid.width + cell[1]

    start_h = h(start)
    open_heap = [(start_h, start_h, idx(start), start)]
    came: dict[tuple[int, int], Optional[tuple[int, int]]] = {start: None}
    g_score = {start: 0.0}
    closed: set[tuple[int, int]] = set()

    while open_heap:
        _, _, _, cur = heapq.heappop(open_heap)
        if cur in closed:
            continue
        closed.add(cur)
        if cur in goals:
            path = []
            node: Optional[tuple[int, int]] = cur
            while node is not None:
                path.append(node)
                node = came[node]
            return list(reversed(path))
        for nxt in neighbors(*cur):
            if not grid.passable(*nxt):
                continue
            tentative = g_score[cur] + step(cur, nxt)
            if tentative < g_score.get(nxt, math.inf):
                g_score[nxt] = tentative
                came[nxt] = cur
                hn = h(nxt)
                heapq.heappush(open_heap, (tentative + hn, hn, idx(nxt), nxt))
    raise PlanningError("goal unreachable")


def next_action(
    path: list[tuple[int, int]], start_situation: Situation, grid: OccupancyGrid
) -> str:
    """The discrete first action implied by the path's initial step.

    theta = signed angle from the agent heading to the step direction,
    CCW-positive in (-180, 180]; forward |theta| < 45, left [45, 135),
    backward |theta| >= 135, right (-135, -45]. Exact 45-degree boundaries
    go to the turns.
    """
    if len(path) < 2:
        raise PlanningError("path needs at least two cells to derive an action")
    (r0, c0), (r1, c1) = path[0], path[1]
    dx = (c1 - c0) * grid.cell
    dy = (r1 - r0) * grid.cell
    if dx == 0 and dy == 0:
        raise PlanningError("zero-length path step")
    theta = math.degrees(signed_angle(math.atan2(dy, dx) - start_situation.rotation))
    if abs(theta) < 45.0:
        return "move_forward"
    if 45.0 <= theta < 135.0:
        return "turn_left"
    if abs(theta) >= 135.0:
        return "move_backward"
    return "turn_right"


def goal_region(
    scene: Scene, grid: OccupancyGrid, obj: ObjectInstance, radius: float = GOAL_RADIUS
) -> set[tuple[int, int]]:
    """Passable cells within `radius` of the goal object's footprint."""
    cells = grid.passable_cells()
    if not cells:
        return set()
    centers = np.array([grid.cell_center(r, c) for r, c in cells])
    near = obj.footprint_distance(centers) <= radius
    return {cell for cell, ok in zip(cells, near) if ok}


# ---------------------------------------------------------------------------
# Goal sampling


def sample_goal(
    scene: Scene,
    rng: Random,
    bank: HoiBank | None = None,
    llm=None,
) -> Goal:
    """Pick an interactable object and phrase the interaction goal.

    Template route: "I want to <verb> the <color?> <label-id-IMG>." with verbs
    drawn from the HOI bank. With a chat client the goal text is generated
    (and cached) from the object's attributes and relations.
    """
    bank = bank or HoiBank.bundled()
    interactable = [o for o in scene.objects if classify_interactable(o) in ("large", "small")]
    if not interactable:
        raise SamplingError("scene has no interactable object")
    obj = interactable[rng.randrange(len(interactable))]

    if llm is not None:
        payload = {
            "object_name": obj.label,
            "attributes": obj.attributes.short(),
        }
        prompt = (
            "Please generate a sentence about doing something with the object "
            f"{obj.label} based on the following information:\n"
            f"Object attributes are given in the following json: {payload}\n"
            "You can select part of the given information to generate the sentence. "
            "The generated sentence should be natural, one sentence, in the format: "
            'result: "..."\n'
            "Refer to the object with its placeholder token "
            f"<{obj.label}-{obj.id}-IMG>."
        )
        raw = llm.complete([{"role": "user", "content": prompt}])
        m = re.search(r'result:\s*"(.+?)"', raw)
        text = m.group(1) if m else raw.strip()
        return Goal(obj.id, interleave_from_text(text, scene))

    verbs = bank.verbs_for(obj.label) or ["use"]
    verb = verbs[rng.randrange(len(verbs))]
    color = obj.attributes.color
    lead = f"I want to {verb} the " + (f"{color} " if color else "")
    return Goal(
        obj.id,
        interleave(lead, Segment("image_slot", f"<{obj.label}-{obj.id}-IMG>", obj.image_ref), "."),
    )


# ---------------------------------------------------------------------------
# Record generation


def _nearest_passable(grid: OccupancyGrid, xy) -> tuple[int, int]:
    """Planning start for poses whose own cell is blocked (e.g. sitting on a
    couch): the passable cell nearest the pose, row-major ties."""
    r0, c0 = grid.cell_of(xy)
    if grid.passable(r0, c0):
        return r0, c0
    best, best_d = None, math.inf
    for r, c in grid.passable_cells():
        p = grid.cell_center(r, c)
        d = (p[0] - xy[0]) ** 2 + (p[1] - xy[1]) ** 2
        if d < best_d - 1e-12:
            best, best_d = (r, c), d
    if best is None:
        raise PlanningError("grid has no passable cell")
    return best


def gen_msnn_record(
    scene: Scene,
    rng: Random,
    bank: HoiBank | None = None,
    grid: OccupancyGrid | None = None,
    llm=None,
    record_index: int = 0,
    attempts: int = 20,
    k_nearest: int = 3,
) -> MSNNRecord:
    """Compose start sampling, goal sampling, A*, and action labeling.

    Start situations cycle through all four interaction types (skipping types
    the scene cannot support); attempts whose start already sits in the goal
    region are retried.
    """
    bank = bank or HoiBank.bundled()
    grid = grid if grid is not None else scene_grid(scene)
    types = ("standing", "sitting", "interact_large", "interact_small")
    last_error: Exception | None = None
    for attempt in range(attempts):
        interaction = types[(record_index + attempt) % len(types)]
        try:
            start = sample_situation(scene, interaction, rng, grid)
            start = _with_descriptions(scene, start, bank, rng, k_nearest)
            goal = sample_goal(scene, rng, bank, llm=llm)
            region = goal_region(scene, grid, scene.object(goal.object_id))
            if not region:
                raise PlanningError("goal unreachable")
            start_cell = _nearest_passable(grid, start.location[:2])
            if start_cell in region:
                raise PlanningError("start already at goal")
            path = plan_path(grid, start_cell, region)
            action = next_action(path, start, grid)
        except (SamplingError, PlanningError) as exc:
            last_error = exc
            continue
        record = MSNNRecord(
            scene_id=scene.scene_id,
            start=start,
            goal=goal,
            path=tuple(path),
            action=action,
            record_id=make_qa_id(
                scene.scene_id, "msnn", "navigation", start.to_json().__repr__(), str(record_index)
            ),
        )
        record.validate(grid)
        return record
    raise SamplingError(f"no navigable record after {attempts} attempts: {last_error}")


def _with_descriptions(
    scene: Scene, s: Situation, bank: HoiBank, rng: Random, k: int
) -> Situation:
    return replace(
        s,
        action_text=render_action_description(scene, s, bank, rng),
        location_text=render_location_description(scene, s, k),
    )
