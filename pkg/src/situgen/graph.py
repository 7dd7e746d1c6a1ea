"""Situated scene graphs: static relations, agent-conditioned proximity
relations, agent-object relations, and visible-distance sub-graphs.

Relation thresholds live in `RelationConfig`; the shipped defaults are in
data/relation_config.json and every CLI entry point accepts an override file.
Horizontal proximity (left/right/front/behind) is the only edge family that
depends on the situation: both endpoints are moved into the agent's frame and
classified into 90-degree sectors as seen by the agent.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from .errors import SceneValidationError
from .geometry import (
    point_line_distance_xy,
    point_segment_distance_xy,
    signed_angle,
    xy_overlap_area,
)
from .scene import ObjectInstance, Scene, normalize_to_situation, object_from_dict, object_to_dict
from .situations import Situation

STATIC_KINDS = ("support", "inside", "above", "below", "near", "far", "between", "aligned")
SITUATED_KINDS = ("left", "right", "front", "behind")
EDGE_KINDS = STATIC_KINDS + SITUATED_KINDS
BANDS = ("near", "middle", "far")
COARSE = ("left", "right", "front", "behind")


@dataclass(frozen=True)
class RelationConfig:
    contact_tol: float = 0.05  # m, vertical contact tolerance for support
    support_overlap: float = 0.5  # fraction of the smaller footprint
    inside_inflate: float = 0.02  # m, bbox inflation for containment
    vertical_gap: float = 0.05  # m, minimum gap for above/below
    near_max: float = 1.0  # m, object-object near
    far_min: float = 3.0  # m, object-object far
    proximity_pair_max: float = 2.0  # m, cutoff for situated proximity pairs
    between_tol: float = 0.3  # m, distance to the b-c segment
    between_min_sep: float = 1.0  # m, minimum b-c separation
    aligned_residual: float = 0.1  # m, collinearity residual (same-label triples)
    agent_near_max: float = 1.5  # m, agent distance bands
    agent_middle_max: float = 3.0

    @classmethod
    def load(cls, path: str | Path) -> "RelationConfig":
        return cls(**json.loads(Path(path).read_text()))

    @classmethod
    def bundled(cls) -> "RelationConfig":
        return cls.load(Path(__file__).parent / "data" / "relation_config.json")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Edge:
    kind: str
    src: int
    dst: int
    extra: Optional[int] = None  # third object, `between` only

    def __post_init__(self):
        if self.kind not in EDGE_KINDS:
            raise SceneValidationError(f"unknown edge kind {self.kind!r}", field="edges.kind")
        if (self.extra is not None) != (self.kind == "between"):
            raise SceneValidationError(
                "extra is required for `between` and forbidden otherwise", field="edges.extra"
            )
        if self.src == self.dst or self.extra in (self.src, self.dst):
            raise SceneValidationError("edge endpoints must be distinct", field="edges")

    def to_json(self) -> dict:
        d = {"kind": self.kind, "src": self.src, "dst": self.dst}
        if self.extra is not None:
            d["extra"] = self.extra
        return d


@dataclass(frozen=True)
class AgentEdge:
    object: int
    distance_m: float
    band: str
    coarse: str
    clock: int

    def __post_init__(self):
        if self.distance_m < 0 or self.band not in BANDS or self.coarse not in COARSE:
            raise SceneValidationError("invalid agent edge", field="agent_edges")
        if not 1 <= self.clock <= 12:
            raise SceneValidationError(
                f"clock must be in [1, 12], got {self.clock}", field="agent_edges.clock"
            )

    def to_json(self) -> dict:
        return {
            "object": self.object,
            "distance_m": round(self.distance_m, 9),
            "band": self.band,
            "coarse": self.coarse,
            "clock": self.clock,
        }


@dataclass
class SituatedGraph:
    nodes: dict[int, ObjectInstance]
    static_edges: list[Edge]
    situated_edges: list[Edge]
    agent_edges: list[AgentEdge]
    situation: Situation
    scene_id: str = ""

    def validate(self) -> None:
        for e in self.static_edges + self.situated_edges:
            for oid in (e.src, e.dst) + ((e.extra,) if e.extra is not None else ()):
                if oid not in self.nodes:
                    raise SceneValidationError(
                        f"edge references missing node {oid}", field="edges"
                    )
        for e in self.static_edges:
            if e.kind in SITUATED_KINDS:
                raise SceneValidationError(
                    f"{e.kind} edges belong in situated_edges", field="edges"
                )
        for e in self.situated_edges:
            if e.kind not in SITUATED_KINDS:
                raise SceneValidationError(
                    f"{e.kind} edges belong in static_edges", field="edges"
                )
        for ae in self.agent_edges:
            if ae.object not in self.nodes:
                raise SceneValidationError(
                    f"agent edge references missing node {ae.object}", field="agent_edges"
                )

    def all_edges(self) -> list[Edge]:
        return self.static_edges + self.situated_edges

    def agent_edge_for(self, oid: int) -> Optional[AgentEdge]:
        for ae in self.agent_edges:
            if ae.object == oid:
                return ae
        return None

    def objects(self) -> list[ObjectInstance]:
        return [self.nodes[i] for i in sorted(self.nodes)]


# ---------------------------------------------------------------------------
# Static relations


def _xy_dist(a: ObjectInstance, b: ObjectInstance) -> float:
    return math.hypot(a.centroid[0] - b.centroid[0], a.centroid[1] - b.centroid[1])


def _supports(a: ObjectInstance, b: ObjectInstance, cfg: RelationConfig) -> bool:
    overlap = xy_overlap_area(a.centroid, a.size, b.centroid, b.size)
    smaller = min(a.size[0] * a.size[1], b.size[0] * b.size[1])
    return (
        overlap >= cfg.support_overlap * smaller
        and abs(a.top_z - b.bottom_z) <= cfg.contact_tol
    )


def _inside(a: ObjectInstance, b: ObjectInstance, cfg: RelationConfig) -> bool:
    # b is inside a's box inflated by inside_inflate, in all three dimensions
    for d in range(3):
        a_min = a.centroid[d] - a.size[d] / 2 - cfg.inside_inflate
        a_max = a.centroid[d] + a.size[d] / 2 + cfg.inside_inflate
        if b.centroid[d] - b.size[d] / 2 < a_min or b.centroid[d] + b.size[d] / 2 > a_max:
            return False
    return True


def _above(a: ObjectInstance, b: ObjectInstance, cfg: RelationConfig) -> bool:
    overlap = xy_overlap_area(a.centroid, a.size, b.centroid, b.size)
    return overlap > 0 and a.bottom_z - b.top_z > cfg.vertical_gap


def compute_static_relations(
    scene: Scene, cfg: RelationConfig | None = None
) -> list[Edge]:
    """Situation-independent edges from the threshold definitions.

    Deterministic: pairs iterate in id order; `between` emits once per
    unordered anchor pair (dst.id < extra.id); `aligned` edges are the union
    of pairwise edges over every collinear same-label triple.
    """
    cfg = cfg or RelationConfig()
    objs = sorted(scene.objects, key=lambda o: o.id)
    edges: list[Edge] = []

    for a, b in itertools.permutations(objs, 2):
        if _supports(a, b, cfg):
            edges.append(Edge("support", a.id, b.id))
        if _inside(a, b, cfg):
            edges.append(Edge("inside", a.id, b.id))
        if _above(a, b, cfg):
            edges.append(Edge("above", a.id, b.id))
        if _above(b, a, cfg):
            edges.append(Edge("below", a.id, b.id))
        d = _xy_dist(a, b)
        if d <= cfg.near_max:
            edges.append(Edge("near", a.id, b.id))
        elif d >= cfg.far_min:
            edges.append(Edge("far", a.id, b.id))

    for a in objs:
        for b, c in itertools.combinations(objs, 2):
            if a.id in (b.id, c.id):
                continue
            sep = _xy_dist(b, c)
            if sep < cfg.between_min_sep:
                continue
            d = point_segment_distance_xy(a.centroid, b.centroid, c.centroid)
            if d <= cfg.between_tol:
                edges.append(Edge("between", a.id, b.id, extra=c.id))

    aligned_pairs: set[tuple[int, int]] = set()
    by_label: dict[str, list[ObjectInstance]] = {}
    for o in objs:
        by_label.setdefault(o.label, []).append(o)
    for group in by_label.values():
        if len(group) < 3:
            continue
        for trio in itertools.combinations(group, 3):
            if _collinear(trio, cfg.aligned_residual):
                for p, q in itertools.permutations(trio, 2):
                    aligned_pairs.add((p.id, q.id))
    edges.extend(Edge("aligned", s, d) for s, d in sorted(aligned_pairs))
    return edges


def _collinear(trio, residual: float) -> bool:
    """The middle centroid lies within `residual` of the line through the
    farthest-apart pair (XY)."""
    pairs = list(itertools.combinations(range(3), 2))
    dists = [_xy_dist(trio[i], trio[j]) for i, j in pairs]
    k = max(range(3), key=lambda i: dists[i])
    i, j = pairs[k]
    if dists[k] <= 0:
        return False
    m = ({0, 1, 2} - {i, j}).pop()
    return (
        point_line_distance_xy(trio[m].centroid, trio[i].centroid, trio[j].centroid)
        <= residual
    )


# ---------------------------------------------------------------------------
# Situated relations


def situate_proximity(
    scene: Scene, s: Situation, cfg: RelationConfig | None = None
) -> list[Edge]:
    """left/right/front/behind between nearby object pairs, as seen by the agent.

    Both objects move into the agent frame; for an ordered pair (a, b) the
    emitted edge states where b sits relative to a in 90-degree sectors
    (exact diagonal ties emit nothing). Pairs farther apart than
    `proximity_pair_max` are skipped.
    """
    cfg = cfg or RelationConfig()
    normalized = normalize_to_situation(scene, s)
    objs = sorted(normalized.objects, key=lambda o: o.id)
    edges: list[Edge] = []
    for a, b in itertools.permutations(objs, 2):
        if _xy_dist(a, b) > cfg.proximity_pair_max:
            continue
        dx = float(b.centroid[0] - a.centroid[0])
        dy = float(b.centroid[1] - a.centroid[1])
        if dy > abs(dx):
            edges.append(Edge("left", b.id, a.id))
        elif -dy > abs(dx):
            edges.append(Edge("right", b.id, a.id))
        elif dx > abs(dy):
            edges.append(Edge("front", b.id, a.id))
        elif -dx > abs(dy):
            edges.append(Edge("behind", b.id, a.id))
    return edges


# ---------------------------------------------------------------------------
# Agent-object relations


def clock_direction(bearing: float) -> int:
    """Clock hour for a signed bearing (radians, CCW-positive, 0 = ahead).

    30-degree bins centered on each hour; 12 is straight ahead and 3 is to
    the right (negative bearings sweep clockwise).
    """
    if not math.isfinite(bearing):
        raise SceneValidationError("bearing must be finite", field="bearing")
    hour = int(math.floor(-math.degrees(bearing) / 30.0 + 0.5)) % 12
    return 12 if hour == 0 else hour


def bearing_to(s: Situation, obj: ObjectInstance) -> float:
    """Signed angle from the agent's heading to the object, in (-pi, pi]."""
    dx = float(obj.centroid[0] - s.location[0])
    dy = float(obj.centroid[1] - s.location[1])
    return signed_angle(math.atan2(dy, dx) - s.rotation)


def distance_band(distance: float, cfg: RelationConfig | None = None) -> str:
    cfg = cfg or RelationConfig()
    if distance <= cfg.agent_near_max:
        return "near"
    if distance <= cfg.agent_middle_max:
        return "middle"
    return "far"


def coarse_direction(bearing: float) -> str:
    """90-degree sectors; the front/behind sectors own their 45-degree boundaries."""
    deg = math.degrees(bearing)
    if abs(deg) <= 45.0:
        return "front"
    if abs(deg) >= 135.0:
        return "behind"
    return "left" if deg > 0 else "right"


def agent_relation(
    s: Situation, obj: ObjectInstance, cfg: RelationConfig | None = None
) -> AgentEdge:
    distance = math.hypot(
        obj.centroid[0] - s.location[0], obj.centroid[1] - s.location[1]
    )
    bearing = bearing_to(s, obj)
    return AgentEdge(
        object=obj.id,
        distance_m=distance,
        band=distance_band(distance, cfg),
        coarse=coarse_direction(bearing),
        clock=clock_direction(bearing),
    )


def compute_agent_edges(
    scene: Scene, s: Situation, cfg: RelationConfig | None = None
) -> list[AgentEdge]:
    return [agent_relation(s, o, cfg) for o in sorted(scene.objects, key=lambda o: o.id)]


# ---------------------------------------------------------------------------
# Graph assembly


def build_situated_graph(
    scene: Scene, s: Situation, cfg: RelationConfig | None = None
) -> SituatedGraph:
    g = SituatedGraph(
        nodes={o.id: o for o in scene.objects},
        static_edges=compute_static_relations(scene, cfg),
        situated_edges=situate_proximity(scene, s, cfg),
        agent_edges=compute_agent_edges(scene, s, cfg),
        situation=s,
        scene_id=scene.scene_id,
    )
    g.validate()
    return g


def subgraph(g: SituatedGraph, visible_distance: float) -> SituatedGraph:
    """Restrict to nodes within `visible_distance` of the agent (pure radius)."""
    if visible_distance <= 0:
        raise SceneValidationError("visible_distance must be > 0", field="visible_distance")
    keep = {ae.object for ae in g.agent_edges if ae.distance_m <= visible_distance}

    def ok(e: Edge) -> bool:
        return e.src in keep and e.dst in keep and (e.extra is None or e.extra in keep)

    return SituatedGraph(
        nodes={i: o for i, o in g.nodes.items() if i in keep},
        static_edges=[e for e in g.static_edges if ok(e)],
        situated_edges=[e for e in g.situated_edges if ok(e)],
        agent_edges=[ae for ae in g.agent_edges if ae.object in keep],
        situation=g.situation,
        scene_id=g.scene_id,
    )


# ---------------------------------------------------------------------------
# JSON export


def graph_key(scene_id: str, s: Situation) -> str:
    """Stable id for a (scene, situation) pair, used to file graph exports."""
    loc = ",".join(f"{float(v):.6f}" for v in s.location)
    payload = f"{scene_id}|{loc}|{math.degrees(s.rotation):.6f}"
    return hashlib.sha1(payload.encode()).hexdigest()[:12]


def graph_to_dict(g: SituatedGraph) -> dict:
    return {
        "graph_id": graph_key(g.scene_id, g.situation),
        "scene_id": g.scene_id,
        "situation": g.situation.to_json(),
        "nodes": [object_to_dict(g.nodes[i]) for i in sorted(g.nodes)],
        "edges": [e.to_json() for e in g.all_edges()],
        "agent_edges": [ae.to_json() for ae in g.agent_edges],
    }


def graph_from_dict(d: dict) -> SituatedGraph:
    situation = Situation.from_json(d["situation"])
    nodes = {od["id"]: object_from_dict(od) for od in d["nodes"]}
    static, situated = [], []
    for ed in d["edges"]:
        e = Edge(ed["kind"], ed["src"], ed["dst"], ed.get("extra"))
        (situated if e.kind in SITUATED_KINDS else static).append(e)
    agent_edges = [
        AgentEdge(a["object"], a["distance_m"], a["band"], a["coarse"], a["clock"])
        for a in d["agent_edges"]
    ]
    g = SituatedGraph(
        nodes=nodes,
        static_edges=static,
        situated_edges=situated,
        agent_edges=agent_edges,
        situation=situation,
        scene_id=d.get("scene_id", ""),
    )
    g.validate()
    return g
