"""Scene data model, JSON ingestion, floor rasterization, and agent-frame normalization.

A scene is a set of axis-aligned (optionally yawed) object boxes over a floor
region. Scenes are immutable after load and safe to share across threads; all
operations here are deterministic functions of their inputs.

File format: one JSON object per scene; lengths in meters, angles in degrees
(converted to radians in [0, 2*pi) on load).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Optional

import numpy as np

from .errors import SceneValidationError
from .geometry import (
    normalize_angle,
    points_in_polygon,
    polygon_area,
    polygon_is_simple,
    rect_contains_xy,
    rect_distance_xy,
    rot2d,
)

if TYPE_CHECKING:  # pragma: no cover
    from .situations import Situation

SOURCES = ("scannet", "rscan3", "arkitscenes", "synthetic")
LABEL_RE = re.compile(r"[a-z][a-z0-9_ ]*$")
ATTRIBUTE_KEYS = ("color", "shape3d", "material", "usage", "texture", "structure", "state")
FLAGS = ("sittable", "large_interactable", "small_interactable")

DEFAULT_CELL = 0.10
DEFAULT_CLEARANCE = 0.20


@dataclass(frozen=True)
class AttributeRecord:
    """The seven per-object attributes, each an optional short string.

    `descriptive` holds optional sentence-length variants under the same keys.
    """

    color: Optional[str] = None
    shape3d: Optional[str] = None
    material: Optional[str] = None
    usage: Optional[str] = None
    texture: Optional[str] = None
    structure: Optional[str] = None
    state: Optional[str] = None
    descriptive: Optional[dict[str, str]] = None

    def short(self) -> dict[str, str]:
        """Present short attributes as a key -> value dict (missing keys omitted)."""
        return {k: v for k in ATTRIBUTE_KEYS if (v := getattr(self, k)) is not None}

    @classmethod
    def from_dict(cls, short: dict | None, descriptive: dict | None = None) -> "AttributeRecord":
        short = short or {}
        for key in short:
            if key not in ATTRIBUTE_KEYS:
                raise SceneValidationError(f"unknown attribute key {key!r}", field="attributes")
        if descriptive:
            for key in descriptive:
                if key not in ATTRIBUTE_KEYS:
                    raise SceneValidationError(
                        f"unknown attribute key {key!r}", field="descriptive_attributes"
                    )
        return cls(**{k: short.get(k) for k in ATTRIBUTE_KEYS}, descriptive=descriptive or None)


@dataclass(frozen=True)
class InteractivePart:
    center: np.ndarray  # (3,)
    normal: np.ndarray  # (2,), unit length


@dataclass(frozen=True)
class ObjectInstance:
    id: int
    label: str
    centroid: np.ndarray  # (3,) m
    size: np.ndarray  # (3,) axis-aligned extents, m
    yaw: float = 0.0
    front_normal: Optional[np.ndarray] = None  # (2,), unit
    interactive_part: Optional[InteractivePart] = None
    attributes: AttributeRecord = field(default_factory=AttributeRecord)
    image_ref: Optional[str] = None
    flags: frozenset[str] = frozenset()

    @property
    def top_z(self) -> float:
        return float(self.centroid[2] + self.size[2] / 2)

    @property
    def bottom_z(self) -> float:
        return float(self.centroid[2] - self.size[2] / 2)

    @property
    def inst_name(self) -> str:
        return f"{self.label}-{self.id}"

    def footprint_distance(self, points_xy: np.ndarray) -> np.ndarray:
        """Distance from each XY point to this object's footprint (0 inside)."""
        yaw = self.yaw if abs(self.yaw) > 1e-6 else 0.0
        return rect_distance_xy(
            points_xy, self.centroid[:2], (self.size[0] / 2, self.size[1] / 2), yaw
        )

    def footprint_contains(self, points_xy: np.ndarray) -> np.ndarray:
        """True for XY points strictly inside this object's footprint."""
        yaw = self.yaw if abs(self.yaw) > 1e-6 else 0.0
        return rect_contains_xy(
            points_xy, self.centroid[:2], (self.size[0] / 2, self.size[1] / 2), yaw
        )

    def validate(self) -> None:
        if self.id < 0:
            raise SceneValidationError(f"object id must be >= 0, got {self.id}", field="objects.id")
        if not LABEL_RE.match(self.label):
            raise SceneValidationError(f"bad label {self.label!r}", field="objects.label")
        if not np.all(np.asarray(self.size) > 0):
            raise SceneValidationError(
                f"size components must be > 0 for object {self.id}", field="objects.size"
            )
        for name, vec in (("front_normal", self.front_normal),
                          ("interactive_part.normal",
                           self.interactive_part.normal if self.interactive_part else None)):
            if vec is not None and abs(float(np.hypot(vec[0], vec[1])) - 1.0) > 1e-6:
                raise SceneValidationError(
                    f"{name} of object {self.id} is not unit length", field=f"objects.{name}"
                )
        bad = self.flags - set(FLAGS)
        if bad:
            raise SceneValidationError(
                f"unknown flags {sorted(bad)} on object {self.id}", field="objects.flags"
            )


@dataclass(frozen=True)
class OccupancyGrid:
    """Row-major boolean grid over the floor; True = passable.

    Cell (r, c) covers [origin + (c, r)*cell, origin + (c+1, r+1)*cell).
    """

    origin: np.ndarray  # (2,) world XY of the grid's min corner
    cell: float
    width: int
    height: int
    cells: np.ndarray  # bool, shape (height, width)

    def __post_init__(self):
        if self.cell <= 0:
            raise SceneValidationError("grid cell size must be > 0", field="floor.grid.cell")
        if self.cells.shape != (self.height, self.width):
            raise SceneValidationError(
                f"cells shape {self.cells.shape} != (height, width) = "
                f"({self.height}, {self.width})",
                field="floor.grid.cells",
            )

    def cell_center(self, r: int, c: int) -> np.ndarray:
        return self.origin + (np.array([c, r], dtype=float) + 0.5) * self.cell

    def centers(self) -> np.ndarray:
        """(H*W, 2) array of all cell centers, row-major."""
        cs, rs = np.meshgrid(np.arange(self.width), np.arange(self.height))
        grid_idx = np.stack([cs.ravel(), rs.ravel()], axis=1).astype(float)
        return self.origin + (grid_idx + 0.5) * self.cell

    def cell_of(self, xy) -> tuple[int, int]:
        """Grid cell (r, c) containing a world XY point."""
        c = int(math.floor((float(xy[0]) - self.origin[0]) / self.cell))
        r = int(math.floor((float(xy[1]) - self.origin[1]) / self.cell))
        return r, c

    def in_bounds(self, r: int, c: int) -> bool:
        return 0 <= r < self.height and 0 <= c < self.width

    def passable(self, r: int, c: int) -> bool:
        return self.in_bounds(r, c) and bool(self.cells[r, c])

    def passable_cells(self) -> list[tuple[int, int]]:
        rs, cs = np.nonzero(self.cells)
        return list(zip(rs.tolist(), cs.tolist()))


@dataclass(frozen=True)
class FloorRegion:
    """Passable/standable floor: a CCW simple polygon or a pre-built grid."""

    z: float
    polygon: Optional[np.ndarray] = None  # (M, 2)
    grid: Optional[OccupancyGrid] = None

    def validate(self) -> None:
        if (self.polygon is None) == (self.grid is None):
            raise SceneValidationError(
                "exactly one of polygon/grid must be present", field="floor"
            )
        if self.polygon is not None:
            if len(self.polygon) < 3:
                raise SceneValidationError("polygon needs >= 3 vertices", field="floor.polygon")
            area = polygon_area(self.polygon)
            if area <= 0:
                raise SceneValidationError(
                    f"polygon must be CCW with positive area (signed area {area:.6g})",
                    field="floor.polygon",
                )
            if not polygon_is_simple(self.polygon):
                raise SceneValidationError("polygon is self-intersecting", field="floor.polygon")

    def bounds(self) -> tuple[float, float, float, float]:
        """(min_x, min_y, max_x, max_y) of the region."""
        if self.polygon is not None:
            return (
                float(self.polygon[:, 0].min()),
                float(self.polygon[:, 1].min()),
                float(self.polygon[:, 0].max()),
                float(self.polygon[:, 1].max()),
            )
        g = self.grid
        hi = g.origin + np.array([g.width, g.height], dtype=float) * g.cell
        return float(g.origin[0]), float(g.origin[1]), float(hi[0]), float(hi[1])

    def contains_xy(self, points: np.ndarray) -> np.ndarray:
        if self.polygon is not None:
            return points_in_polygon(points, self.polygon)
        out = np.zeros(len(points), dtype=bool)
        for i, p in enumerate(points):
            r, c = self.grid.cell_of(p)
            out[i] = self.grid.passable(r, c)
        return out


@dataclass(frozen=True)
class Scene:
    scene_id: str
    objects: tuple[ObjectInstance, ...]
    floor: FloorRegion
    source: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {o.id: o for o in self.objects})

    def object(self, oid: int) -> ObjectInstance:
        return self._by_id[oid]

    def has_object(self, oid: int) -> bool:
        return oid in self._by_id

    def labels(self) -> set[str]:
        return {o.label for o in self.objects}

    def with_flag(self, flag: str) -> list[ObjectInstance]:
        return [o for o in self.objects if flag in o.flags]

    def validate(self) -> None:
        if not self.scene_id:
            raise SceneValidationError("scene_id must be non-empty", field="scene_id")
        if self.source not in SOURCES:
            raise SceneValidationError(
                f"source must be one of {SOURCES}, got {self.source!r}", field="source"
            )
        self.floor.validate()
        seen: dict[int, int] = {}
        for obj in self.objects:
            obj.validate()
            seen[obj.id] = seen.get(obj.id, 0) + 1
        dups = sorted(i for i, n in seen.items() if n > 1)
        if dups:
            raise SceneValidationError(
                "duplicate object id: " + ", ".join(str(i) for i in dups), field="objects.id"
            )
        min_x, min_y, max_x, max_y = self.floor.bounds()
        for obj in self.objects:
            x, y = float(obj.centroid[0]), float(obj.centroid[1])
            if not (min_x - 1.0 <= x <= max_x + 1.0 and min_y - 1.0 <= y <= max_y + 1.0):
                raise SceneValidationError(
                    f"object {obj.id} centroid ({x:.3f}, {y:.3f}) lies outside the floor "
                    "bounding rectangle inflated by 1.0 m",
                    field="objects.centroid",
                )


# ---------------------------------------------------------------------------
# JSON serialization


def _round6(x: float) -> float:
    return round(float(x), 6)


def _vec(x: Iterable[float]) -> list[float]:
    return [float(v) for v in x]


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise SceneValidationError(f"missing required field {key!r}", field=where)
    return d[key]


def object_from_dict(d: dict) -> ObjectInstance:
    oid = _require(d, "id", "objects")
    if not isinstance(oid, int) or isinstance(oid, bool):
        raise SceneValidationError(f"object id must be an integer, got {oid!r}", field="objects.id")
    part = None
    if d.get("interactive_part") is not None:
        p = d["interactive_part"]
        part = InteractivePart(
            center=np.asarray(_require(p, "center", "objects.interactive_part"), dtype=float),
            normal=np.asarray(_require(p, "normal", "objects.interactive_part"), dtype=float),
        )
    fn = d.get("front_normal")
    return ObjectInstance(
        id=oid,
        label=str(_require(d, "label", "objects")),
        centroid=np.asarray(_require(d, "centroid", "objects"), dtype=float),
        size=np.asarray(_require(d, "size", "objects"), dtype=float),
        yaw=normalize_angle(math.radians(float(d.get("yaw", 0.0)))),
        front_normal=None if fn is None else np.asarray(fn, dtype=float),
        interactive_part=part,
        attributes=AttributeRecord.from_dict(
            d.get("attributes"), d.get("descriptive_attributes")
        ),
        image_ref=d.get("image_ref"),
        flags=frozenset(d.get("flags", [])),
    )


def object_to_dict(o: ObjectInstance) -> dict:
    d: dict = {
        "id": o.id,
        "label": o.label,
        "centroid": _vec(o.centroid),
        "size": _vec(o.size),
        "yaw": _round6(math.degrees(o.yaw)),
    }
    if o.front_normal is not None:
        d["front_normal"] = _vec(o.front_normal)
    if o.interactive_part is not None:
        d["interactive_part"] = {
            "center": _vec(o.interactive_part.center),
            "normal": _vec(o.interactive_part.normal),
        }
    short = o.attributes.short()
    if short:
        d["attributes"] = short
    if o.attributes.descriptive:
        d["descriptive_attributes"] = dict(sorted(o.attributes.descriptive.items()))
    if o.image_ref is not None:
        d["image_ref"] = o.image_ref
    if o.flags:
        d["flags"] = sorted(o.flags)
    return d


def grid_to_dict(g: OccupancyGrid) -> dict:
    bits = "".join("1" if b else "0" for b in g.cells.ravel())
    return {
        "origin": _vec(g.origin),
        "cell": float(g.cell),
        "width": g.width,
        "height": g.height,
        "cells": bits,
    }


def grid_from_dict(d: dict) -> OccupancyGrid:
    width = int(_require(d, "width", "floor.grid"))
    height = int(_require(d, "height", "floor.grid"))
    bits = _require(d, "cells", "floor.grid")
    if len(bits) != width * height:
        raise SceneValidationError(
            f"cells length {len(bits)} != width*height = {width * height}",
            field="floor.grid.cells",
        )
    cells = np.array([ch == "1" for ch in bits], dtype=bool).reshape(height, width)
    return OccupancyGrid(
        origin=np.asarray(_require(d, "origin", "floor.grid"), dtype=float),
        cell=float(_require(d, "cell", "floor.grid")),
        width=width,
        height=height,
        cells=cells,
    )


def scene_from_dict(data: dict) -> Scene:
    floor_d = _require(data, "floor", "floor")
    polygon = floor_d.get("polygon")
    grid = floor_d.get("grid")
    floor = FloorRegion(
        z=float(_require(floor_d, "z", "floor")),
        polygon=None if polygon is None else np.asarray(polygon, dtype=float),
        grid=None if grid is None else grid_from_dict(grid),
    )
    objects = tuple(object_from_dict(od) for od in data.get("objects", []))
    scene = Scene(
        scene_id=str(_require(data, "scene_id", "scene_id")),
        objects=objects,
        floor=floor,
        source=data.get("source", "synthetic"),
    )
    scene.validate()
    return scene


def scene_to_dict(scene: Scene) -> dict:
    floor: dict = {"z": float(scene.floor.z)}
    if scene.floor.polygon is not None:
        floor["polygon"] = [_vec(p) for p in scene.floor.polygon]
    else:
        floor["grid"] = grid_to_dict(scene.floor.grid)
    return {
        "scene_id": scene.scene_id,
        "source": scene.source,
        "floor": floor,
        "objects": [object_to_dict(o) for o in scene.objects],
    }


def load_scene(path: str | Path) -> Scene:
    """Load and fully validate one scene JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneValidationError(f"invalid JSON in {path}: {exc}") from exc
    return scene_from_dict(data)


def save_scene(scene: Scene, path: str | Path) -> None:
    """Write the canonical JSON form (sorted keys; load∘save is the identity)."""
    Path(path).write_text(canonical_json(scene_to_dict(scene)) + "\n")


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, ensure_ascii=False, separators=(",", ": "))


def load_scene_pack(directory: str | Path) -> list[Scene]:
    """Load every *.json scene in a directory, sorted by filename."""
    files = sorted(Path(directory).glob("*.json"))
    return [load_scene(f) for f in files]


# ---------------------------------------------------------------------------
# Rasterization


def rasterize_floor(
    region: FloorRegion,
    obstacles: Iterable[ObjectInstance] = (),
    cell: float = DEFAULT_CELL,
    clearance: float = DEFAULT_CLEARANCE,
) -> OccupancyGrid:
    """Discretize the floor: a cell is passable iff its center is inside the
    region, outside every obstacle footprint, and at distance >= clearance
    from each footprint.

    Sittable objects still count as obstacles here; walking around a couch is
    not optional even if sitting on it is.
    """
    if cell <= 0:
        raise SceneValidationError("cell must be > 0", field="cell")
    if clearance < 0:
        raise SceneValidationError("clearance must be >= 0", field="clearance")
    region.validate()

    min_x, min_y, max_x, max_y = region.bounds()
    origin = np.array([min_x, min_y], dtype=float)
    width = max(1, int(math.ceil((max_x - min_x) / cell - 1e-9)))
    height = max(1, int(math.ceil((max_y - min_y) / cell - 1e-9)))

    grid = OccupancyGrid(
        origin=origin,
        cell=cell,
        width=width,
        height=height,
        cells=np.zeros((height, width), dtype=bool),
    )
    centers = grid.centers()
    passable = region.contains_xy(centers)
    for obj in obstacles:
        if not passable.any():
            break
        passable &= ~obj.footprint_contains(centers)
        passable &= obj.footprint_distance(centers) >= clearance
    return replace(grid, cells=passable.reshape(height, width))


def scene_grid(scene: Scene, cell: float = DEFAULT_CELL, clearance: float = DEFAULT_CLEARANCE) -> OccupancyGrid:
    """The scene's navigation grid (all objects are obstacles)."""
    return rasterize_floor(scene.floor, scene.objects, cell=cell, clearance=clearance)


# ---------------------------------------------------------------------------
# Situation-frame normalization


def normalize_to_situation(scene: Scene, s: "Situation") -> Scene:
    """Rigidly move the scene into the agent's frame.

    The agent pose maps to the origin with heading +x; centroids, normals,
    yaw and the floor geometry transform identically. Pure isometry.
    """
    loc = np.asarray(s.location, dtype=float)
    rot = float(s.rotation)
    if not math.isfinite(rot):
        raise SceneValidationError("situation rotation must be finite", field="situation.rotation")
    r_inv = rot2d(-rot)

    def tf_xy(points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - loc[:2]) @ r_inv.T

    def tf_point3(p: np.ndarray) -> np.ndarray:
        xy = tf_xy(p[None, :2])[0]
        return np.array([xy[0], xy[1], float(p[2]) - loc[2]])

    def tf_dir(v: Optional[np.ndarray]) -> Optional[np.ndarray]:
        if v is None:
            return None
        return r_inv @ np.asarray(v, dtype=float)

    objects = []
    for o in scene.objects:
        part = o.interactive_part
        objects.append(
            replace(
                o,
                centroid=tf_point3(o.centroid),
                yaw=normalize_angle(o.yaw - rot),
                front_normal=tf_dir(o.front_normal),
                interactive_part=None
                if part is None
                else InteractivePart(center=tf_point3(part.center), normal=tf_dir(part.normal)),
            )
        )

    if scene.floor.polygon is not None:
        floor = FloorRegion(z=scene.floor.z - loc[2], polygon=tf_xy(scene.floor.polygon))
    else:
        # A grid is axis-aligned by construction; rotating it requires
        # re-binning into a new grid covering the rotated bounding box.
        g = scene.floor.grid
        corners = np.array(
            [
                g.origin,
                g.origin + [g.width * g.cell, 0],
                g.origin + [g.width * g.cell, g.height * g.cell],
                g.origin + [0, g.height * g.cell],
            ]
        )
        tf_corners = tf_xy(corners)
        min_xy = tf_corners.min(axis=0)
        max_xy = tf_corners.max(axis=0)
        width = max(1, int(math.ceil((max_xy[0] - min_xy[0]) / g.cell - 1e-9)))
        height = max(1, int(math.ceil((max_xy[1] - min_xy[1]) / g.cell - 1e-9)))
        new_grid = OccupancyGrid(
            origin=min_xy,
            cell=g.cell,
            width=width,
            height=height,
            cells=np.zeros((height, width), dtype=bool),
        )
        old_centers = g.centers()[np.nonzero(g.cells.ravel())[0]]
        cells = np.zeros((height, width), dtype=bool)
        for p in tf_xy(old_centers):
            r, c = new_grid.cell_of(p)
            if new_grid.in_bounds(r, c):
                cells[r, c] = True
        floor = FloorRegion(z=scene.floor.z - loc[2], grid=replace(new_grid, cells=cells))

    return replace(scene, objects=tuple(objects), floor=floor)
