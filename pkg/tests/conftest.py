"""Shared fixtures: synthetic scenes, the 5-scene fixture pack, RNG helpers."""

from __future__ import annotations

import json
from pathlib import Path
from random import Random

import pytest

from situgen.scene import Scene, load_scene, scene_from_dict


def scene_dict(scene_id="fix_0", polygon=None, objects=None, z=0.0, source="synthetic"):
    return {
        "scene_id": scene_id,
        "source": source,
        "floor": {"polygon": polygon or [[0, 0], [6, 0], [6, 5], [0, 5]], "z": z},
        "objects": objects or [],
    }


def obj_dict(oid, label, centroid, size, **kw):
    d = {"id": oid, "label": label, "centroid": list(centroid), "size": list(size)}
    d.update(kw)
    return d


def make_scene(**kw) -> Scene:
    return scene_from_dict(scene_dict(**kw))


def random_scene(rng: Random, scene_id="rand", max_objects=15, span=8.0) -> Scene:
    """Random synthetic scene exercising every relation kind: scattered boxes,
    a support stack, a contained object, and a same-label aligned triple."""
    objects = []
    oid = 0

    def add(label, centroid, size, **kw):
        nonlocal oid
        objects.append(obj_dict(oid, label, centroid, size, **kw))
        oid += 1

    n_scatter = rng.randrange(2, max(3, max_objects - 6))
    labels = ["chair", "table", "lamp", "box", "plant", "shelf", "bag"]
    for _ in range(n_scatter):
        label = labels[rng.randrange(len(labels))]
        size = [rng.uniform(0.2, 1.2), rng.uniform(0.2, 1.2), rng.uniform(0.2, 1.5)]
        centroid = [
            rng.uniform(0.8, span - 0.8),
            rng.uniform(0.8, span - 0.8),
            size[2] / 2 + rng.uniform(0, 1.2),
        ]
        add(label, centroid, size)

    if rng.random() < 0.8:  # support stack: small box resting on a table top
        tx, ty = rng.uniform(1.5, span - 1.5), rng.uniform(1.5, span - 1.5)
        add("table", [tx, ty, 0.4], [1.0, 0.8, 0.8])
        add("book", [tx + rng.uniform(-0.1, 0.1), ty, 0.84], [0.25, 0.2, 0.06])
    if rng.random() < 0.8:  # containment
        cx, cy = rng.uniform(1.5, span - 1.5), rng.uniform(1.5, span - 1.5)
        add("cabinet", [cx, cy, 0.9], [1.0, 0.6, 1.8])
        add("cup", [cx, cy, 0.5], [0.1, 0.1, 0.12])
    if rng.random() < 0.7:  # aligned same-label triple
        x0, y0 = rng.uniform(1.0, 3.0), rng.uniform(1.0, span - 1.0)
        dx = rng.uniform(0.8, 1.4)
        for k in range(3):
            add("stool", [x0 + k * dx, y0 + rng.uniform(-0.05, 0.05), 0.25], [0.35, 0.35, 0.5])

    return scene_from_dict(
        scene_dict(
            scene_id=scene_id,
            polygon=[[0, 0], [span, 0], [span, span], [0, span]],
            objects=objects,
        )
    )


FIXTURE_PACK = [
    scene_dict(
        scene_id="pack_bedroom",
        polygon=[[0, 0], [5, 0], [5, 4], [0, 4]],
        objects=[
            obj_dict(0, "bed", [1.5, 1.0, 0.3], [2.0, 1.6, 0.6],
                     attributes={"color": "blue", "material": "fabric and wood",
                                 "usage": "sleeping", "state": "made"},
                     flags=["sittable"], front_normal=[1, 0], image_ref="crops/bed.jpg"),
            obj_dict(1, "nightstand", [3.0, 0.5, 0.3], [0.45, 0.4, 0.6],
                     attributes={"color": "brown", "material": "wood"}),
            obj_dict(2, "lamp", [3.0, 0.5, 0.75], [0.2, 0.2, 0.3],
                     attributes={"color": "silver", "state": "off"},
                     flags=["small_interactable"]),
            obj_dict(3, "wardrobe", [4.4, 3.2, 0.9], [1.0, 0.6, 1.8],
                     attributes={"color": "white", "structure": "two-door"},
                     interactive_part={"center": [4.4, 2.9, 0.9], "normal": [0, -1]},
                     flags=["large_interactable"], image_ref="crops/wardrobe.jpg"),
            obj_dict(4, "pillow", [1.0, 1.0, 0.7], [0.5, 0.35, 0.15],
                     attributes={"color": "white", "texture": "soft"}),
        ],
    ),
    scene_dict(
        scene_id="pack_kitchen",
        polygon=[[0, 0], [6, 0], [6, 4], [0, 4]],
        objects=[
            obj_dict(0, "refrigerator", [5.4, 0.6, 0.9], [0.8, 0.7, 1.8],
                     attributes={"color": "white", "material": "metal", "state": "closed"},
                     interactive_part={"center": [5.0, 0.6, 0.9], "normal": [-1, 0]},
                     flags=["large_interactable"], image_ref="crops/fridge.jpg"),
            obj_dict(1, "oven", [5.4, 1.8, 0.45], [0.7, 0.7, 0.9],
                     attributes={"color": "black", "state": "off"},
                     interactive_part={"center": [5.05, 1.8, 0.45], "normal": [-1, 0]},
                     flags=["large_interactable"]),
            obj_dict(2, "table", [2.0, 2.0, 0.4], [1.4, 0.9, 0.8],
                     attributes={"color": "brown", "material": "wood"}),
            obj_dict(3, "bowl", [2.0, 2.0, 0.85], [0.2, 0.2, 0.1],
                     attributes={"color": "green"}, flags=["small_interactable"]),
            obj_dict(4, "chair", [2.0, 0.9, 0.45], [0.5, 0.5, 0.9],
                     attributes={"color": "brown", "material": "wood"},
                     front_normal=[0, 1], flags=["sittable"], image_ref="crops/chair.jpg"),
            obj_dict(5, "chair", [1.2, 2.9, 0.45], [0.5, 0.5, 0.9],
                     attributes={"color": "brown", "material": "wood"},
                     front_normal=[0, -1], flags=["sittable"]),
            obj_dict(6, "sink", [0.5, 3.5, 0.45], [0.6, 0.5, 0.9],
                     attributes={"color": "white", "material": "ceramic"}),
        ],
    ),
    scene_dict(
        scene_id="pack_office",
        polygon=[[0, 0], [5, 0], [5, 5], [0, 5]],
        objects=[
            obj_dict(0, "desk", [1.0, 4.0, 0.4], [1.4, 0.7, 0.8],
                     attributes={"color": "white", "material": "wood"}),
            obj_dict(1, "monitor", [1.0, 4.1, 0.95], [0.55, 0.1, 0.35],
                     attributes={"color": "black", "state": "on"}, image_ref="crops/monitor.jpg"),
            obj_dict(2, "keyboard", [1.0, 3.8, 0.83], [0.4, 0.15, 0.04],
                     attributes={"color": "black"}, flags=["small_interactable"]),
            obj_dict(3, "chair", [1.0, 3.0, 0.45], [0.5, 0.5, 0.9],
                     attributes={"color": "gray", "material": "fabric"},
                     front_normal=[0, 1], flags=["sittable"]),
            obj_dict(4, "bookshelf", [4.5, 1.0, 0.9], [0.8, 0.3, 1.8],
                     attributes={"color": "brown", "material": "wood"}),
            obj_dict(5, "book", [4.5, 1.0, 1.0], [0.2, 0.15, 0.25],
                     attributes={"color": "red"}, flags=["small_interactable"]),
            obj_dict(6, "trash can", [0.4, 0.4, 0.25], [0.35, 0.35, 0.5],
                     attributes={"color": "gray", "material": "plastic"},
                     flags=["small_interactable"], image_ref="crops/trash.jpg"),
        ],
    ),
    scene_dict(
        scene_id="pack_living",
        polygon=[[0, 0], [7, 0], [7, 5], [3, 5], [3, 3], [0, 3]],  # L-shape
        objects=[
            obj_dict(0, "couch", [1.5, 1.0, 0.35], [1.8, 0.9, 0.7],
                     attributes={"color": "black", "material": "fabric"},
                     front_normal=[0, 1], flags=["sittable"], image_ref="crops/couch.jpg"),
            obj_dict(1, "tv", [5.5, 4.5, 1.0], [1.2, 0.15, 0.7],
                     attributes={"color": "black", "state": "off"}),
            obj_dict(2, "plant", [6.5, 0.5, 0.4], [0.4, 0.4, 0.8],
                     attributes={"color": "green"}, flags=["small_interactable"]),
            obj_dict(3, "lamp", [0.4, 2.5, 0.7], [0.3, 0.3, 1.4],
                     attributes={"color": "silver", "state": "on"},
                     flags=["small_interactable"]),
            obj_dict(4, "ottoman", [3.5, 1.5, 0.2], [0.6, 0.6, 0.4],
                     attributes={"color": "gray"}, front_normal=[0, 1], flags=["sittable"]),
        ],
    ),
    scene_dict(
        scene_id="pack_stools",
        polygon=[[0, 0], [6, 0], [6, 6], [0, 6]],
        objects=[
            obj_dict(0, "stool", [1.0, 3.0, 0.25], [0.35, 0.35, 0.5],
                     attributes={"color": "red"}, front_normal=[1, 0], flags=["sittable"]),
            obj_dict(1, "stool", [2.2, 3.0, 0.25], [0.35, 0.35, 0.5],
                     attributes={"color": "red"}, front_normal=[1, 0], flags=["sittable"]),
            obj_dict(2, "stool", [3.4, 3.0, 0.25], [0.35, 0.35, 0.5],
                     attributes={"color": "red"}, front_normal=[1, 0], flags=["sittable"]),
            obj_dict(3, "table", [5.0, 3.0, 0.4], [1.2, 0.8, 0.8],
                     attributes={"color": "white", "material": "metal",
                                 "usage": "work surface", "texture": "smooth"}),
            obj_dict(4, "bag", [5.0, 5.0, 0.2], [0.4, 0.3, 0.4],
                     attributes={"color": "purple"}, flags=["small_interactable"],
                     image_ref="crops/bag.jpg"),
        ],
    ),
]


@pytest.fixture(scope="session")
def fixture_pack_dir(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("scene_pack")
    for d in FIXTURE_PACK:
        (root / f"{d['scene_id']}.json").write_text(json.dumps(d))
    return root


@pytest.fixture(scope="session")
def fixture_scenes(fixture_pack_dir) -> list[Scene]:
    return [load_scene(p) for p in sorted(fixture_pack_dir.glob("*.json"))]


@pytest.fixture
def simple_scene() -> Scene:
    """One chair in a 4x4 room."""
    return make_scene(
        scene_id="simple",
        polygon=[[0, 0], [4, 0], [4, 4], [0, 4]],
        objects=[
            obj_dict(0, "chair", [2.0, 2.0, 0.45], [0.5, 0.5, 0.9],
                     front_normal=[0, -1], flags=["sittable"],
                     attributes={"color": "brown"})
        ],
    )
