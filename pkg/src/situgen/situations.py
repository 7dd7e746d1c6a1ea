"""Agent situations: the four interaction types and their multi-modal descriptions.

A situation is an agent pose (location, rotation in the XY plane) plus two
interleaved text/image descriptions: what the agent is doing (action) and
what surrounds it (location). Image slots use placeholder tokens of the form
``<label-id-IMG>`` resolved against scene objects.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Optional

import numpy as np

from .errors import SamplingError, SceneValidationError
from .geometry import TWO_PI, heading_of, normalize_angle
from .scene import ObjectInstance, OccupancyGrid, Scene, scene_grid

PLACEHOLDER_RE = re.compile(r"<([a-z][a-z0-9_ ]*)-([0-9]+)-IMG>")
TEMPLATE_SLOT_RE = re.compile(r"<([a-z][a-z0-9_ ]*)-<ID>-IMG>")

INTERACTIONS = ("standing", "sitting", "interact_large", "interact_small")

DEFAULT_INTERACTION_RADIUS = 1.0
LARGE_VOLUME_THRESHOLD = 0.3  # m^3, fallback when a pack carries no flags
SEAT_SHRINK = 0.8  # seat sampling rectangle, shrunk 20% toward center


# ---------------------------------------------------------------------------
# Interleaved text


@dataclass(frozen=True)
class Segment:
    kind: str  # "text" | "image_slot"
    payload: str
    image_ref: Optional[str] = None


@dataclass(frozen=True)
class InterleavedText:
    segments: tuple[Segment, ...]

    def plain(self) -> str:
        """Concatenation with placeholder tokens kept inline."""
        return "".join(s.payload for s in self.segments)

    def referenced_ids(self) -> list[int]:
        ids = []
        for seg in self.segments:
            if seg.kind == "image_slot":
                m = PLACEHOLDER_RE.fullmatch(seg.payload)
                if m:
                    ids.append(int(m.group(2)))
        return ids

    def validate_against(self, scene: Scene) -> None:
        for seg in self.segments:
            if seg.kind == "image_slot":
                if not PLACEHOLDER_RE.fullmatch(seg.payload):
                    raise SceneValidationError(
                        f"bad placeholder token {seg.payload!r}", field="segments"
                    )
        for oid in self.referenced_ids():
            if not scene.has_object(oid):
                raise SceneValidationError(
                    f"placeholder references missing object {oid}", field="segments"
                )

    def to_json(self) -> list[dict]:
        out = []
        for seg in self.segments:
            d = {"kind": seg.kind, "payload": seg.payload}
            if seg.image_ref is not None:
                d["image_ref"] = seg.image_ref
            out.append(d)
        return out

    @classmethod
    def from_json(cls, data: list[dict]) -> "InterleavedText":
        return cls(
            tuple(Segment(d["kind"], d["payload"], d.get("image_ref")) for d in data)
        )

    @classmethod
    def text(cls, s: str) -> "InterleavedText":
        return cls((Segment("text", s),))


def image_slot(obj: ObjectInstance) -> Segment:
    return Segment("image_slot", f"<{obj.label}-{obj.id}-IMG>", obj.image_ref)


def object_ref_segment(obj: ObjectInstance) -> Segment:
    """Image slot when a crop exists, plain label text otherwise."""
    if obj.image_ref is not None:
        return image_slot(obj)
    return Segment("text", obj.label)


def interleave(*parts: str | Segment) -> InterleavedText:
    segments: list[Segment] = []
    for p in parts:
        if isinstance(p, Segment):
            segments.append(p)
        elif p:
            segments.append(Segment("text", p))
    return InterleavedText(tuple(segments))


def interleave_from_text(text: str, scene: Scene) -> InterleavedText:
    """Split free text on placeholder tokens, resolving image refs from the scene."""
    segments: list[Segment] = []
    pos = 0
    for m in PLACEHOLDER_RE.finditer(text):
        if m.start() > pos:
            segments.append(Segment("text", text[pos : m.start()]))
        oid = int(m.group(2))
        ref = scene.object(oid).image_ref if scene.has_object(oid) else None
        segments.append(Segment("image_slot", m.group(0), ref))
        pos = m.end()
    if pos < len(text):
        segments.append(Segment("text", text[pos:]))
    return InterleavedText(tuple(segments))


# ---------------------------------------------------------------------------
# Situation


@dataclass(frozen=True)
class Situation:
    location: np.ndarray  # (3,) m
    rotation: float  # radians in [0, 2*pi)
    interaction: str
    anchor_object: Optional[int] = None
    action_text: InterleavedText = field(default_factory=lambda: InterleavedText(()))
    location_text: InterleavedText = field(default_factory=lambda: InterleavedText(()))

    def __post_init__(self):
        if self.interaction not in INTERACTIONS:
            raise SceneValidationError(
                f"unknown interaction {self.interaction!r}", field="situation.interaction"
            )
        if not (0.0 <= self.rotation < TWO_PI):
            raise SceneValidationError(
                f"rotation {self.rotation} outside [0, 2*pi)", field="situation.rotation"
            )
        if (self.anchor_object is None) != (self.interaction == "standing"):
            raise SceneValidationError(
                "anchor_object must be present iff interaction != standing",
                field="situation.anchor_object",
            )

    def to_json(self) -> dict:
        d = {
            "loc": [float(v) for v in self.location],
            "rot_deg": round(math.degrees(self.rotation), 6),
            "interaction": self.interaction,
            "action_text": self.action_text.to_json(),
            "location_text": self.location_text.to_json(),
        }
        if self.anchor_object is not None:
            d["anchor_object"] = self.anchor_object
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Situation":
        return cls(
            location=np.asarray(d["loc"], dtype=float),
            rotation=normalize_angle(math.radians(float(d["rot_deg"]))),
            interaction=d["interaction"],
            anchor_object=d.get("anchor_object"),
            action_text=InterleavedText.from_json(d.get("action_text", [])),
            location_text=InterleavedText.from_json(d.get("location_text", [])),
        )


# ---------------------------------------------------------------------------
# HOI bank


class HoiBank:
    """Per-label templates of action sentences, each with exactly one image slot."""

    def __init__(self, templates: dict[str, list[str]]):
        for label, entries in templates.items():
            for t in entries:
                if len(TEMPLATE_SLOT_RE.findall(t)) != 1:
                    raise SceneValidationError(
                        f"template for {label!r} must contain exactly one "
                        f"<label-<ID>-IMG> slot: {t!r}",
                        field="hoi_bank",
                    )
        self.templates = templates

    @classmethod
    def load(cls, path: str | Path) -> "HoiBank":
        return cls(json.loads(Path(path).read_text()))

    @classmethod
    def bundled(cls) -> "HoiBank":
        return cls.load(Path(__file__).parent / "data" / "hoi_bank.json")

    def has(self, label: str) -> bool:
        return label in self.templates

    def render(self, obj: ObjectInstance, rng: Random) -> InterleavedText:
        """One action sentence for the object; generic fallback for unknown labels."""
        entries = self.templates.get(obj.label)
        if entries:
            template = entries[rng.randrange(len(entries))]
            m = TEMPLATE_SLOT_RE.search(template)
            return interleave(
                template[: m.start()],
                Segment("image_slot", f"<{obj.label}-{obj.id}-IMG>", obj.image_ref),
                template[m.end() :],
            )
        return interleave(
            "I am interacting with the ",
            Segment("image_slot", f"<{obj.label}-{obj.id}-IMG>", obj.image_ref),
            ".",
        )

    def verbs_for(self, label: str) -> list[str]:
        """Base-form verbs extracted from this label's templates (for goal texts)."""
        verbs = []
        for t in self.templates.get(label, []):
            m = re.match(r"I am ([a-z ]+?) the <", t)
            if not m:
                continue
            base = gerund_to_base(m.group(1))
            if base and base not in verbs:
                verbs.append(base)
        return verbs


_GERUND_BASE = {
    "opening": "open", "closing": "close", "locking": "lock", "unlocking": "unlock",
    "repairing": "repair", "adjusting": "adjust", "hanging": "hang", "moving": "move",
    "photographing": "photograph", "wearing": "wear", "carrying": "carry",
    "cleaning": "clean", "wiping": "wipe", "washing": "wash", "drying": "dry",
    "using": "use", "reading": "read", "watching": "watch", "turning on": "turn on",
    "turning off": "turn off", "switching on": "switch on", "switching off": "switch off",
    "sitting on": "sit on", "lying on": "lie on", "making": "make", "folding": "fold",
    "watering": "water", "emptying": "empty", "filling": "fill", "charging": "charge",
    "playing": "play", "tuning": "tune", "plugging in": "plug in", "drawing on": "draw on",
    "writing on": "write on", "looking through": "look through", "looking into": "look into",
    "looking in": "look in", "picking up": "pick up", "putting items in": "put items in",
    "putting away": "put away", "taking out": "take out", "flushing": "flush",
    "pushing": "push", "pulling": "pull", "stacking": "stack", "organizing": "organize",
    "arranging": "arrange", "dusting": "dust", "polishing": "polish", "checking": "check",
    "winding": "wind", "setting": "set", "loading": "load", "unloading": "unload",
    "typing on": "type on", "browsing on": "browse on", "answering": "answer",
    "straightening": "straighten", "fluffing": "fluff", "drinking from": "drink from",
    "eating from": "eat from", "pouring water into": "pour water into",
    "rinsing": "rinse", "scrubbing": "scrub", "sweeping under": "sweep under",
    "sorting items on": "sort items on", "searching": "search", "inspecting": "inspect",
}


def gerund_to_base(phrase: str) -> Optional[str]:
    """Base form of a progressive verb phrase; table first, suffix rules after."""
    phrase = phrase.strip()
    if phrase in _GERUND_BASE:
        return _GERUND_BASE[phrase]
    head, _, rest = phrase.partition(" ")
    if not head.endswith("ing") or len(head) <= 4:
        return None
    stem = head[:-3]
    if len(stem) >= 2 and stem[-1] == stem[-2] and stem[-1] not in "ls":
        stem = stem[:-1]  # sitting -> sit, but filling -> fill
    return (stem + (" " + rest if rest else "")).strip()


def build_hoi_prompt(label: str, n: int = 10) -> list[dict]:
    """Chat messages asking for n new action sentences for one object label,
    in the bank's template form (one slot, progressive voice)."""
    if not re.match(r"[a-z][a-z0-9_ ]*$", label):
        raise SceneValidationError(f"bad label {label!r}", field="label")
    slot = f"<{label}-<ID>-IMG>"
    prompt = (
        f"Generate {n} short first-person sentences describing a person "
        f"interacting with a {label}. Each sentence must be on its own line, "
        f'start with "I am", use a present-progressive verb, and refer to the '
        f"object exactly once with the placeholder {slot}.\n"
        f"Example: I am opening the {slot}."
    )
    return [{"role": "user", "content": prompt}]


def parse_hoi_response(label: str, raw: str) -> list[str]:
    """Templates out of a bank-extension reply; lines that are not valid
    single-slot templates are dropped."""
    out = []
    for line in raw.splitlines():
        line = line.strip().lstrip("-*0123456789. ").strip()
        if not line:
            continue
        found = TEMPLATE_SLOT_RE.findall(line)
        if len(found) == 1 and found[0] == label and line.startswith("I am "):
            out.append(line)
    return out


def extend_bank(bank: HoiBank, label: str, llm, n: int = 10) -> HoiBank:
    """Grow the bank for one label via a (cached) chat call."""
    raw = llm.complete(build_hoi_prompt(label, n))
    templates = parse_hoi_response(label, raw)
    merged = dict(bank.templates)
    existing = merged.get(label, [])
    merged[label] = existing + [t for t in templates if t not in existing]
    return HoiBank(merged)


# ---------------------------------------------------------------------------
# Interactable classification


def classify_interactable(obj: ObjectInstance) -> Optional[str]:
    """"large" / "small" / None. Flags win; unflagged packs fall back to volume."""
    if "large_interactable" in obj.flags:
        return "large"
    if "small_interactable" in obj.flags:
        return "small"
    if obj.flags:
        return None
    volume = float(np.prod(obj.size))
    if obj.interactive_part is not None and volume >= LARGE_VOLUME_THRESHOLD:
        return "large"
    if volume < LARGE_VOLUME_THRESHOLD:
        return "small"
    return None


# ---------------------------------------------------------------------------
# Samplers
#
# All samplers take a caller-owned seeded rng and are bit-reproducible under
# equal seeds. The grid argument avoids re-rasterizing per sample; omit it to
# derive one with default cell/clearance.


def _uniform_rotation(rng: Random) -> float:
    return rng.random() * TWO_PI


def _pick_cell(cells: list[tuple[int, int]], rng: Random) -> tuple[int, int]:
    return cells[rng.randrange(len(cells))]


def sample_standing(scene: Scene, rng: Random, grid: OccupancyGrid | None = None) -> Situation:
    """Uniform over passable floor cells, uniform heading in [0, 2*pi)."""
    grid = grid if grid is not None else scene_grid(scene)
    cells = grid.passable_cells()
    if not cells:
        raise SamplingError("scene has no standable area")
    r, c = _pick_cell(cells, rng)
    xy = grid.cell_center(r, c)
    return Situation(
        location=np.array([xy[0], xy[1], scene.floor.z]),
        rotation=_uniform_rotation(rng),
        interaction="standing",
    )


def sample_sitting(scene: Scene, rng: Random) -> Situation:
    """Uniform point on a sittable object's top surface, facing along its backrest normal."""
    candidates = [o for o in scene.with_flag("sittable") if o.front_normal is not None]
    if not candidates:
        raise SamplingError("scene has no sittable object with a front normal")
    obj = candidates[rng.randrange(len(candidates))]
    dx = (rng.random() - 0.5) * obj.size[0] * SEAT_SHRINK
    dy = (rng.random() - 0.5) * obj.size[1] * SEAT_SHRINK
    return Situation(
        location=np.array([obj.centroid[0] + dx, obj.centroid[1] + dy, obj.top_z]),
        rotation=heading_of(obj.front_normal),
        interaction="sitting",
        anchor_object=obj.id,
    )


def _cells_near(
    grid: OccupancyGrid, center_xy: np.ndarray, radius: float
) -> list[tuple[int, int]]:
    out = []
    for r, c in grid.passable_cells():
        p = grid.cell_center(r, c)
        if math.hypot(p[0] - center_xy[0], p[1] - center_xy[1]) <= radius:
            out.append((r, c))
    return out


def sample_interact_large(
    scene: Scene,
    obj: ObjectInstance,
    rng: Random,
    grid: OccupancyGrid | None = None,
    radius: float = DEFAULT_INTERACTION_RADIUS,
) -> Situation:
    """Stand near the interactive part on its normal side, facing the part."""
    if obj.interactive_part is None:
        raise SamplingError(f"object {obj.id} has no interactive part")
    grid = grid if grid is not None else scene_grid(scene)
    part = obj.interactive_part
    center = np.asarray(part.center[:2], dtype=float)
    normal = np.asarray(part.normal, dtype=float)
    cells = [
        (r, c)
        for (r, c) in _cells_near(grid, center, radius)
        if float(np.dot(grid.cell_center(r, c) - center, normal)) > 0
    ]
    if not cells:
        raise SamplingError("object unreachable")
    r, c = _pick_cell(cells, rng)
    xy = grid.cell_center(r, c)
    return Situation(
        location=np.array([xy[0], xy[1], scene.floor.z]),
        rotation=heading_of(-normal),
        interaction="interact_large",
        anchor_object=obj.id,
    )


def sample_interact_small(
    scene: Scene,
    obj: ObjectInstance,
    rng: Random,
    grid: OccupancyGrid | None = None,
    radius: float = DEFAULT_INTERACTION_RADIUS,
) -> Situation:
    """Stand near the object, facing its center."""
    grid = grid if grid is not None else scene_grid(scene)
    center = np.asarray(obj.centroid[:2], dtype=float)
    cells = _cells_near(grid, center, radius)
    if not cells:
        raise SamplingError("object unreachable")
    r, c = _pick_cell(cells, rng)
    xy = grid.cell_center(r, c)
    return Situation(
        location=np.array([xy[0], xy[1], scene.floor.z]),
        rotation=heading_of(center - xy),
        interaction="interact_small",
        anchor_object=obj.id,
    )


def sample_situation(
    scene: Scene,
    interaction: str,
    rng: Random,
    grid: OccupancyGrid | None = None,
    radius: float = DEFAULT_INTERACTION_RADIUS,
) -> Situation:
    """Dispatch one sample of the requested interaction type."""
    if interaction == "standing":
        return sample_standing(scene, rng, grid)
    if interaction == "sitting":
        return sample_sitting(scene, rng)
    kind = "large" if interaction == "interact_large" else "small"
    eligible = [o for o in scene.objects if classify_interactable(o) == kind]
    if kind == "large":
        eligible = [o for o in eligible if o.interactive_part is not None]
    if not eligible:
        raise SamplingError(f"scene has no {kind}-interactable object")
    obj = eligible[rng.randrange(len(eligible))]
    if interaction == "interact_large":
        return sample_interact_large(scene, obj, rng, grid, radius)
    return sample_interact_small(scene, obj, rng, grid, radius)


# ---------------------------------------------------------------------------
# Descriptions


def render_action_description(
    scene: Scene, s: Situation, bank: HoiBank, rng: Random
) -> InterleavedText:
    if s.interaction == "standing":
        return InterleavedText.text("I am standing on the floor.")
    anchor = scene.object(s.anchor_object)
    if s.interaction == "sitting":
        return interleave("I am sitting on the ", image_slot(anchor), ".")
    return bank.render(anchor, rng)


def render_location_description(
    scene: Scene,
    s: Situation,
    k: int = 3,
    llm=None,
) -> InterleavedText:
    """Describe the k nearest objects by distance band and clock direction.

    Offline: a deterministic template. With a chat client: the same relations
    are sent as a prompt and the (cached) response is interleaved back.
    """
    from .graph import agent_relation  # local import; graph depends on this module

    if k < 1:
        raise SamplingError("k must be >= 1")
    ranked = sorted(
        scene.objects,
        key=lambda o: (
            math.hypot(o.centroid[0] - s.location[0], o.centroid[1] - s.location[1]),
            o.id,
        ),
    )[: min(k, len(scene.objects))]

    relations = [(obj, agent_relation(s, obj)) for obj in ranked]

    if llm is not None:
        lines = [
            f"{obj.inst_name}: {rel.band}, {rel.coarse}, {rel.clock} o'clock"
            for obj, rel in relations
        ]
        prompt = (
            "Rewrite the following agent-to-object spatial relations as one short, "
            "natural first-person paragraph describing where I am. Refer to each "
            "object with its placeholder token <label-id-IMG>.\n"
            + "\n".join(lines)
        )
        response = llm.complete([{"role": "user", "content": prompt}])
        return interleave_from_text(response, scene)

    parts: list[str | Segment] = []
    for obj, rel in relations:
        parts.append("There is a " if not parts else " There is a ")
        parts.append(object_ref_segment(obj))
        parts.append(f" at my {rel.clock} o'clock, {rel.band}.")
    return interleave(*parts)
