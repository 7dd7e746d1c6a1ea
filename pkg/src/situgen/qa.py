"""QA pair generation over situated scene graphs.

Two generation routes share one question catalog: an offline template route
whose answers are computed directly from graph predicates (correct by
construction), and an LLM route built from a deterministic graph
serialization, instructions, and seed-example combinations. Negative
existence augmentation mints verified-"no" questions from in-the-wild labels
and empty in-scene predicates.
"""

from __future__ import annotations

import ast
import base64
import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Optional

from .errors import GenerationError, ParseError
from .graph import SituatedGraph, graph_key
from .scene import ATTRIBUTE_KEYS, AttributeRecord, ObjectInstance, Scene
from .situations import (
    InterleavedText,
    Segment,
    Situation,
    interleave,
    interleave_from_text,
    object_ref_segment,
)

logger = logging.getLogger(__name__)

CATEGORIES = (
    "counting",
    "existence",
    "attribute",
    "description",
    "spatial",
    "navigation",
    "refer",
    "room_type",
    "affordance",
)
PROVENANCES = ("template", "llm", "augmented")

DEFAULT_MIX = {
    "counting": 0.15,
    "existence": 0.20,
    "spatial": 0.20,
    "refer": 0.15,
    "navigation": 0.10,
    "attribute": 0.08,
    "description": 0.05,
    "room_type": 0.04,
    "affordance": 0.03,
}

COARSE_PHRASE = {
    "left": "on my left",
    "right": "on my right",
    "front": "in front of me",
    "behind": "behind me",
}

ATTR_HUMAN = {
    "color": "color",
    "shape3d": "3D shape",
    "material": "material",
    "usage": "usage",
    "texture": "texture",
    "structure": "structure",
    "state": "state",
}

_DATA = Path(__file__).parent / "data"


def _load_data(name: str):
    return json.loads((_DATA / name).read_text())


def load_room_rules() -> dict[str, list[str]]:
    return _load_data("room_rules.json")


def load_affordances() -> dict[str, str]:
    return _load_data("affordances.json")


def load_seed_examples() -> list[dict]:
    return _load_data("seed_examples.json")


# ---------------------------------------------------------------------------
# QA pairs


@dataclass
class QAPair:
    qa_id: str
    scene_id: str
    situation: Situation
    question: InterleavedText
    answer: str
    category: str
    provenance: str = "template"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise GenerationError(f"unknown category {self.category!r}")
        if self.provenance not in PROVENANCES:
            raise GenerationError(f"unknown provenance {self.provenance!r}")
        if not self.answer:
            raise GenerationError("answer must be non-empty")

    def to_json(self) -> dict:
        d = {
            "qa_id": self.qa_id,
            "scene_id": self.scene_id,
            "situation": self.situation.to_json(),
            "question": self.question.to_json(),
            "answer": self.answer,
            "category": self.category,
            "provenance": self.provenance,
        }
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_json(cls, d: dict) -> "QAPair":
        return cls(
            qa_id=d["qa_id"],
            scene_id=d["scene_id"],
            situation=Situation.from_json(d["situation"]),
            question=InterleavedText.from_json(d["question"]),
            answer=d["answer"],
            category=d["category"],
            provenance=d.get("provenance", "template"),
            meta=d.get("meta", {}),
        )


def make_qa_id(scene_id: str, graph_id: str, category: str, question: str, answer: str) -> str:
    payload = f"{scene_id}|{graph_id}|{category}|{question}|{answer}"
    return hashlib.sha1(payload.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Wild vocabulary


class WildVocab:
    """Object labels guaranteed absent from indoor scenes (checked per scene)."""

    def __init__(self, labels: list[str]):
        self.labels = list(labels)

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def load(cls, path: str | Path) -> "WildVocab":
        return cls(json.loads(Path(path).read_text()))

    @classmethod
    def bundled(cls) -> "WildVocab":
        return cls.load(_DATA / "wild_vocab.json")

    def usable_for(self, scene: Scene) -> list[str]:
        present = scene.labels()
        return [w for w in self.labels if w not in present]


# ---------------------------------------------------------------------------
# Graph predicates (shared with the refinement validators)


def pluralize(label: str) -> str:
    if re.search(r"(s|x|z|ch|sh)$", label):
        return label + "es"
    if re.search(r"[^aeiou]y$", label):
        return label[:-1] + "ies"
    return label + "s"


def match_nodes(
    g: SituatedGraph,
    label: str,
    coarse: Optional[str] = None,
    clock: Optional[int] = None,
    band: Optional[str] = None,
    attr_words: tuple[str, ...] = (),
) -> list[ObjectInstance]:
    """Nodes matching a label plus optional agent-relative and attribute filters."""
    agent = {ae.object: ae for ae in g.agent_edges}
    out = []
    for obj in g.objects():
        if obj.label != label:
            continue
        ae = agent.get(obj.id)
        if coarse is not None and (ae is None or ae.coarse != coarse):
            continue
        if clock is not None and (ae is None or ae.clock != clock):
            continue
        if band is not None and (ae is None or ae.band != band):
            continue
        values = set(obj.attributes.short().values())
        words = {w for v in values for w in v.split()} | values
        if any(w not in words for w in attr_words):
            continue
        out.append(obj)
    return out


def graph_labels(g: SituatedGraph) -> list[str]:
    return sorted({o.label for o in g.objects()})


# ---------------------------------------------------------------------------
# Template generation


BAND_PHRASE = {"near": "a short distance", "middle": "a middle distance", "far": "a long distance"}


def navigation_answer(coarse: str, clock: int, band: str) -> str:
    move = {
        "front": "Walk straight ahead toward your",
        "left": "Turn left toward your",
        "right": "Turn right toward your",
        "behind": "Turn around toward your",
    }[coarse]
    return f"{move} {clock} o'clock, then walk {BAND_PHRASE[band]}."


def spatial_answer(kind: str, src_label: str, dst_label: str, extra_label: str | None = None) -> str:
    phrases = {
        "left": f"The {src_label} is on the left of the {dst_label}.",
        "right": f"The {src_label} is on the right of the {dst_label}.",
        "front": f"The {src_label} is in front of the {dst_label}.",
        "behind": f"The {src_label} is behind the {dst_label}.",
        "near": f"The {src_label} is near the {dst_label}.",
        "far": f"The {src_label} is far from the {dst_label}.",
        "above": f"The {src_label} is above the {dst_label}.",
        "below": f"The {src_label} is below the {dst_label}.",
        "support": f"The {dst_label} is on top of the {src_label}.",
        "inside": f"The {dst_label} is inside the {src_label}.",
        "aligned": f"The {src_label} is aligned with the {dst_label}.",
    }
    if kind == "between":
        return f"The {src_label} is between the {dst_label} and the {extra_label}."
    return phrases[kind]


def compose_description(obj: ObjectInstance) -> str:
    attrs = obj.attributes
    if attrs.descriptive:
        parts = [attrs.descriptive[k] for k in ATTRIBUTE_KEYS if k in attrs.descriptive]
        if parts:
            return " ".join(parts)
    text = f"It's a {attrs.color} {obj.label}" if attrs.color else f"It's a {obj.label}"
    if attrs.shape3d:
        text += f" with a {attrs.shape3d} shape"
    if attrs.material:
        text += f", made of {attrs.material}"
    if attrs.usage:
        text += f", used for {attrs.usage}"
    if attrs.texture:
        text += f", with a {attrs.texture} texture"
    if attrs.state:
        text += f", currently {attrs.state}"
    return text + "."


class _TemplateGen:
    """One attempt per call; returns (question, answer, meta) or None."""

    def __init__(self, g: SituatedGraph, rng: Random):
        self.g = g
        self.rng = rng
        self.labels = graph_labels(g)
        self.agent = {ae.object: ae for ae in g.agent_edges}
        self.room_rules = load_room_rules()
        self.affordances = load_affordances()

    def _pick(self, seq):
        return seq[self.rng.randrange(len(seq))]

    def _unique_label_objects(self) -> list[ObjectInstance]:
        counts: dict[str, int] = {}
        for o in self.g.objects():
            counts[o.label] = counts.get(o.label, 0) + 1
        return [o for o in self.g.objects() if counts[o.label] == 1]

    def _ref(self, obj: ObjectInstance) -> Segment:
        return object_ref_segment(obj)

    def counting(self):
        if not self.labels:
            return None
        label = self._pick(self.labels)
        plural = pluralize(label)
        if self.rng.random() < 0.5:
            count = len(match_nodes(self.g, label))
            q = interleave(f"How many {plural} are in the room?")
            meta = {"predicate": {"label": label}}
        else:
            coarse = self._pick(list(COARSE_PHRASE))
            count = len(match_nodes(self.g, label, coarse=coarse))
            q = interleave(f"How many {plural} are {COARSE_PHRASE[coarse]}?")
            meta = {"predicate": {"label": label, "coarse": coarse}}
        return q, str(count), meta

    def existence(self):
        if not self.labels:
            return None
        label = self._pick(self.labels)
        variant = self.rng.randrange(3)
        if variant == 0:
            present = len(match_nodes(self.g, label)) > 0
            q = interleave(f"Is there a {label} in the room?")
            meta = {"predicate": {"label": label}}
        elif variant == 1:
            coarse = self._pick(list(COARSE_PHRASE))
            present = len(match_nodes(self.g, label, coarse=coarse)) > 0
            q = interleave(f"Is there a {label} {COARSE_PHRASE[coarse]}?")
            meta = {"predicate": {"label": label, "coarse": coarse}}
        else:
            clock = self._pick(list(range(1, 13)))
            present = len(match_nodes(self.g, label, clock=clock)) > 0
            q = interleave(f"Is there a {label} at my {clock} o'clock?")
            meta = {"predicate": {"label": label, "clock": clock}}
        return q, "yes" if present else "no", meta

    def spatial(self):
        counts: dict[str, int] = {}
        for o in self.g.objects():
            counts[o.label] = counts.get(o.label, 0) + 1

        def unique(oid: int) -> bool:
            return counts[self.g.nodes[oid].label] == 1

        edges = [
            e
            for e in self.g.all_edges()
            if e.kind != "aligned"
            and unique(e.src)
            and unique(e.dst)
            and (e.extra is None or unique(e.extra))
        ]
        if not edges:
            return None
        e = self._pick(edges)
        src = self.g.nodes[e.src].label
        dst = self.g.nodes[e.dst].label
        extra = self.g.nodes[e.extra].label if e.extra is not None else None
        if e.kind == "between":
            q = interleave(f"Where is the {src} relative to the {dst} and the {extra}?")
        elif e.kind in ("support", "inside"):
            q = interleave(f"What is the relationship between the {dst} and the {src}?")
        else:
            q = interleave(f"What is the relationship between the {src} and the {dst}?")
        answer = spatial_answer(e.kind, src, dst, extra)
        return q, answer, {"predicate": {"edge": e.to_json()}}

    def navigation(self):
        objs = self._unique_label_objects()
        if not objs:
            return None
        obj = self._pick(objs)
        ae = self.agent[obj.id]
        q = interleave("How do I get to the ", self._ref(obj), " from here?")
        return (
            q,
            navigation_answer(ae.coarse, ae.clock, ae.band),
            {"predicate": {"object": obj.id, "coarse": ae.coarse, "clock": ae.clock, "band": ae.band}},
        )

    def refer(self):
        objs = self.g.objects()
        if not objs:
            return None
        obj = self._pick(objs)
        ae = self.agent[obj.id]
        matches = [o for o in objs if self.agent[o.id].clock == ae.clock and self.agent[o.id].band == ae.band]
        if len(matches) != 1:
            return None
        color = obj.attributes.color
        answer = f"the {color} {obj.label}" if color else f"the {obj.label}"
        q = interleave(
            f"What is the object at my {ae.clock} o'clock at a {ae.band} distance?"
        )
        return q, answer, {"predicate": {"clock": ae.clock, "band": ae.band, "object": obj.id}}

    def attribute(self):
        candidates = [
            o for o in self.g.objects() if o.attributes.short() and
            (o.image_ref is not None or len(match_nodes(self.g, o.label)) == 1)
        ]
        if not candidates:
            return None
        obj = self._pick(candidates)
        key = self._pick(sorted(obj.attributes.short()))
        q = interleave(f"What is the {ATTR_HUMAN[key]} of the ", self._ref(obj), "?")
        return q, obj.attributes.short()[key], {"predicate": {"object": obj.id, "attr": key}}

    def description(self):
        candidates = [
            o for o in self.g.objects()
            if len(o.attributes.short()) >= 2 and
            (o.image_ref is not None or len(match_nodes(self.g, o.label)) == 1)
        ]
        if not candidates:
            return None
        obj = self._pick(candidates)
        ae = self.agent[obj.id]
        q = interleave("Describe the ", self._ref(obj), f" {COARSE_PHRASE[ae.coarse]}.")
        return q, compose_description(obj), {"predicate": {"object": obj.id}}

    def room_type(self):
        present = set(self.labels)
        best, best_score = None, 0
        for room, indicative in sorted(self.room_rules.items()):
            score = len(present & set(indicative))
            if score > best_score:
                best, best_score = room, score
        if best is None:
            return None
        q = interleave("What type of room is this?")
        return q, f"a {best}", {"predicate": {"room": best}}

    def affordance(self):
        known = [l for l in self.labels if l in self.affordances]
        if not known:
            return None
        label = self._pick(known)
        q = interleave(f"What can the {label} be used for?")
        return q, self.affordances[label], {"predicate": {"label": label}}


def generate_templated(
    g: SituatedGraph, category: str, rng: Random, n: int
) -> list[QAPair]:
    """Up to n template pairs for one category; answers derive from graph
    predicates, so fewer pairs beat wrong pairs when the graph can't satisfy
    the category."""
    if category not in CATEGORIES:
        raise GenerationError(f"unknown category {category!r}")
    gen = _TemplateGen(g, rng)
    make = getattr(gen, category)
    gid = graph_key(g.scene_id, g.situation)
    out: list[QAPair] = []
    seen: set[str] = set()
    for _ in range(max(20, 8 * n)):
        if len(out) >= n:
            break
        result = make()
        if result is None:
            continue
        question, answer, meta = result
        plain = question.plain()
        if plain in seen:
            continue
        seen.add(plain)
        out.append(
            QAPair(
                qa_id=make_qa_id(g.scene_id, gid, category, plain, answer),
                scene_id=g.scene_id,
                situation=g.situation,
                question=question,
                answer=answer,
                category=category,
                provenance="template",
                meta=meta,
            )
        )
    return out


def allocate_mix(n: int, mix: dict[str, float]) -> dict[str, int]:
    """Largest-remainder allocation; every category lands within ±1 of n*share."""
    shares = [(c, n * mix.get(c, 0.0)) for c in CATEGORIES if mix.get(c, 0.0) > 0]
    alloc = {c: int(s) for c, s in shares}
    leftover = n - sum(alloc.values())
    by_fraction = sorted(shares, key=lambda cs: (-(cs[1] - int(cs[1])), cs[0]))
    for c, _ in by_fraction[:leftover]:
        alloc[c] += 1
    return alloc


def generate_batch(
    g: SituatedGraph,
    rng: Random,
    n: int,
    mix: dict[str, float] | None = None,
) -> list[QAPair]:
    mix = mix or DEFAULT_MIX
    out: list[QAPair] = []
    for category, quota in allocate_mix(n, mix).items():
        out.extend(generate_templated(g, category, rng, quota))
    return out


# ---------------------------------------------------------------------------
# Negative existence augmentation


WILD_COLOR_POOL = ("red", "blue", "green", "purple", "orange", "pink", "yellow")


def augment_negative_existence(
    scene: Scene,
    g: SituatedGraph,
    vocab: WildVocab,
    rng: Random,
    n: int,
) -> list[QAPair]:
    """Mint up to n existence questions whose ground truth is a verified "no".

    Sources: in-the-wild labels absent from the scene, and in-scene labels
    under a direction or attribute that leaves the predicate empty. Every
    question is checked against the graph before emission.
    """
    usable_wild = vocab.usable_for(scene)
    gid = graph_key(g.scene_id, g.situation)
    labels = graph_labels(g)
    out: list[QAPair] = []
    seen: set[str] = set()

    def emit(question: str, meta: dict):
        if question in seen:
            return
        seen.add(question)
        out.append(
            QAPair(
                qa_id=make_qa_id(g.scene_id, gid, "existence", question, "no"),
                scene_id=g.scene_id,
                situation=g.situation,
                question=interleave(question),
                answer="no",
                category="existence",
                provenance="augmented",
                meta=meta,
            )
        )

    for attempt in range(8 * n + 8):
        if len(out) >= n:
            break
        strategy = attempt % 3
        if strategy == 0 and usable_wild:
            w = usable_wild[rng.randrange(len(usable_wild))]
            template = rng.randrange(2)
            q = (
                f"Can I find a {w} in the room?"
                if template == 0
                else f"Is there a {w} in the scene?"
            )
            emit(q, {"predicate": {"label": w}})
        elif strategy == 1 and labels:
            label = labels[rng.randrange(len(labels))]
            coarse = list(COARSE_PHRASE)[rng.randrange(4)]
            if len(match_nodes(g, label, coarse=coarse)) == 0:
                emit(
                    f"Is there a {label} {COARSE_PHRASE[coarse]}?",
                    {"predicate": {"label": label, "coarse": coarse}},
                )
        elif strategy == 2 and labels:
            label = labels[rng.randrange(len(labels))]
            color = WILD_COLOR_POOL[rng.randrange(len(WILD_COLOR_POOL))]
            if len(match_nodes(g, label, attr_words=(color,))) == 0:
                emit(
                    f"Is there a {color} {label} in the room?",
                    {"predicate": {"label": label, "attr_words": [color]}},
                )
    return out


# ---------------------------------------------------------------------------
# LLM prompt assembly


@dataclass
class PromptBundle:
    system: str
    graph_serialization: str
    seed_examples: list[str]
    instructions: str

    def user_text(self) -> str:
        blocks = []
        if self.seed_examples:
            blocks.append("Examples:\n\n" + "\n\n".join(self.seed_examples))
        blocks.append("Scene graph:\n" + self.graph_serialization)
        blocks.append(self.instructions)
        return "\n\n".join(blocks)

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system},
            {"role": "user", "content": self.user_text()},
        ]

    def token_estimate(self) -> int:
        return (len(self.system) + len(self.user_text())) // 4


GENERATION_SYSTEM = (
    "You are an expert annotator creating situated question-answer pairs about a "
    "3D indoor scene. You are given the objects in the scene with their positions, "
    "sizes and attributes, the relations between objects, and the situation of an "
    "agent in the scene. Generate diverse question-answer pairs that depend on the "
    "agent's situation and are grounded in the given scene graph."
)

_QFMT = "Thought: ...\nQ: ...\nA: ...\nT: ..."


def serialize_graph(g: SituatedGraph) -> str:
    """Deterministic text form: one node line per object, then edges, then the
    agent's relations and situation."""
    lines = []
    for obj in g.objects():
        x, y, z = (round(float(v), 2) for v in obj.centroid)
        h, w, d = (round(float(v), 2) for v in obj.size)
        attrs = obj.attributes.short()
        attr_part = ", ".join(attrs.get(k, "unknown") for k in ATTRIBUTE_KEYS)
        lines.append(
            f"{obj.inst_name}: [{x}, {y}, {z}], [{h}, {w}, {d}], {attr_part};"
        )
    for e in g.all_edges():
        src = g.nodes[e.src].inst_name
        dst = g.nodes[e.dst].inst_name
        if e.extra is not None:
            lines.append(f"between({src}, {dst}, {g.nodes[e.extra].inst_name})")
        else:
            lines.append(f"{e.kind}({src}, {dst})")
    for ae in g.agent_edges:
        lines.append(
            f"agent: {g.nodes[ae.object].inst_name} is {ae.band}, {ae.coarse}, "
            f"{ae.clock} o'clock"
        )
    s = g.situation
    loc = ", ".join(f"{float(v):.2f}" for v in s.location)
    lines.append(
        f"situation: location [{loc}], facing {math.degrees(s.rotation):.1f} degrees. "
        f"{s.action_text.plain()} {s.location_text.plain()}".rstrip()
    )
    return "\n".join(lines)


def render_seed_example(seed: dict) -> str:
    return (
        f"Scene graph:\n{seed['graph']}\n"
        f"Thought: {seed['thought']}\n"
        f"Q: {seed['question']}\nA: {seed['answer']}\nT: {seed['type']}"
    )


def build_qa_prompt(
    g: SituatedGraph,
    seeds: list[dict] | None = None,
    seed_combination: tuple[int, ...] = (0, 1, 2),
    n_pairs: int = 10,
    token_budget: int = 6000,
) -> PromptBundle:
    seeds = seeds if seeds is not None else load_seed_examples()
    chosen = [render_seed_example(seeds[i % len(seeds)]) for i in seed_combination]
    categories = ", ".join(CATEGORIES)
    instructions = (
        f"Generate {n_pairs} situated question-answer pairs about this scene.\n"
        "For each pair, first pick the relevant objects and reason over their "
        "attributes and relations step by step on a 'Thought:' line, then write "
        "the question, the answer, and the question type.\n"
        f"Use exactly this output format for each pair:\n{_QFMT}\n"
        f"The type must be one of: {categories}.\n"
        "Refer to objects that have images with their placeholder token "
        "<label-id-IMG>. Questions must depend on the agent's situation where "
        "possible, and every answer must be verifiable from the scene graph."
    )
    bundle = PromptBundle(
        system=GENERATION_SYSTEM,
        graph_serialization=serialize_graph(g),
        seed_examples=chosen,
        instructions=instructions,
    )
    est = bundle.token_estimate()
    if est > token_budget:
        raise GenerationError(
            f"prompt exceeds token budget: ~{est} tokens > {token_budget}"
        )
    return bundle


# ---------------------------------------------------------------------------
# LLM output parsing


_CATEGORY_ALIASES = {
    "counting": "counting",
    "count": "counting",
    "existence": "existence",
    "exist": "existence",
    "non-existence": "existence",
    "attribute": "attribute",
    "attributes": "attribute",
    "description": "description",
    "describe": "description",
    "spatial": "spatial",
    "spatial relation": "spatial",
    "spatial relations": "spatial",
    "spatial relationship": "spatial",
    "navigation": "navigation",
    "refer": "refer",
    "object refer": "refer",
    "object reference": "refer",
    "referring": "refer",
    "room_type": "room_type",
    "room type": "room_type",
    "affordance": "affordance",
}


@dataclass
class ParseResult:
    pairs: list[QAPair]
    skipped: list[tuple[str, str]]  # (fragment, reason)


def parse_llm_output(
    text: str,
    scene: Scene,
    situation: Situation,
    graph_id: str = "",
) -> ParseResult:
    """Extract (question, answer, type) triples from a generation transcript.

    Unknown type strings are rejected with a reason; records missing a field
    are skipped and counted. Zero parsable records raises, carrying the raw
    text for inspection.
    """
    pairs: list[QAPair] = []
    skipped: list[tuple[str, str]] = []
    current: dict[str, str] = {}

    def flush():
        if not current:
            return
        missing = [k for k in ("q", "a", "t") if k not in current]
        if missing:
            skipped.append((current.get("q", "<no question>"), f"missing {','.join(missing)}"))
            current.clear()
            return
        category = _CATEGORY_ALIASES.get(current["t"].strip().lower())
        if category is None:
            skipped.append((current["q"], f"unknown type {current['t']!r}"))
            current.clear()
            return
        question = interleave_from_text(current["q"], scene)
        try:
            question.validate_against(scene)
        except Exception as exc:
            skipped.append((current["q"], f"bad placeholder: {exc}"))
            current.clear()
            return
        answer = current["a"].strip()
        if not answer:
            skipped.append((current["q"], "empty answer"))
            current.clear()
            return
        pairs.append(
            QAPair(
                qa_id=make_qa_id(scene.scene_id, graph_id, category, current["q"], answer),
                scene_id=scene.scene_id,
                situation=situation,
                question=question,
                answer=answer,
                category=category,
                provenance="llm",
            )
        )
        current.clear()

    for line in text.splitlines():
        line = line.strip()
        m = re.match(r"(?i)^(q|question)\s*[:.]\s*(.*)$", line)
        if m:
            flush()
            current["q"] = m.group(2).strip()
            continue
        m = re.match(r"(?i)^(a|answer)\s*[:.]\s*(.*)$", line)
        if m and "q" in current:
            current["a"] = m.group(2).strip()
            continue
        m = re.match(r"(?i)^(t|type)\s*[:.]\s*(.*)$", line)
        if m and "q" in current:
            current["t"] = m.group(2).strip()
            flush()
    flush()

    if not pairs:
        raise ParseError("no parsable QA records in model output", raw=text)
    return ParseResult(pairs=pairs, skipped=skipped)


# ---------------------------------------------------------------------------
# Attribute detection prompts


ATTRIBUTE_OUTPUT_FORMAT = (
    '{"short": {"color": "", "3D shape": "", "material": "", "usage": "", '
    '"texture": "", "structure": "", "state": ""}, '
    '"long": {"color": "", "3D shape": "", "material": "", "usage": "", '
    '"texture": "", "structure": "", "state": ""}}'
)


def build_attribute_prompt(obj: ObjectInstance, image_root: str | Path = ".") -> list[dict]:
    """Vision-chat messages asking for short+long attribute dicts for one object."""
    if obj.image_ref is None:
        raise GenerationError(f"object {obj.id} has no image_ref")
    image_path = Path(image_root) / obj.image_ref
    encoded = base64.b64encode(image_path.read_bytes()).decode()
    prompt = (
        "describe the color, 3D shape, material, usage, texture, structure, state "
        "of the object in the image.\n"
        f"the object maybe a {obj.label}.\n"
        "please directly give a long and short description of the object "
        "separately in python dict format.\n"
        f"the output should be like {ATTRIBUTE_OUTPUT_FORMAT}, and can be parsed "
        "by eval function."
    )
    return [
        {
            "role": "user",
            "content": [
                {"type": "text", "text": prompt},
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:image/jpeg;base64,{encoded}"},
                },
            ],
        }
    ]


_ATTR_KEY_MAP = {
    "color": "color",
    "3d shape": "shape3d",
    "shape": "shape3d",
    "material": "material",
    "usage": "usage",
    "texture": "texture",
    "structure": "structure",
    "state": "state",
}


def parse_attribute_response(raw: str) -> AttributeRecord:
    """Parse the short/long attribute dict out of a vision-model reply.

    Missing keys stay absent (logged); attributes are never guessed.
    """
    start, end = raw.find("{"), raw.rfind("}")
    if start == -1 or end <= start:
        raise ParseError("no dict found in attribute response", raw=raw)
    fragment = raw[start : end + 1]
    data = None
    for parser in (ast.literal_eval, json.loads):
        try:
            data = parser(fragment)
            break
        except Exception:
            continue
    if not isinstance(data, dict):
        raise ParseError("attribute response is not a dict", raw=raw)

    def remap(d: dict | None) -> dict[str, str]:
        out = {}
        for k, v in (d or {}).items():
            key = _ATTR_KEY_MAP.get(str(k).strip().lower())
            if key and isinstance(v, str) and v:
                out[key] = v
        return out

    short = remap(data.get("short"))
    long = remap(data.get("long"))
    missing = [k for k in ATTRIBUTE_KEYS if k not in short]
    if missing:
        logger.warning("attribute response missing keys: %s", ", ".join(missing))
    return AttributeRecord(**short, descriptive=long or None)


def detect_attributes(obj: ObjectInstance, llm, image_root: str | Path = ".") -> AttributeRecord:
    """Prompt a vision endpoint for one object's attributes and parse the reply."""
    response = llm.complete(build_attribute_prompt(obj, image_root))
    return parse_attribute_response(response)
